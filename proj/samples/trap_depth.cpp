// Solves the endcap trap field and reports the pseudopotential barriers and
// secular frequencies for tubular and solid centre electrodes.

#include <cstdio>

#include "ionlight/ionlight.hpp"

int main() {
  using namespace ionlight;
  const double mass = constants::ca40_mass_u * constants::atomic_mass_unit;
  const double charge = constants::elementary_charge;
  for (ElectrodeStyle style : {ElectrodeStyle::Tubular, ElectrodeStyle::Solid}) {
    TrapSetup setup;
    setup.geometry.style = style;
    const TrapAnalysis t = analyze_trap(setup, mass, charge);
    std::printf("%-8s radial %.2f eV, axial %.2f eV, omega_r/2pi %.2f MHz, omega_z/2pi %.2f MHz\n",
                style_name(style), t.depth.radial, t.depth.axial,
                constants::to_mhz(t.secular.radial), constants::to_mhz(t.secular.axial));
  }
}
