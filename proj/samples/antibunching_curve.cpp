// Prints the expected g2(tau) of the 397 nm fluorescence at the default
// correlation drive, ideal and as seen through the TDC with background.

#include <cstdio>

#include "ionlight/ionlight.hpp"

int main() {
  using namespace ionlight;
  const ExperimentConfig c;
  const LevelScheme scheme = build_ca40_scheme(ca40_default_config());
  const MasterEquation me =
      master_equation(scheme, experiment_drives(c, scheme, c.g2_saturation, c.g2_detuning));
  const DetectionSampler sampler(me, signal_jump(me), g2_detector(c, scheme));
  const ExpectedG2 e = expected_g2(me, signal_jump(me), sampler, c.tdc);

  std::printf("tau_ns,g2_ideal,g2_measured\n");
  for (std::size_t k = 0; k < e.ideal.tau.size(); k += 5) {
    std::printf("%.0f,%.5f,%.5f\n", e.ideal.tau[k] * 1e9, e.ideal.values[k], e.measured.values[k]);
  }
  std::printf("# background offset %.4f\n", e.offset);
}
