#pragma once

// Trap configuration files and the field -> pseudopotential -> depth pipeline.

#include <string>
#include <vector>

#include "ionlight/constants.hpp"
#include "ionlight/error.hpp"
#include "ionlight/keyvalue.hpp"
#include "ionlight/trap_field.hpp"

namespace ionlight {

struct TrapSetup {
  TrapGeometry geometry;
  RfDrive drive;
  double grid_spacing = 5e-6;  // m
  double fit_radius = 20e-6;   // m, region of the secular-frequency fit
};

inline const std::vector<std::string>& trap_config_keys() {
  static const std::vector<std::string> keys{
      "config_version",        "center_outer_radius_um", "center_inner_radius_um",
      "tip_separation_um",     "ground_inner_radius_um", "ground_outer_radius_um",
      "ground_tip_z_um",       "far_field_um",           "electrode_style",
      "rf_amplitude_V",        "rf_frequency_MHz",       "grid_spacing_um",
      "fit_radius_um"};
  return keys;
}

inline ElectrodeStyle parse_electrode_style(const std::string& s) {
  if (s == "tubular") return ElectrodeStyle::Tubular;
  if (s == "solid") return ElectrodeStyle::Solid;
  throw ConfigError("electrode_style must be 'tubular' or 'solid', got '" + s + "'");
}

inline const char* style_name(ElectrodeStyle s) {
  return s == ElectrodeStyle::Tubular ? "tubular" : "solid";
}

inline TrapSetup trap_setup_from(const KeyValueFile& kv) {
  if (const auto unknown = kv.unknown_keys(trap_config_keys()); !unknown.empty()) {
    throw ConfigError(kv.source() + ": unknown key '" + unknown.front() + "'");
  }
  if (kv.contains("config_version") && kv.get_uint64("config_version") != 1) {
    throw ConfigError(kv.source() + ": unsupported config_version");
  }
  TrapSetup t;
  auto& g = t.geometry;
  auto um = [&](const char* key, double& v) { v = kv.get_double(key, v * 1e6) * 1e-6; };
  um("center_outer_radius_um", g.center_outer_radius);
  um("center_inner_radius_um", g.center_inner_radius);
  um("tip_separation_um", g.tip_separation);
  um("ground_inner_radius_um", g.ground_inner_radius);
  um("ground_outer_radius_um", g.ground_outer_radius);
  um("ground_tip_z_um", g.ground_tip_z);
  um("far_field_um", g.far_field);
  um("grid_spacing_um", t.grid_spacing);
  um("fit_radius_um", t.fit_radius);
  if (kv.contains("electrode_style")) g.style = parse_electrode_style(kv.get_string("electrode_style"));
  t.drive.amplitude = kv.get_double("rf_amplitude_V", t.drive.amplitude);
  t.drive.frequency =
      constants::mhz(kv.get_double("rf_frequency_MHz", constants::to_mhz(t.drive.frequency)));
  try {
    g.validate();
    t.drive.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(kv.source() + ": " + e.what());
  }
  if (!(t.grid_spacing > 0.0) || !(t.fit_radius > 0.0)) {
    throw ConfigError(kv.source() + ": grid spacing and fit radius must be > 0");
  }
  return t;
}

struct TrapAnalysis {
  FieldMap field;
  PotentialMap potential;
  TrapDepth depth;
  SecularFrequencies secular;
};

inline TrapAnalysis analyze_trap(const TrapGeometry& geometry, const RfDrive& drive,
                                 double spacing, double mass, double charge,
                                 double fit_radius = 20e-6) {
  TrapAnalysis a;
  a.field = solve_potential(geometry, spacing, drive.amplitude);
  a.potential = pseudopotential(a.field, drive, mass, charge);
  a.depth = trap_depth(a.potential);
  a.secular = secular_frequencies(a.potential, mass, fit_radius);
  return a;
}

inline TrapAnalysis analyze_trap(const TrapSetup& s, double mass, double charge) {
  return analyze_trap(s.geometry, s.drive, s.grid_spacing, mass, charge, s.fit_radius);
}

}  // namespace ionlight
