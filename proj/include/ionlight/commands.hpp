#pragma once

// Command implementations behind the ionlight executable. Each command reads the
// loaded configuration, writes its result files into the output directory and
// returns a JSON summary (also written to disk).

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ionlight/atomic_model.hpp"
#include "ionlight/collection_geometry.hpp"
#include "ionlight/correlator.hpp"
#include "ionlight/error.hpp"
#include "ionlight/keyvalue.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/micromotion.hpp"
#include "ionlight/photostream.hpp"
#include "ionlight/pipelines.hpp"
#include "ionlight/presets.hpp"
#include "ionlight/spectroscopy.hpp"
#include "ionlight/timetag_io.hpp"
#include "ionlight/trap_analysis.hpp"

#ifndef IONLIGHT_VERSION
#define IONLIGHT_VERSION "0.0.0"
#endif

namespace ionlight {

inline constexpr const char* kVersion = IONLIGHT_VERSION;

struct RunConfig {
  std::string atom_path;        // empty: built-in defaults
  std::string trap_path;
  std::string experiment_path;
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  // KEY=VALUE overrides, applied to whichever config file defines KEY.
  std::vector<std::string> overrides;

  AtomConfig atom = ca40_default_config();
  TrapSetup trap;
  ExperimentConfig experiment;
  std::uint64_t config_hash = 0;
};

// Parses the referenced files; throws ConfigError with file:line diagnostics.
inline RunConfig load_run_config(RunConfig rc) {
  auto load = [](const std::string& path) {
    return path.empty() ? KeyValueFile::parse("", "<defaults>") : KeyValueFile::load(path);
  };
  KeyValueFile atom = load(rc.atom_path);
  KeyValueFile trap = load(rc.trap_path);
  KeyValueFile exp = load(rc.experiment_path);
  for (const auto& o : rc.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == o.size()) {
      throw ConfigError("override '" + o + "' is not KEY=VALUE");
    }
    const std::string key = o.substr(0, eq), value = o.substr(eq + 1);
    auto has = [&](const std::vector<std::string>& keys) {
      return key != "config_version" && std::find(keys.begin(), keys.end(), key) != keys.end();
    };
    if (has(atom_config_keys())) {
      atom.set(key, value);
    } else if (has(trap_config_keys())) {
      trap.set(key, value);
    } else if (has(experiment_config_keys())) {
      exp.set(key, value);
    } else {
      throw ConfigError("override '" + o + "': unknown key '" + key + "'");
    }
  }
  rc.atom = atom_config_from(atom);
  rc.trap = trap_setup_from(trap);
  rc.experiment = experiment_config_from(exp);
  std::uint64_t h = fnv1a64("ionlight-config");
  for (const auto* kv : {&atom, &trap, &exp}) h = fnv1a64(hex64(kv->hash()), h);
  rc.config_hash = h;
  if (rc.output_dir.empty()) rc.output_dir = ".";
  return rc;
}

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string header_line(const RunConfig& rc, const std::string& command) {
  return "# ionlight " + std::string(kVersion) + " command=" + command +
         " config_hash=" + hex64(rc.config_hash) + " seed=" + std::to_string(rc.seed);
}

inline nlohmann::json summary_header(const RunConfig& rc, const std::string& command) {
  nlohmann::json j;
  j["ionlight_version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = hex64(rc.config_hash);
  j["seed"] = rc.seed;
  return j;
}

inline std::filesystem::path output_path(const RunConfig& rc, const std::string& name) {
  std::filesystem::create_directories(rc.output_dir);
  return std::filesystem::path(rc.output_dir) / name;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("error while writing '" + p.string() + "'");
}

inline void write_summary(const RunConfig& rc, const std::string& name, const nlohmann::json& j) {
  write_text(output_path(rc, name), j.dump(2) + "\n");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scan

struct ScanOptions {
  std::optional<double> saturation;
  std::optional<double> start;  // rad/s
  std::optional<double> stop;
  std::optional<std::size_t> points;
};

inline nlohmann::json cmd_scan(const RunConfig& rc, const ScanOptions& opt = {}) {
  const ExperimentConfig& ex = rc.experiment;
  const LevelScheme scheme = build_ca40_scheme(rc.atom);
  const double s = opt.saturation.value_or(ex.scan_saturation);
  const double start = opt.start.value_or(ex.scan_start);
  const double stop = opt.stop.value_or(ex.scan_stop);
  const std::size_t points = opt.points.value_or(ex.scan_points);
  if (!(s >= 0.0)) throw ConfigError("saturation must be >= 0");
  if (points < 5 || !(stop > start)) throw ConfigError("scan needs >= 5 points and stop > start");

  const DetectorModel det = spectroscopy_detector(ex);
  const auto detunings = linspace(start, stop, points);
  const ScanResult scan = line_scan(scheme, experiment_drives(ex, scheme, s, 0.0), detunings, det);

  std::ostringstream csv;
  csv << detail::header_line(rc, "scan") << "\n";
  csv << "detuning_MHz,combined_cps,ch1_cps,ch2_cps,background_cps\n";
  for (std::size_t k = 0; k < scan.detunings.size(); ++k) {
    csv << detail::num(constants::to_mhz(scan.detunings[k])) << ','
        << detail::num(scan.combined[k]) << ',' << detail::num(scan.channel1[k]) << ','
        << detail::num(scan.channel2[k]) << ',' << detail::num(scan.background) << "\n";
  }
  detail::write_text(detail::output_path(rc, "scan.csv"), csv.str());

  // Peak of the resonance curve at the calibration intensity.
  const double cal_peak =
      line_scan(scheme, experiment_drives(ex, scheme, ex.calibration_saturation, 0.0),
                std::vector<double>{0.0}, det)
          .peak();

  nlohmann::json j = detail::summary_header(rc, "scan");
  j["saturation"] = s;
  j["points"] = points;
  j["background_cps"] = scan.background;
  j["peak_cps"] = scan.peak();
  j["peak_detuning_MHz"] = constants::to_mhz(scan.detunings[scan.peak_index()]);
  j["calibration_saturation"] = ex.calibration_saturation;
  j["calibration_peak_cps"] = cal_peak;
  j["detector_efficiency"] = ex.detector_efficiency;
  const double lo = *std::min_element(scan.combined.begin(), scan.combined.end());
  if (scan.peak() - lo <= 1e-9 * std::max(scan.peak(), 1.0)) {
    j["fit"] = nullptr;
    j["fit_status"] = "flat scan, no line to fit";
  } else {
    const LorentzianFit fit = lorentzian_fit(scan.detunings, scan.combined);
    j["fit"] = {{"center_MHz", constants::to_mhz(fit.center)},
                {"center_err_MHz", constants::to_mhz(fit.center_err)},
                {"hwhm_MHz", constants::to_mhz(fit.hwhm)},
                {"hwhm_err_MHz", constants::to_mhz(fit.hwhm_err)},
                {"peak_cps", fit.peak},
                {"floor_cps", fit.floor}};
    j["fit_status"] = "ok";
  }
  detail::write_summary(rc, "scan_summary.json", j);
  return j;
}

// ---------------------------------------------------------------------------
// g2

enum class G2Mode { Regression, MonteCarlo, Both };

inline G2Mode parse_g2_mode(const std::string& s) {
  if (s == "regression") return G2Mode::Regression;
  if (s == "montecarlo") return G2Mode::MonteCarlo;
  if (s == "both") return G2Mode::Both;
  throw ConfigError("g2 mode must be regression, montecarlo or both");
}

struct G2Options {
  G2Mode mode = G2Mode::Both;
  std::optional<double> duration;  // s
  unsigned threads = 0;
};

inline nlohmann::json cmd_g2(const RunConfig& rc, const G2Options& opt = {}) {
  const ExperimentConfig& ex = rc.experiment;
  const LevelScheme scheme = build_ca40_scheme(rc.atom);
  const MasterEquation me =
      master_equation(scheme, experiment_drives(ex, scheme, ex.g2_saturation, ex.g2_detuning));
  const std::size_t jump = signal_jump(me);
  const DetectorModel det = g2_detector(ex, scheme);
  const DetectionSampler sampler(me, jump, det);
  const ExpectedG2 expected = expected_g2(me, jump, sampler, ex.tdc);
  const double offset = background_offset(ex.sbr[0], ex.sbr[1]);
  const bool mc = opt.mode != G2Mode::Regression;
  const bool reg = opt.mode != G2Mode::MonteCarlo;

  std::optional<MonteCarloG2> run;
  if (mc) {
    MonteCarloOptions mo;
    mo.duration = opt.duration.value_or(ex.acquisition);
    mo.segment = ex.segment;
    mo.seed = rc.seed;
    mo.threads = opt.threads;
    run = monte_carlo_g2(sampler, ex.tdc, mo);
  }

  std::ostringstream csv;
  csv << detail::header_line(rc, "g2") << "\n";
  csv << "tau_ns";
  if (reg) csv << ",g2_regression,g2_expected_measured";
  if (mc) csv << ",g2_montecarlo,g2_montecarlo_err,counts";
  csv << "\n";
  const std::size_t nb = expected.ideal.tau.size();
  for (std::size_t k = 0; k < nb; ++k) {
    csv << detail::num(expected.ideal.tau[k] * 1e9);
    if (reg) {
      csv << ',' << detail::num(expected.ideal.values[k]) << ','
          << detail::num(expected.measured.values[k]);
    }
    if (mc) {
      csv << ',' << detail::num(run->curve.values[k]) << ',' << detail::num(run->curve.errors[k])
          << ',' << run->curve.counts[k];
    }
    csv << "\n";
  }
  detail::write_text(detail::output_path(rc, "g2.csv"), csv.str());
  if (mc) {
    std::ostringstream hist;
    hist << detail::header_line(rc, "g2") << "\n";
    hist << "tau_ns,counts,g2,g2_err\n";
    for (std::size_t k = 0; k < nb; ++k) {
      hist << detail::num(run->curve.tau[k] * 1e9) << ',' << run->curve.counts[k] << ','
           << detail::num(run->curve.values[k]) << ',' << detail::num(run->curve.errors[k]) << "\n";
    }
    detail::write_text(detail::output_path(rc, "histogram.csv"), hist.str());
  }

  nlohmann::json j = detail::summary_header(rc, "g2");
  j["mode"] = reg && mc ? "both" : (reg ? "regression" : "montecarlo");
  j["saturation"] = ex.g2_saturation;
  j["detuning_MHz"] = constants::to_mhz(ex.g2_detuning);
  j["sbr1"] = ex.sbr[0];
  j["sbr2"] = ex.sbr[1];
  j["offset"] = offset;
  j["detected_signal_cps"] = {sampler.detected_signal_rate(0), sampler.detected_signal_rate(1)};
  j["background_cps"] = {det.background[0], det.background[1]};
  const std::size_t zero = nb / 2;
  if (reg) {
    j["regression"] = {{"g2_zero", expected.ideal.values[zero]},
                       {"g2_zero_expected_raw", expected.measured.values[zero]}};
  }
  if (mc) {
    const G2Zero z = estimate_g2_zero(run->curve, offset);
    const CurveComparison cmp =
        compare_to_expectation(run->curve, expected.measured, 0.0, ex.tdc.window);
    j["montecarlo"] = {{"duration_s", run->histogram.duration},
                       {"segments", run->segments},
                       {"signal_counts", {run->signal_counts[0], run->signal_counts[1]}},
                       {"background_counts",
                        {run->background_counts[0], run->background_counts[1]}},
                       {"coincidences", run->histogram.total()},
                       {"g2_zero_raw", z.raw},
                       {"g2_zero", z.value},
                       {"g2_zero_uncertainty", z.uncertainty},
                       {"zero_bin_counts", z.counts},
                       {"bins_compared", cmp.bins},
                       {"fraction_within_3sigma", cmp.fraction_within()},
                       {"reduced_chi2", cmp.reduced_chi2}};
  }
  detail::write_summary(rc, "g2_summary.json", j);
  return j;
}

// ---------------------------------------------------------------------------
// trap

struct TrapOptions {
  bool compare_solid = false;
  bool convergence = false;  // repeat at half the grid spacing
  std::optional<double> spacing;
  bool write_map = true;
};

namespace detail {

inline nlohmann::json trap_json(const TrapAnalysis& a, double spacing) {
  return {{"grid_spacing_um", spacing * 1e6},
          {"radial_depth_eV", a.depth.radial},
          {"axial_depth_eV", a.depth.axial},
          {"depth_eV", a.depth.overall()},
          {"z_center_um", a.depth.z_center * 1e6},
          {"radial_barrier_r_um", a.depth.radial_barrier_r * 1e6},
          {"axial_barrier_z_um", a.depth.axial_barrier_z * 1e6},
          {"secular_radial_MHz", constants::to_mhz(a.secular.radial)},
          {"secular_axial_MHz", constants::to_mhz(a.secular.axial)},
          {"secular_ratio", a.secular.axial / a.secular.radial},
          {"solver_iterations", a.field.residual_history.size()},
          {"max_residual_V", a.field.max_residual}};
}

}  // namespace detail

inline nlohmann::json cmd_trap(const RunConfig& rc, const TrapOptions& opt = {}) {
  TrapSetup setup = rc.trap;
  if (opt.spacing) setup.grid_spacing = *opt.spacing;
  if (!(setup.grid_spacing > 0.0)) throw ConfigError("grid spacing must be > 0");
  const double m = rc.atom.mass, q = rc.atom.charge;

  TrapSetup solid = setup;
  solid.geometry.style = ElectrodeStyle::Solid;
  TrapSetup fine = setup;
  fine.grid_spacing *= 0.5;

  // Independent maps run concurrently.
  std::optional<TrapAnalysis> main_run, solid_run, fine_run;
  std::exception_ptr err_solid, err_fine;
  std::vector<std::thread> extra;
  if (opt.compare_solid) {
    extra.emplace_back([&] {
      try {
        solid_run = analyze_trap(solid, m, q);
      } catch (...) {
        err_solid = std::current_exception();
      }
    });
  }
  if (opt.convergence) {
    extra.emplace_back([&] {
      try {
        fine_run = analyze_trap(fine, m, q);
      } catch (...) {
        err_fine = std::current_exception();
      }
    });
  }
  std::exception_ptr err_main;
  try {
    main_run = analyze_trap(setup, m, q);
  } catch (...) {
    err_main = std::current_exception();
  }
  for (auto& t : extra) t.join();
  for (const auto& e : {err_main, err_solid, err_fine}) {
    if (e) std::rethrow_exception(e);
  }

  const TrapAnalysis& a = *main_run;
  if (opt.write_map) {
    std::ostringstream csv;
    csv << detail::header_line(rc, "trap") << "\n";
    csv << "r_um,z_um,phi_V,E_V_per_m,U_ps_eV\n";
    const auto& g = a.field.grid;
    for (std::size_t j = 0; j < g.nz; ++j) {
      for (std::size_t i = 0; i < g.nr; ++i) {
        const std::size_t k = g.index(i, j);
        csv << detail::num(g.r(i) * 1e6) << ',' << detail::num(g.z(j) * 1e6) << ','
            << detail::num(a.field.phi[k]) << ',' << detail::num(a.field.e_mag(k)) << ','
            << detail::num(a.potential.u_ev[k]) << "\n";
      }
    }
    detail::write_text(detail::output_path(rc, "trap_field.csv"), csv.str());
  }

  nlohmann::json j = detail::summary_header(rc, "trap");
  j["electrode_style"] = style_name(setup.geometry.style);
  j["rf_amplitude_V"] = setup.drive.amplitude;
  j["rf_frequency_MHz"] = constants::to_mhz(setup.drive.frequency);
  j["result"] = detail::trap_json(a, setup.grid_spacing);
  if (solid_run) {
    j["solid"] = detail::trap_json(*solid_run, solid.grid_spacing);
    j["depth_ratio_tubular_to_solid"] = a.depth.overall() / solid_run->depth.overall();
  }
  if (fine_run) {
    j["half_spacing"] = detail::trap_json(*fine_run, fine.grid_spacing);
    const auto rel = [](double coarse, double f) { return std::abs(coarse - f) / std::abs(f); };
    j["convergence"] = {{"radial_change", rel(a.depth.radial, fine_run->depth.radial)},
                        {"axial_change", rel(a.depth.axial, fine_run->depth.axial)}};
  }
  detail::write_summary(rc, "trap_summary.json", j);
  return j;
}

// ---------------------------------------------------------------------------
// geometry

inline std::vector<GeometryRow> cmd_geometry(const RunConfig& rc,
                                             const std::vector<double>& separations,
                                             std::ostream& out) {
  for (double d : separations) {
    if (!(d > 0.0)) throw ConfigError("separations must be > 0");
  }
  const auto rows = geometry_table(rc.experiment.fiber, separations);
  out << detail::header_line(rc, "geometry") << "\n";
  out << "separation_um,na_eff,per_fiber_percent,total_percent,clipped\n";
  for (const auto& r : rows) {
    out << detail::num(r.separation * 1e6) << ',' << detail::num(r.na_eff) << ','
        << detail::num(100.0 * r.per_fiber) << ',' << detail::num(100.0 * r.total) << ','
        << (r.clipped ? "yes" : "no") << "\n";
  }
  return rows;
}

// ---------------------------------------------------------------------------
// straytrack

// CSV: t_s,Ex_V_per_cm,Ey_V_per_cm,Ez_V_per_cm with optional '#' comment lines.
inline std::vector<FieldSample> read_field_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open series file '" + path + "'");
  std::vector<FieldSample> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "t_s,Ex_V_per_cm,Ey_V_per_cm,Ez_V_per_cm") {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": expected header 't_s,Ex_V_per_cm,Ey_V_per_cm,Ez_V_per_cm'");
      }
      header = true;
      continue;
    }
    std::array<double, 4> v{};
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t c = 0; c < 4; ++c) {
      const auto [ptr, ec] = std::from_chars(p, end, v[c]);
      const bool last = c == 3;
      if (ec != std::errc{} || (last ? ptr != end : (ptr == end || *ptr != ','))) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 4 numbers");
      }
      p = ptr + 1;
    }
    out.push_back({v[0], Eigen::Vector3d(v[1], v[2], v[3])});
  }
  if (!header) throw ConfigError(path + ": empty series file");
  return out;
}

inline void write_field_series(const std::string& path, const std::vector<FieldSample>& series,
                               const std::string& header_comment) {
  std::ostringstream s;
  if (!header_comment.empty()) s << header_comment << "\n";
  s << "t_s,Ex_V_per_cm,Ey_V_per_cm,Ez_V_per_cm\n";
  for (const auto& f : series) {
    s << detail::num(f.time) << ',' << detail::num(f.field.x()) << ','
      << detail::num(f.field.y()) << ',' << detail::num(f.field.z()) << "\n";
  }
  detail::write_text(path, s.str());
}

struct StrayOptions {
  std::string input;
  bool with_floor = false;
};

inline nlohmann::json cmd_straytrack(const RunConfig& rc, const StrayOptions& opt) {
  const auto series = read_field_series(opt.input);
  nlohmann::json j = detail::summary_header(rc, "straytrack");
  j["input"] = opt.input;
  j["samples"] = series.size();
  // A series that does not change carries no decay; report gamma = 0 directly.
  bool constant = true;
  for (const auto& s : series) constant = constant && (s.field - series.front().field).norm() == 0.0;
  if (constant) {
    j["rate_per_s"] = 0.0;
    j["rate_err_per_s"] = 0.0;
    j["initial_field_V_per_cm"] = series.front().field.norm();
    j["field_azimuth_deg"] = azimuth_deg(series.front().field);
    j["source_azimuth_deg"] = azimuth_deg(-series.front().field);
    j["fit_status"] = "constant series";
  } else {
    const DecayFit fit = fit_field_decay(series, opt.with_floor);
    j["rate_per_s"] = fit.rate;
    j["rate_err_per_s"] = fit.rate_err;
    j["initial_field_V_per_cm"] = fit.amplitude;
    j["initial_field_err_V_per_cm"] = fit.amplitude_err;
    j["floor_V_per_cm"] = fit.floor;
    j["direction"] = {fit.direction.x(), fit.direction.y(), fit.direction.z()};
    j["field_azimuth_deg"] = fit.field_azimuth_deg;
    j["source_azimuth_deg"] = fit.source_azimuth_deg;
    j["residual_rms_V_per_cm"] = fit.residual_rms;
    j["fit_status"] = "ok";
  }
  detail::write_summary(rc, "straytrack_summary.json", j);
  return j;
}

// ---------------------------------------------------------------------------
// stream

enum class StreamMethod { Sampler, Trajectory };

struct StreamOptions {
  double duration = 1.0;  // s
  std::string format = "bin";
  StreamMethod method = StreamMethod::Sampler;
  std::optional<double> saturation;
  std::optional<double> detuning;  // rad/s
};

inline nlohmann::json cmd_stream(const RunConfig& rc, const StreamOptions& opt) {
  if (!(opt.duration > 0.0)) throw ConfigError("duration must be > 0");
  if (opt.format != "bin" && opt.format != "csv") throw ConfigError("format must be bin or csv");
  const ExperimentConfig& ex = rc.experiment;
  const LevelScheme scheme = build_ca40_scheme(rc.atom);
  const double s = opt.saturation.value_or(ex.g2_saturation);
  const double delta = opt.detuning.value_or(ex.g2_detuning);
  const MasterEquation me = master_equation(scheme, experiment_drives(ex, scheme, s, delta));
  const DetectorModel det = g2_detector(ex, scheme);

  std::pair<PhotonStream, PhotonStream> streams;
  if (opt.method == StreamMethod::Sampler) {
    streams = DetectionSampler(me, signal_jump(me), det).sample(opt.duration, rc.seed);
  } else {
    const EmissionRecord rec = simulate_trajectory(me, opt.duration, derive_seed(rc.seed, 100));
    streams = detect(rec, signal_jump(me), det, opt.duration, rc.seed);
  }

  nlohmann::json model = {{"saturation", s},
                          {"detuning_MHz", constants::to_mhz(delta)},
                          {"method", opt.method == StreamMethod::Sampler ? "sampler" : "trajectory"},
                          {"background_cps", {det.background[0], det.background[1]}},
                          {"config_hash", hex64(rc.config_hash)},
                          {"ionlight_version", kVersion}};
  nlohmann::json j = detail::summary_header(rc, "stream");
  j["model"] = model;
  j["duration_s"] = opt.duration;
  for (const PhotonStream* st : {&streams.first, &streams.second}) {
    TimeTagFile f{*st, rc.seed, model};
    const std::string name = "stream_ch" + std::to_string(st->channel + 1) + "." + opt.format;
    write_timetag(detail::output_path(rc, name).string(), f);
    j["files"].push_back(name);
    j["counts"].push_back(st->size());
    j["signal_counts"].push_back(st->count(Origin::Signal));
  }
  detail::write_summary(rc, "stream_summary.json", j);
  return j;
}

}  // namespace ionlight
