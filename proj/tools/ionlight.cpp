// ionlight: command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 configuration or usage error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ionlight/commands.hpp"

namespace {

using namespace ionlight;

void print_summary(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator of a fibre-coupled single trapped ion"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunConfig rc;
  app.add_option("--atom", rc.atom_path, "Atom config file (default: built-in 40Ca+)")
      ->check(CLI::ExistingFile);
  app.add_option("--trap", rc.trap_path, "Trap geometry config file")->check(CLI::ExistingFile);
  app.add_option("--experiment", rc.experiment_path, "Detector/laser/correlator config file")
      ->check(CLI::ExistingFile);
  app.add_option("-o,--out", rc.output_dir, "Output directory")->capture_default_str();
  app.add_option("--set", rc.overrides, "Override a config key: KEY=VALUE (repeatable)");
  app.add_option("--seed", rc.seed, "64-bit seed for stochastic commands")->capture_default_str();

  // scan
  auto* scan = app.add_subcommand("scan", "397 nm line scan and Lorentzian fit");
  std::optional<double> scan_s, scan_start, scan_stop;
  std::optional<std::size_t> scan_points;
  scan->add_option("-s,--saturation", scan_s, "Saturation parameter of the 397 nm beam");
  scan->add_option("--start-MHz", scan_start, "First detuning (MHz)");
  scan->add_option("--stop-MHz", scan_stop, "Last detuning (MHz)");
  scan->add_option("--points", scan_points, "Number of scan points");

  // g2
  auto* g2 = app.add_subcommand("g2", "Intensity correlation by regression and/or Monte Carlo");
  std::string g2_mode = "both";
  std::optional<double> g2_duration;
  unsigned g2_threads = 0;
  g2->add_option("--mode", g2_mode, "regression | montecarlo | both")
      ->check(CLI::IsMember({"regression", "montecarlo", "both"}))
      ->capture_default_str();
  g2->add_option("--duration", g2_duration, "Monte Carlo acquisition time (s)");
  g2->add_option("--threads", g2_threads, "Worker threads (0: all cores)");

  // trap
  auto* trap = app.add_subcommand("trap", "Field map, pseudopotential depths, secular frequencies");
  TrapOptions trap_opt;
  std::optional<double> trap_spacing;
  trap->add_flag("--compare-solid", trap_opt.compare_solid, "Also solve with solid electrodes");
  trap->add_flag("--convergence", trap_opt.convergence, "Repeat at half the grid spacing");
  trap->add_option("--spacing-um", trap_spacing, "Grid spacing override (um)");
  bool no_map = false;
  trap->add_flag("--no-map", no_map, "Skip writing the field-map CSV");

  // geometry
  auto* geom = app.add_subcommand("geometry", "Collection efficiency versus fibre distance");
  std::vector<double> separations{275.0, 183.0};
  geom->add_option("separations_um", separations, "Fibre-ion distances (um)")
      ->capture_default_str();

  // straytrack
  auto* stray = app.add_subcommand("straytrack", "Fit the decay of a tracked stray field");
  StrayOptions stray_opt;
  stray->add_option("input", stray_opt.input, "Series CSV (t_s,Ex,Ey,Ez in V/cm)")
      ->required()
      ->check(CLI::ExistingFile);
  stray->add_flag("--floor", stray_opt.with_floor, "Fit a constant floor as well");

  // synthesize a stray-field series
  auto* synth = app.add_subcommand("straysynth", "Write a synthetic stray-field series");
  std::string synth_out = "series.csv";
  double synth_rate = 5e-4, synth_amp = 1.0, synth_duration = 6000.0, synth_interval = 120.0,
         synth_noise = 0.06, synth_azimuth = 30.0;
  synth->add_option("output", synth_out, "Output CSV")->capture_default_str();
  synth->add_option("--rate", synth_rate, "Decay rate (1/s)")->capture_default_str();
  synth->add_option("--amplitude", synth_amp, "Initial field (V/cm)")->capture_default_str();
  synth->add_option("--duration", synth_duration, "Series length (s)")->capture_default_str();
  synth->add_option("--interval", synth_interval, "Sampling interval (s)")->capture_default_str();
  synth->add_option("--noise", synth_noise, "Noise density (V/(cm sqrt(Hz)))")
      ->capture_default_str();
  synth->add_option("--azimuth", synth_azimuth, "Field azimuth in the x-y plane (deg)")
      ->capture_default_str();

  // stream
  auto* stream = app.add_subcommand("stream", "Generate raw detected photon streams");
  StreamOptions stream_opt;
  std::string stream_method = "sampler";
  std::optional<double> stream_detuning;
  stream->add_option("--duration", stream_opt.duration, "Stream length (s)")->capture_default_str();
  stream->add_option("--format", stream_opt.format, "bin | csv")
      ->check(CLI::IsMember({"bin", "csv"}))
      ->capture_default_str();
  stream->add_option("--method", stream_method, "sampler | trajectory")
      ->check(CLI::IsMember({"sampler", "trajectory"}))
      ->capture_default_str();
  stream->add_option("-s,--saturation", stream_opt.saturation, "397 nm saturation parameter");
  stream->add_option("--detuning-MHz", stream_detuning, "397 nm detuning (MHz)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    rc = load_run_config(rc);
    if (*scan) {
      ScanOptions o;
      o.saturation = scan_s;
      if (scan_start) o.start = constants::mhz(*scan_start);
      if (scan_stop) o.stop = constants::mhz(*scan_stop);
      o.points = scan_points;
      print_summary(cmd_scan(rc, o));
    } else if (*g2) {
      G2Options o;
      o.mode = parse_g2_mode(g2_mode);
      o.duration = g2_duration;
      o.threads = g2_threads;
      print_summary(cmd_g2(rc, o));
    } else if (*trap) {
      if (trap_spacing) trap_opt.spacing = *trap_spacing * 1e-6;
      trap_opt.write_map = !no_map;
      print_summary(cmd_trap(rc, trap_opt));
    } else if (*geom) {
      for (double& d : separations) d *= 1e-6;
      cmd_geometry(rc, separations, std::cout);
    } else if (*stray) {
      print_summary(cmd_straytrack(rc, stray_opt));
    } else if (*synth) {
      const double phi = synth_azimuth * constants::pi / 180.0;
      const auto series =
          synthetic_decay_series(synth_amp, synth_rate, {std::cos(phi), std::sin(phi), 0.0},
                                 synth_duration, synth_interval, synth_noise, rc.seed);
      write_field_series(synth_out, series, detail::header_line(rc, "straysynth"));
      std::cout << "wrote " << series.size() << " samples to " << synth_out << "\n";
    } else if (*stream) {
      stream_opt.method =
          stream_method == "sampler" ? StreamMethod::Sampler : StreamMethod::Trajectory;
      if (stream_detuning) stream_opt.detuning = constants::mhz(*stream_detuning);
      print_summary(cmd_stream(rc, stream_opt));
    }
  } catch (const ConfigError& e) {
    std::cerr << "ionlight: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ionlight: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
