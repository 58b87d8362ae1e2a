#pragma once

// The 40Ca+ level structure, laser drives and the rotating-frame Hamiltonian.
//
// Levels are scalar (no Zeeman structure). Decays run P1/2 -> {S1/2, D3/2} and
// P3/2 -> {S1/2, D3/2, D5/2}; the D levels are treated as stable.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ionlight/constants.hpp"
#include "ionlight/error.hpp"
#include "ionlight/keyvalue.hpp"

namespace ionlight {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;

enum class Level : std::uint8_t { S12 = 0, P12 = 1, P32 = 2, D32 = 3, D52 = 4 };

inline constexpr std::size_t kNumLevels = 5;
inline constexpr std::array<Level, kNumLevels> kAllLevels{Level::S12, Level::P12, Level::P32,
                                                          Level::D32, Level::D52};

constexpr std::size_t index_of(Level l) { return static_cast<std::size_t>(l); }

constexpr std::string_view label(Level l) {
  constexpr std::array<std::string_view, kNumLevels> names{"S1/2", "P1/2", "P3/2", "D3/2",
                                                           "D5/2"};
  return names[index_of(l)];
}

// Short form used in config keys: S12, P12, ...
constexpr std::string_view key_label(Level l) {
  constexpr std::array<std::string_view, kNumLevels> names{"S12", "P12", "P32", "D32", "D52"};
  return names[index_of(l)];
}

inline std::optional<Level> parse_level(std::string_view s) {
  for (Level l : kAllLevels) {
    if (s == label(l) || s == key_label(l)) return l;
  }
  return std::nullopt;
}

struct DecayChannel {
  Level upper = Level::P12;
  Level lower = Level::S12;
  double rate = 0.0;        // rad/s
  double wavelength = 0.0;  // m

  std::string name() const {
    return std::string(label(upper)) + "->" + std::string(label(lower));
  }
};

// Vacuum wavelengths of the dipole transitions in 40Ca+.
inline double ca40_wavelength(Level upper, Level lower) {
  if (upper == Level::P12 && lower == Level::S12) return 396.959e-9;
  if (upper == Level::P12 && lower == Level::D32) return 866.452e-9;
  if (upper == Level::P32 && lower == Level::S12) return 393.366e-9;
  if (upper == Level::P32 && lower == Level::D32) return 849.802e-9;
  if (upper == Level::P32 && lower == Level::D52) return 854.209e-9;
  throw InvalidArgument("no dipole transition " + std::string(label(upper)) + "->" +
                        std::string(label(lower)) + " in 40Ca+");
}

class LevelScheme {
 public:
  explicit LevelScheme(std::vector<DecayChannel> decays) : decays_(std::move(decays)) {
    for (const auto& d : decays_) {
      if (d.upper == d.lower) {
        throw InvalidArgument("decay channel " + d.name() + " connects a level to itself");
      }
      if (!(d.rate > 0.0) || !std::isfinite(d.rate)) {
        throw InvalidArgument("decay channel " + d.name() + " must have a positive rate");
      }
      if (!(d.wavelength > 0.0)) {
        throw InvalidArgument("decay channel " + d.name() + " must have a positive wavelength");
      }
      for (const auto& other : decays_) {
        if (&other != &d && other.upper == d.upper && other.lower == d.lower) {
          throw InvalidArgument("duplicate decay channel " + d.name());
        }
      }
    }
  }

  const std::array<Level, kNumLevels>& levels() const { return kAllLevels; }
  const std::vector<DecayChannel>& decays() const { return decays_; }

  double total_decay_rate(Level upper) const {
    double sum = 0.0;
    for (const auto& d : decays_) {
      if (d.upper == upper) sum += d.rate;
    }
    return sum;
  }

  double branching(const DecayChannel& d) const { return d.rate / total_decay_rate(d.upper); }

  std::optional<DecayChannel> channel(Level upper, Level lower) const {
    for (const auto& d : decays_) {
      if (d.upper == upper && d.lower == lower) return d;
    }
    return std::nullopt;
  }

  const DecayChannel& require_channel(Level upper, Level lower) const {
    for (const auto& d : decays_) {
      if (d.upper == upper && d.lower == lower) return d;
    }
    throw InvalidArgument("scheme has no decay channel " + std::string(label(upper)) + "->" +
                          std::string(label(lower)));
  }

 private:
  std::vector<DecayChannel> decays_;
};

struct Branching {
  Level upper;
  Level lower;
  double fraction;
};

struct AtomConfig {
  std::map<Level, double> linewidths;  // total decay rate per decaying level, rad/s
  std::vector<Branching> branchings;
  double mass = constants::ca40_mass_u * constants::atomic_mass_unit;  // kg
  double charge = constants::elementary_charge;                       // C

  void validate() const {
    for (const auto& [level, rate] : linewidths) {
      if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw ConfigError("linewidth of " + std::string(label(level)) + " must be >= 0");
      }
    }
    if (!(mass > 0.0)) throw ConfigError("mass must be > 0");
    if (!(charge > 0.0)) throw ConfigError("charge must be > 0");
    std::map<Level, double> sums;
    for (const auto& b : branchings) {
      if (!(b.fraction >= 0.0 && b.fraction <= 1.0)) {
        throw ConfigError("branching " + std::string(label(b.upper)) + "->" +
                          std::string(label(b.lower)) + " must lie in [0, 1]");
      }
      if (!linewidths.count(b.upper)) {
        throw ConfigError("branching out of " + std::string(label(b.upper)) +
                          " given but the level has no linewidth");
      }
      sums[b.upper] += b.fraction;
    }
    for (const auto& [level, rate] : linewidths) {
      const double s = sums.count(level) ? sums.at(level) : 0.0;
      if (std::abs(s - 1.0) > 1e-12) {
        throw ConfigError("branching fractions out of " + std::string(label(level)) +
                          " sum to " + std::to_string(s) + ", expected 1");
      }
    }
  }
};

// Literature values for 40Ca+. Only the P1/2 linewidth (2pi x 22.3 MHz) was measured
// with this apparatus; everything else is external and overridable.
inline AtomConfig ca40_default_config() {
  AtomConfig cfg;
  cfg.linewidths[Level::P12] = constants::mhz(22.3);
  cfg.linewidths[Level::P32] = constants::mhz(22.99);  // tau = 6.924 ns
  cfg.branchings = {
      {Level::P12, Level::S12, 0.93565},
      {Level::P12, Level::D32, 0.06435},
      {Level::P32, Level::S12, 0.9347},
      {Level::P32, Level::D32, 0.0066},
      {Level::P32, Level::D52, 0.0587},
  };
  return cfg;
}

inline const std::vector<std::string>& atom_config_keys() {
  static const std::vector<std::string> keys{
      "config_version",    "linewidth_P12_MHz", "linewidth_P32_MHz", "branching_P12_S12",
      "branching_P12_D32", "branching_P32_S12", "branching_P32_D32", "branching_P32_D52",
      "mass_u",            "charge_e"};
  return keys;
}

inline AtomConfig atom_config_from(const KeyValueFile& kv) {
  if (const auto unknown = kv.unknown_keys(atom_config_keys()); !unknown.empty()) {
    throw ConfigError(kv.source() + ": unknown key '" + unknown.front() + "'");
  }
  if (kv.contains("config_version") && kv.get_uint64("config_version") != 1) {
    throw ConfigError(kv.source() + ": unsupported config_version");
  }
  const AtomConfig defaults = ca40_default_config();
  AtomConfig cfg;
  cfg.linewidths[Level::P12] =
      constants::mhz(kv.get_double("linewidth_P12_MHz",
                                   constants::to_mhz(defaults.linewidths.at(Level::P12))));
  cfg.linewidths[Level::P32] =
      constants::mhz(kv.get_double("linewidth_P32_MHz",
                                   constants::to_mhz(defaults.linewidths.at(Level::P32))));
  for (const auto& b : defaults.branchings) {
    const std::string key = "branching_" + std::string(key_label(b.upper)) + "_" +
                            std::string(key_label(b.lower));
    cfg.branchings.push_back({b.upper, b.lower, kv.get_double(key, b.fraction)});
  }
  cfg.mass = kv.get_double("mass_u", constants::ca40_mass_u) * constants::atomic_mass_unit;
  cfg.charge = kv.get_double("charge_e", 1.0) * constants::elementary_charge;
  cfg.validate();
  return cfg;
}

inline LevelScheme build_ca40_scheme(const AtomConfig& cfg) {
  cfg.validate();
  static constexpr std::array<std::pair<Level, Level>, 5> allowed{{
      {Level::P12, Level::S12},
      {Level::P12, Level::D32},
      {Level::P32, Level::S12},
      {Level::P32, Level::D32},
      {Level::P32, Level::D52},
  }};
  for (const auto& [level, rate] : cfg.linewidths) {
    if (level != Level::P12 && level != Level::P32) {
      throw ConfigError("only P1/2 and P3/2 decay in the 40Ca+ model, got a linewidth for " +
                        std::string(label(level)));
    }
  }
  std::vector<DecayChannel> decays;
  for (const auto& [upper, lower] : allowed) {
    double fraction = 0.0;
    for (const auto& b : cfg.branchings) {
      if (b.upper == upper && b.lower == lower) fraction += b.fraction;
    }
    const double rate = cfg.linewidths.count(upper) ? cfg.linewidths.at(upper) * fraction : 0.0;
    if (rate > 0.0) decays.push_back({upper, lower, rate, ca40_wavelength(upper, lower)});
  }
  for (const auto& b : cfg.branchings) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const auto& p) {
      return p.first == b.upper && p.second == b.lower;
    });
    if (!ok && b.fraction > 0.0) {
      throw ConfigError("no decay channel " + std::string(label(b.upper)) + "->" +
                        std::string(label(b.lower)) + " in the 40Ca+ model");
    }
  }
  return LevelScheme(std::move(decays));
}

// On-resonance Rabi frequency for saturation parameter s = 2 Omega^2 / Gamma^2.
inline double rabi_from_saturation(double s, double gamma) {
  if (!(s >= 0.0) || !(gamma > 0.0)) {
    throw InvalidArgument("rabi_from_saturation requires s >= 0 and gamma > 0");
  }
  return gamma * std::sqrt(s / 2.0);
}

inline double saturation_from_rabi(double rabi, double gamma) {
  return 2.0 * rabi * rabi / (gamma * gamma);
}

struct LaserDrive {
  Level lower;
  Level upper;
  double rabi = 0.0;      // rad/s
  double detuning = 0.0;  // rad/s, laser minus atom; negative is red
};

// RWA Hamiltonian (units of rad/s, hbar = 1) in a frame rotating with every laser.
// Each connected component of the drive graph is referenced to its lowest-index level.
inline Operator hamiltonian(const LevelScheme& /*scheme*/, std::span<const LaserDrive> drives) {
  Operator h = Operator::Zero(kNumLevels, kNumLevels);

  std::array<std::size_t, kNumLevels> parent{};
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  for (std::size_t a = 0; a < drives.size(); ++a) {
    const auto& d = drives[a];
    if (d.lower == d.upper) {
      throw InvalidArgument("drive couples " + std::string(label(d.lower)) + " to itself");
    }
    if (!(d.rabi >= 0.0) || !std::isfinite(d.rabi) || !std::isfinite(d.detuning)) {
      throw InvalidArgument("drive on " + std::string(label(d.lower)) + "-" +
                            std::string(label(d.upper)) + " needs a finite rabi >= 0");
    }
    for (std::size_t b = 0; b < a; ++b) {
      const auto& o = drives[b];
      if ((o.lower == d.lower && o.upper == d.upper) ||
          (o.lower == d.upper && o.upper == d.lower)) {
        throw InvalidArgument("two drives on transition " + std::string(label(d.lower)) + "-" +
                              std::string(label(d.upper)));
      }
    }
    const auto ra = find(index_of(d.lower));
    const auto rb = find(index_of(d.upper));
    if (ra == rb) {
      throw InvalidArgument("drive on " + std::string(label(d.lower)) + "-" +
                            std::string(label(d.upper)) +
                            " closes a loop; no consistent rotating frame exists");
    }
    parent[ra] = rb;
  }

  // Frame energies by breadth-first traversal from each component root.
  std::array<std::optional<double>, kNumLevels> energy{};
  for (std::size_t root = 0; root < kNumLevels; ++root) {
    if (energy[root]) continue;
    energy[root] = 0.0;
    std::queue<std::size_t> todo;
    todo.push(root);
    while (!todo.empty()) {
      const auto cur = todo.front();
      todo.pop();
      for (const auto& d : drives) {
        const auto lo = index_of(d.lower);
        const auto up = index_of(d.upper);
        if (lo == cur && !energy[up]) {
          energy[up] = *energy[lo] - d.detuning;
          todo.push(up);
        } else if (up == cur && !energy[lo]) {
          energy[lo] = *energy[up] + d.detuning;
          todo.push(lo);
        }
      }
    }
  }

  for (std::size_t i = 0; i < kNumLevels; ++i) h(i, i) = *energy[i];
  for (const auto& d : drives) {
    const auto lo = index_of(d.lower);
    const auto up = index_of(d.upper);
    h(up, lo) = d.rabi / 2.0;
    h(lo, up) = d.rabi / 2.0;
  }
  return h;
}

inline Operator hamiltonian(const LevelScheme& scheme, std::initializer_list<LaserDrive> drives) {
  return hamiltonian(scheme, std::span<const LaserDrive>(drives.begin(), drives.size()));
}

}  // namespace ionlight
