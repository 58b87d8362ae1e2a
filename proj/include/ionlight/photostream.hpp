#pragma once

// Photon detection records for the two fibre channels.
//
// simulate_trajectory() is the plain quantum-jump (Monte Carlo wave function)
// unravelling of the master equation and returns every spontaneous emission.
// detect() routes 397 nm emissions to the fibres and adds background.
//
// For long acquisitions DetectionSampler produces the same detected streams
// without materialising undetected emissions: because every jump resets the ion
// to a fixed level, the times between detected photons form a renewal process
// whose survival function follows from the master equation with only the
// detected part of the signal channel unravelled.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ionlight/error.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/random.hpp"

namespace ionlight {

struct DetectorModel {
  std::array<double, 2> collection{0.0, 0.0};  // solid-angle fraction per fibre
  double transmission = 0.8;                   // fibre chain
  double efficiency = 0.0;                     // net detector quantum efficiency
  std::array<double, 2> background{0.0, 0.0};  // counts/s per channel

  // Probability that one signal-channel emission is registered on channel `ch`.
  double routing(std::size_t ch) const { return collection.at(ch) * transmission * efficiency; }

  void validate() const {
    auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!frac(collection[0]) || !frac(collection[1]) || !frac(transmission) || !frac(efficiency)) {
      throw ConfigError("detector fractions must lie in [0, 1]");
    }
    if (!(background[0] >= 0.0) || !(background[1] >= 0.0) || !std::isfinite(background[0]) ||
        !std::isfinite(background[1])) {
      throw ConfigError("background rates must be finite and >= 0");
    }
    if (routing(0) + routing(1) > 1.0) {
      throw ConfigError("routing probabilities of the two channels sum to more than 1");
    }
  }
};

enum class Origin : std::uint8_t { Signal = 0, Background = 1 };

struct PhotonStream {
  int channel = 0;
  double duration = 0.0;      // s
  std::vector<double> times;  // s, strictly increasing
  std::vector<Origin> origin;

  std::size_t size() const { return times.size(); }
  std::size_t count(Origin o) const {
    return static_cast<std::size_t>(std::count(origin.begin(), origin.end(), o));
  }
};

struct EmissionRecord {
  double duration = 0.0;
  std::vector<std::string> channel_names;  // one per jump of the master equation
  std::vector<std::vector<double>> times;  // per channel, increasing

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& t : times) n += t.size();
    return n;
  }
};

namespace detail {

// Solves the cubic Hermite interpolant of the squared norm on [0, h] for `target`.
inline double hermite_crossing(double n0, double d0, double n1, double d1, double h,
                               double target) {
  auto value = [&](double s) {
    const double x = s / h;
    const double x2 = x * x, x3 = x2 * x;
    return (2 * x3 - 3 * x2 + 1) * n0 + (x3 - 2 * x2 + x) * h * d0 + (-2 * x3 + 3 * x2) * n1 +
           (x3 - x2) * h * d1;
  };
  double lo = 0.0, hi = h;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (value(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline void merge_background(PhotonStream& stream, double rate, double duration, Rng& rng) {
  std::vector<double> bg;
  if (rate > 0.0) {
    for (double t = rng.exponential(rate); t < duration; t += rng.exponential(rate)) {
      bg.push_back(t);
    }
  }
  std::vector<double> times;
  std::vector<Origin> origin;
  times.reserve(stream.times.size() + bg.size());
  origin.reserve(times.capacity());
  std::size_t i = 0, j = 0;
  while (i < stream.times.size() || j < bg.size()) {
    const bool take_signal =
        j == bg.size() || (i < stream.times.size() && stream.times[i] <= bg[j]);
    double t = take_signal ? stream.times[i] : bg[j];
    if (!times.empty() && t <= times.back()) t = std::nextafter(times.back(), 1e300);
    times.push_back(t);
    origin.push_back(take_signal ? stream.origin[i] : Origin::Background);
    take_signal ? ++i : ++j;
  }
  stream.times = std::move(times);
  stream.origin = std::move(origin);
}

}  // namespace detail

// Quantum-jump trajectory starting in `initial_level`. Deterministic in `seed`.
inline EmissionRecord simulate_trajectory(const MasterEquation& me, double duration,
                                          std::uint64_t seed, std::size_t initial_level = 0) {
  if (!(duration > 0.0)) throw InvalidArgument("trajectory duration must be > 0");
  const auto n = static_cast<Eigen::Index>(me.dim());
  if (initial_level >= me.dim()) throw InvalidArgument("initial level out of range");

  Eigen::VectorXd loss = Eigen::VectorXd::Zero(n);  // total decay rate per level
  for (const auto& j : me.jumps) loss(static_cast<Eigen::Index>(j.upper)) += j.rate;
  Operator h_eff = me.hamiltonian;
  for (Eigen::Index i = 0; i < n; ++i) h_eff(i, i) -= Complex(0.0, 0.5 * loss(i));

  const double dt = 0.05 / me.rate_scale();
  const Operator step = (Complex(0.0, -dt) * h_eff).exp();
  auto norm_rate = [&](const Eigen::VectorXcd& psi) {
    return -(psi.cwiseAbs2().array() * loss.array()).sum();
  };

  EmissionRecord rec;
  rec.duration = duration;
  for (const auto& j : me.jumps) rec.channel_names.push_back(j.name);
  rec.times.resize(me.jumps.size());
  if (me.jumps.empty()) return rec;

  Rng rng(seed);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
  psi(static_cast<Eigen::Index>(initial_level)) = 1.0;
  double threshold = rng.uniform_open_zero();
  double t = 0.0;
  std::vector<double> weights(me.jumps.size());
  while (t < duration) {
    const double n0 = psi.squaredNorm();
    const double d0 = norm_rate(psi);
    Eigen::VectorXcd next = step * psi;
    const double n1 = next.squaredNorm();
    if (n1 > threshold) {
      psi = std::move(next);
      t += dt;
      continue;
    }
    const double s = detail::hermite_crossing(n0, d0, n1, norm_rate(next), dt, threshold);
    const double t_jump = t + s;
    if (t_jump >= duration) break;
    const Eigen::VectorXcd at_jump = (Complex(0.0, -s) * h_eff).exp() * psi;
    double total = 0.0;
    for (std::size_t k = 0; k < me.jumps.size(); ++k) {
      const auto& j = me.jumps[k];
      weights[k] = j.rate * std::norm(at_jump(static_cast<Eigen::Index>(j.upper)));
      total += weights[k];
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = 0;
    while (chosen + 1 < weights.size() && pick >= weights[chosen]) pick -= weights[chosen++];
    rec.times[chosen].push_back(t_jump);
    psi.setZero();
    psi(static_cast<Eigen::Index>(me.jumps[chosen].lower)) = 1.0;
    threshold = rng.uniform_open_zero();
    t = t_jump;
  }
  return rec;
}

inline EmissionRecord simulate_trajectory(const LevelScheme& scheme,
                                          std::span<const LaserDrive> drives, double duration,
                                          std::uint64_t seed) {
  return simulate_trajectory(master_equation(scheme, drives), duration, seed,
                             index_of(Level::S12));
}

// Routes each emission on `signal_channel` to fibre 0/1 or loses it, then adds
// Poisson background on both channels.
inline std::pair<PhotonStream, PhotonStream> detect(const EmissionRecord& emissions,
                                                    std::size_t signal_channel,
                                                    const DetectorModel& model, double duration,
                                                    std::uint64_t seed) {
  model.validate();
  if (signal_channel >= emissions.times.size()) {
    throw InvalidArgument("signal channel out of range");
  }
  Rng route(derive_seed(seed, 0));
  PhotonStream a{0, duration, {}, {}};
  PhotonStream b{1, duration, {}, {}};
  const double p0 = model.routing(0);
  const double p1 = model.routing(1);
  for (double t : emissions.times[signal_channel]) {
    if (t > duration) break;
    const double u = route.uniform();
    if (u < p0) {
      a.times.push_back(t);
      a.origin.push_back(Origin::Signal);
    } else if (u < p0 + p1) {
      b.times.push_back(t);
      b.origin.push_back(Origin::Signal);
    }
  }
  Rng bg_a(derive_seed(seed, 1));
  Rng bg_b(derive_seed(seed, 2));
  detail::merge_background(a, model.background[0], duration, bg_a);
  detail::merge_background(b, model.background[1], duration, bg_b);
  return {std::move(a), std::move(b)};
}

// Convenience overload: the 397 nm channel P1/2 -> S1/2.
inline std::pair<PhotonStream, PhotonStream> detect(const EmissionRecord& emissions,
                                                    const DetectorModel& model, double duration,
                                                    std::uint64_t seed) {
  const std::string name = "P1/2->S1/2";
  for (std::size_t k = 0; k < emissions.channel_names.size(); ++k) {
    if (emissions.channel_names[k] == name) return detect(emissions, k, model, duration, seed);
  }
  throw InvalidArgument("emission record has no P1/2->S1/2 channel");
}

// Tabulated survival function S(t) = P(no detection in [0, t]) with inverse lookup.
class SurvivalTable {
 public:
  SurvivalTable() = default;

  SurvivalTable(std::vector<double> t, std::vector<double> s) : t_(std::move(t)), s_(std::move(s)) {
    for (std::size_t k = 1; k < s_.size(); ++k) s_[k] = std::min(s_[k], s_[k - 1]);
    const auto n = s_.size();
    if (n >= 2 && s_[n - 1] > 0.0 && s_[n - 2] > s_[n - 1]) {
      tail_rate_ = std::log(s_[n - 2] / s_[n - 1]) / (t_[n - 1] - t_[n - 2]);
    }
  }

  // Time at which S falls to u, for u in (0, 1].
  double inverse(double u) const {
    if (u >= s_.front()) return 0.0;
    if (u < s_.back()) {
      if (!(tail_rate_ > 0.0)) return std::numeric_limits<double>::infinity();
      return t_.back() + std::log(s_.back() / u) / tail_rate_;
    }
    // s_ is non-increasing: first index with s <= u.
    const auto it = std::lower_bound(s_.begin(), s_.end(), u, std::greater<double>());
    const auto k = static_cast<std::size_t>(it - s_.begin());
    const double s_hi = s_[k - 1], s_lo = s_[k];
    const double f = s_hi == s_lo ? 0.0 : (s_hi - u) / (s_hi - s_lo);
    return t_[k - 1] + f * (t_[k] - t_[k - 1]);
  }

  double value(double t) const {
    if (t <= 0.0) return 1.0;
    if (t >= t_.back()) return s_.back() * std::exp(-tail_rate_ * (t - t_.back()));
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const auto k = static_cast<std::size_t>(it - t_.begin());
    const double f = (t - t_[k - 1]) / (t_[k] - t_[k - 1]);
    return s_[k - 1] + f * (s_[k] - s_[k - 1]);
  }

  std::size_t size() const { return t_.size(); }

 private:
  std::vector<double> t_, s_;
  double tail_rate_ = 0.0;
};

// Exact sampler of the detected two-channel streams for a driven ion.
class DetectionSampler {
 public:
  struct Options {
    double fine_step = 0.003;  // in units of 1 / rate_scale
    double fine_span = 300.0;  // in units of 1 / rate_scale
    double coarse_step = 2.0;  // in units of 1 / rate_scale
    double survival_floor = 1e-13;
  };

  DetectionSampler(const MasterEquation& me, std::size_t signal_jump, const DetectorModel& model)
      : DetectionSampler(me, signal_jump, model, Options{}) {}

  DetectionSampler(const MasterEquation& me, std::size_t signal_jump, const DetectorModel& model,
                   const Options& opt)
      : model_(model) {
    model_.validate();
    if (signal_jump >= me.jumps.size()) throw InvalidArgument("signal channel out of range");
    const Jump& sig = me.jumps[signal_jump];
    const double p_total = model_.routing(0) + model_.routing(1);
    split_ = p_total > 0.0 ? model_.routing(0) / p_total : 0.0;

    const DensityMatrix ss = steady_state(me);
    detected_rate_ = p_total * sig.rate * ss.population(sig.upper);

    if (p_total > 0.0) {
      const auto n = static_cast<Eigen::Index>(me.dim());
      Eigen::MatrixXcd sup = liouvillian(me);
      // Remove the detected part of the signal jump: rho -> rho_uu |l><l|.
      const auto u = static_cast<Eigen::Index>(sig.upper);
      const auto l = static_cast<Eigen::Index>(sig.lower);
      sup(l + l * n, u + u * n) -= p_total * sig.rate;

      Eigen::VectorXcd reset = Eigen::VectorXcd::Zero(n * n);
      reset(l + l * n) = 1.0;
      Eigen::VectorXcd stationary =
          Eigen::Map<const Eigen::VectorXcd>(ss.matrix().data(), n * n);
      const double scale = me.rate_scale();
      from_reset_ = tabulate(sup, reset, n, scale, opt);
      from_stationary_ = tabulate(sup, stationary, n, scale, opt);
    }
  }

  // Expected detected signal rate, both channels combined (counts/s).
  double detected_signal_rate() const { return detected_rate_; }
  double detected_signal_rate(std::size_t ch) const {
    return detected_rate_ * (ch == 0 ? split_ : 1.0 - split_);
  }
  const DetectorModel& model() const { return model_; }

  // Streams over [0, duration]; the ion starts in its stationary state.
  std::pair<PhotonStream, PhotonStream> sample(double duration, std::uint64_t seed) const {
    if (!(duration > 0.0)) throw InvalidArgument("duration must be > 0");
    PhotonStream a{0, duration, {}, {}};
    PhotonStream b{1, duration, {}, {}};
    if (detected_rate_ > 0.0) {
      const auto expected = static_cast<std::size_t>(detected_rate_ * duration * 1.05) + 16;
      a.times.reserve(static_cast<std::size_t>(expected * split_) + 16);
      b.times.reserve(static_cast<std::size_t>(expected * (1.0 - split_)) + 16);
      Rng rng(derive_seed(seed, 0));
      double t = from_stationary_.inverse(rng.uniform_open_zero());
      while (t < duration) {
        PhotonStream& target = rng.uniform() < split_ ? a : b;
        target.times.push_back(t);
        target.origin.push_back(Origin::Signal);
        t += from_reset_.inverse(rng.uniform_open_zero());
      }
    }
    Rng bg_a(derive_seed(seed, 1));
    Rng bg_b(derive_seed(seed, 2));
    detail::merge_background(a, model_.background[0], duration, bg_a);
    detail::merge_background(b, model_.background[1], duration, bg_b);
    return {std::move(a), std::move(b)};
  }

  const SurvivalTable& survival_after_detection() const { return from_reset_; }

 private:
  static SurvivalTable tabulate(const Eigen::MatrixXcd& sup, const Eigen::VectorXcd& start,
                                Eigen::Index n, double scale, const Options& opt) {
    const double dt_fine = opt.fine_step / scale;
    const double dt_coarse = opt.coarse_step / scale;
    const Eigen::MatrixXcd fine = (sup * dt_fine).exp();
    const Eigen::MatrixXcd coarse = (sup * dt_coarse).exp();
    auto trace = [n](const Eigen::VectorXcd& v) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += v(i + i * n).real();
      return s;
    };
    std::vector<double> ts{0.0}, ss{trace(start)};
    Eigen::VectorXcd v = start;
    const auto fine_steps = static_cast<std::size_t>(opt.fine_span / opt.fine_step);
    for (std::size_t k = 1; k <= fine_steps; ++k) {
      v = fine * v;
      ts.push_back(static_cast<double>(k) * dt_fine);
      ss.push_back(trace(v));
    }
    const double t0 = ts.back();
    // Stop once the survival is negligible or has stopped decaying (dark state).
    for (std::size_t k = 1; ss.back() > opt.survival_floor && k < 50'000'000; ++k) {
      v = coarse * v;
      ts.push_back(t0 + static_cast<double>(k) * dt_coarse);
      ss.push_back(trace(v));
      if (k > 1000 && ss.back() >= ss[ss.size() - 1001] * (1.0 - 1e-12)) break;
    }
    return SurvivalTable(std::move(ts), std::move(ss));
  }

  DetectorModel model_;
  double split_ = 0.5;
  double detected_rate_ = 0.0;
  SurvivalTable from_reset_, from_stationary_;
};

// Per-channel background rates that give the requested signal-to-background ratios.
inline std::array<double, 2> background_for_sbr(std::array<double, 2> signal_rates,
                                                std::array<double, 2> sbr) {
  if (!(sbr[0] > 0.0) || !(sbr[1] > 0.0)) throw InvalidArgument("SBR must be > 0");
  return {signal_rates[0] / sbr[0], signal_rates[1] / sbr[1]};
}

}  // namespace ionlight
