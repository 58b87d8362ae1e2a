#pragma once

// Start/stop TDC emulation for two photon streams.
//
// Direction a->b: each event of `a` starts a conversion, stream b is delayed by
// `delay` and the first delayed b event after the start stops it. The recorded
// interval minus the delay is tau = t_b - t_a. Direction b->a does the same with
// the roles exchanged, giving tau = t_a - t_b. Both traces are binned on the same
// tau axis and added, so the summed histogram does not depend on which stream is
// called a.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ionlight/error.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/photostream.hpp"

namespace ionlight {

struct TdcConfig {
  double delay = 200e-9;      // s, added to every stop channel
  double bin_width = 1e-9;    // s
  double window = 150e-9;     // s, half width of the tau range

  void validate() const {
    if (!(bin_width > 0.0) || !(window >= bin_width) || !(delay > window)) {
      throw ConfigError("TDC settings must satisfy delay > window >= bin width > 0");
    }
  }

  // Bins are centred on k * bin_width for k = -half_bins .. half_bins.
  long half_bins() const { return std::lround(window / bin_width); }
  std::size_t bins() const { return static_cast<std::size_t>(2 * half_bins() + 1); }
};

struct CorrelationHistogram {
  TdcConfig config;
  std::vector<double> tau;              // bin centres, s
  std::vector<std::uint64_t> counts;    // summed over both directions
  std::uint64_t starts_a = 0;           // starts in direction a->b (= events in a)
  std::uint64_t starts_b = 0;
  double duration = 0.0;                // s

  explicit CorrelationHistogram(const TdcConfig& cfg = {}) : config(cfg) {
    cfg.validate();
    const long k = cfg.half_bins();
    for (long i = -k; i <= k; ++i) tau.push_back(static_cast<double>(i) * cfg.bin_width);
    counts.assign(tau.size(), 0);
  }

  double rate_a() const { return duration > 0.0 ? static_cast<double>(starts_a) / duration : 0.0; }
  double rate_b() const { return duration > 0.0 ? static_cast<double>(starts_b) / duration : 0.0; }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::size_t zero_bin() const { return counts.size() / 2; }

  // Adds an independent acquisition taken with the same settings.
  CorrelationHistogram& merge(const CorrelationHistogram& other) {
    if (other.counts.size() != counts.size() || other.config.bin_width != config.bin_width ||
        other.config.delay != config.delay) {
      throw InvalidArgument("cannot merge histograms with different TDC settings");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    starts_a += other.starts_a;
    starts_b += other.starts_b;
    duration += other.duration;
    return *this;
  }

  bool operator==(const CorrelationHistogram& o) const {
    return counts == o.counts && starts_a == o.starts_a && starts_b == o.starts_b &&
           duration == o.duration;
  }
};

namespace detail {

// Histogram bin of a stop at `stop` (already delayed) for a start at `start`,
// or -1 if the conversion lands outside the tau window.
inline long tdc_bin(double start, double delayed_stop, const TdcConfig& cfg) {
  const double tau = (delayed_stop - start) - cfg.delay;
  const long k = static_cast<long>(std::floor(tau / cfg.bin_width + 0.5));
  const long half = cfg.half_bins();
  return (k < -half || k > half) ? -1 : k + half;
}

inline void first_stop_scan(const std::vector<double>& starts, const std::vector<double>& stops,
                            const TdcConfig& cfg, std::vector<std::uint64_t>& counts) {
  std::size_t j = 0;
  for (double t : starts) {
    while (j < stops.size() && (stops[j] + cfg.delay) - t < 0.0) ++j;
    if (j == stops.size()) break;
    const long bin = tdc_bin(t, stops[j] + cfg.delay, cfg);
    if (bin >= 0) ++counts[static_cast<std::size_t>(bin)];
  }
}

inline void first_stop_brute(const std::vector<double>& starts, const std::vector<double>& stops,
                             const TdcConfig& cfg, std::vector<std::uint64_t>& counts) {
  for (double t : starts) {
    double best = std::numeric_limits<double>::infinity();
    for (double s : stops) {
      const double delayed = s + cfg.delay;
      if (delayed - t >= 0.0 && delayed < best) best = delayed;
    }
    if (!std::isfinite(best)) continue;
    const long bin = tdc_bin(t, best, cfg);
    if (bin >= 0) ++counts[static_cast<std::size_t>(bin)];
  }
}

inline void require_sorted(const PhotonStream& s) {
  for (std::size_t i = 1; i < s.times.size(); ++i) {
    if (!(s.times[i] > s.times[i - 1])) {
      throw InvalidArgument("photon stream timestamps must be strictly increasing");
    }
  }
}

}  // namespace detail

inline CorrelationHistogram tdc_crosscorrelate(const PhotonStream& a, const PhotonStream& b,
                                               const TdcConfig& cfg = {}) {
  detail::require_sorted(a);
  detail::require_sorted(b);
  CorrelationHistogram h(cfg);
  detail::first_stop_scan(a.times, b.times, cfg, h.counts);
  detail::first_stop_scan(b.times, a.times, cfg, h.counts);
  h.starts_a = a.times.size();
  h.starts_b = b.times.size();
  h.duration = std::max(a.duration, b.duration);
  return h;
}

// Exhaustive O(n m) reference with the same first-stop rule.
inline CorrelationHistogram tdc_crosscorrelate_bruteforce(const PhotonStream& a,
                                                          const PhotonStream& b,
                                                          const TdcConfig& cfg = {}) {
  CorrelationHistogram h(cfg);
  detail::first_stop_brute(a.times, b.times, cfg, h.counts);
  detail::first_stop_brute(b.times, a.times, cfg, h.counts);
  h.starts_a = a.times.size();
  h.starts_b = b.times.size();
  h.duration = std::max(a.duration, b.duration);
  return h;
}

// g2 = counts / (r_a r_b T dtau * 2). Errors are Poisson, with empty bins
// assigned the error of a single count. A coincidence inside the tau = 0 bin is
// recorded by both directions, so that bin holds pairs and its variance is 2n.
inline G2Curve normalize(const CorrelationHistogram& h) {
  const double ra = h.rate_a(), rb = h.rate_b();
  if (!(ra > 0.0) || !(rb > 0.0) || !(h.duration > 0.0)) {
    throw InvalidArgument("normalize requires non-zero rates on both channels");
  }
  const double norm = ra * rb * h.duration * h.config.bin_width * 2.0;
  G2Curve c;
  c.tau = h.tau;
  c.normalization = norm;
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double x = static_cast<double>(h.counts[k]);
    const double multiplicity = k == h.zero_bin() ? 2.0 : 1.0;
    c.counts.push_back(h.counts[k]);
    c.values.push_back(x / norm);
    c.errors.push_back(std::sqrt(multiplicity * std::max(x, 1.0)) / norm);
  }
  c.metadata["rate_a_per_s"] = ra;
  c.metadata["rate_b_per_s"] = rb;
  c.metadata["duration_s"] = h.duration;
  c.metadata["bin_width_s"] = h.config.bin_width;
  return c;
}

// Fraction of coincidences that involve at least one background count.
inline double background_offset(double sbr1, double sbr2) {
  if (!(sbr1 > 0.0) || !(sbr2 > 0.0)) throw InvalidArgument("SBR values must be > 0");
  return 1.0 - (sbr1 / (sbr1 + 1.0)) * (sbr2 / (sbr2 + 1.0));
}

struct G2Zero {
  double raw = 0.0;          // g2(0) before offset subtraction
  double value = 0.0;        // raw - offset
  double uncertainty = 0.0;  // Poisson error of the tau = 0 bin (pairs, see normalize)
  double counts = 0.0;
};

inline G2Zero estimate_g2_zero(const G2Curve& curve, double offset) {
  if (curve.counts.size() != curve.values.size() || curve.normalization <= 0.0) {
    throw InvalidArgument("estimate_g2_zero needs a normalized histogram with raw counts");
  }
  std::size_t k = curve.tau.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.tau.size(); ++i) {
    if (std::abs(curve.tau[i]) < best) {
      best = std::abs(curve.tau[i]);
      k = i;
    }
  }
  const double width = curve.tau.size() > 1 ? std::abs(curve.tau[1] - curve.tau[0]) : 0.0;
  if (k == curve.tau.size() || (width > 0.0 && best > 0.5 * width)) {
    throw InvalidArgument("curve has no tau = 0 bin");
  }
  G2Zero z;
  z.counts = static_cast<double>(curve.counts[k]);
  z.raw = z.counts / curve.normalization;
  z.value = z.raw - offset;
  z.uncertainty = std::sqrt(2.0 * std::max(z.counts, 1.0)) / curve.normalization;
  return z;
}

}  // namespace ionlight
