#pragma once

// End-to-end correlation pipelines: segmented Monte Carlo acquisition through the
// TDC, and the matching expectation derived from the master equation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "ionlight/correlator.hpp"
#include "ionlight/error.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/photostream.hpp"
#include "ionlight/random.hpp"

namespace ionlight {

struct MonteCarloOptions {
  double duration = 2400.0;  // s, total acquisition
  double segment = 60.0;     // s, each segment is an independent seeded run
  std::uint64_t seed = 1;
  unsigned threads = 0;      // 0: hardware concurrency
};

struct MonteCarloG2 {
  CorrelationHistogram histogram;
  G2Curve curve;
  std::array<std::uint64_t, 2> signal_counts{0, 0};
  std::array<std::uint64_t, 2> background_counts{0, 0};
  std::size_t segments = 0;
};

// Splits the acquisition into segments of `segment` seconds (the last one may be
// shorter). Segment k uses derive_seed(seed, k), and histograms are merged in
// segment order, so the result does not depend on the thread count.
inline MonteCarloG2 monte_carlo_g2(const DetectionSampler& sampler, const TdcConfig& tdc,
                                   const MonteCarloOptions& opt) {
  tdc.validate();
  if (!(opt.duration > 0.0) || !(opt.segment > 0.0)) {
    throw InvalidArgument("Monte Carlo duration and segment must be > 0");
  }
  const auto nseg = static_cast<std::size_t>(std::ceil(opt.duration / opt.segment - 1e-9));
  struct Part {
    CorrelationHistogram h;
    std::array<std::uint64_t, 4> counts{};
  };
  std::vector<Part> parts(nseg, Part{CorrelationHistogram(tdc), {}});

  auto run = [&](std::size_t k) {
    const double len = std::min(opt.segment, opt.duration - static_cast<double>(k) * opt.segment);
    const auto [a, b] = sampler.sample(len, derive_seed(opt.seed, k));
    parts[k].h = tdc_crosscorrelate(a, b, tdc);
    parts[k].counts = {a.count(Origin::Signal), b.count(Origin::Signal),
                       a.count(Origin::Background), b.count(Origin::Background)};
  };

  unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, nseg));
  if (workers <= 1) {
    for (std::size_t k = 0; k < nseg; ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < nseg; k = next++) {
          try {
            run(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  MonteCarloG2 out{CorrelationHistogram(tdc), {}, {0, 0}, {0, 0}, nseg};
  for (const auto& p : parts) {
    out.histogram.merge(p.h);
    out.signal_counts[0] += p.counts[0];
    out.signal_counts[1] += p.counts[1];
    out.background_counts[0] += p.counts[2];
    out.background_counts[1] += p.counts[3];
  }
  out.curve = normalize(out.histogram);
  return out;
}

struct ExpectedG2 {
  G2Curve ideal;     // regression g2 averaged over each bin
  G2Curve measured;  // with background dilution and first-stop loss
  double offset = 0.0;
};

// Expected normalized histogram of the TDC for the detected streams:
//   g_meas(tau) = [offset + (1 - offset) g2(tau)] * F(tau)
// with g2 averaged over the bin, offset from the per-channel signal fractions and
// F = (exp(-r_b (tau + D)) + exp(-r_a (tau + D))) / 2 the probability that no
// earlier stop pre-empts the conversion.
inline ExpectedG2 expected_g2(const MasterEquation& me, std::size_t signal_jump,
                              const DetectionSampler& sampler, const TdcConfig& tdc,
                              std::size_t subsamples = 10) {
  tdc.validate();
  if (subsamples == 0) throw InvalidArgument("subsamples must be >= 1");
  const CorrelationHistogram axis(tdc);
  const std::size_t nb = axis.tau.size();
  std::vector<double> grid;
  grid.reserve(nb * subsamples);
  for (double c : axis.tau) {
    for (std::size_t s = 0; s < subsamples; ++s) {
      const double f = (static_cast<double>(s) + 0.5) / static_cast<double>(subsamples) - 0.5;
      grid.push_back(c + f * tdc.bin_width);
    }
  }
  const G2Curve fine = g2_regression(me, signal_jump, grid);

  const DetectorModel& m = sampler.model();
  const double s0 = sampler.detected_signal_rate(0), s1 = sampler.detected_signal_rate(1);
  const double ra = s0 + m.background[0], rb = s1 + m.background[1];
  if (!(ra > 0.0) || !(rb > 0.0)) throw InvalidArgument("expected_g2 needs non-zero channel rates");
  ExpectedG2 e;
  e.offset = 1.0 - (s0 / ra) * (s1 / rb);
  e.ideal.tau = axis.tau;
  e.measured.tau = axis.tau;
  for (std::size_t k = 0; k < nb; ++k) {
    double avg = 0.0;
    for (std::size_t s = 0; s < subsamples; ++s) avg += fine.values[k * subsamples + s];
    avg /= static_cast<double>(subsamples);
    const double span = axis.tau[k] + tdc.delay;
    const double first_stop = 0.5 * (std::exp(-rb * span) + std::exp(-ra * span));
    e.ideal.values.push_back(avg);
    e.measured.values.push_back((e.offset + (1.0 - e.offset) * avg) * first_stop);
  }
  e.measured.metadata["offset"] = e.offset;
  e.measured.metadata["rate_a_per_s"] = ra;
  e.measured.metadata["rate_b_per_s"] = rb;
  return e;
}

struct CurveComparison {
  std::size_t bins = 0;
  std::size_t within_3sigma = 0;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  double fraction_within() const {
    return bins ? static_cast<double>(within_3sigma) / static_cast<double>(bins) : 0.0;
  }
};

// Compares a measured curve with its expectation over tau in [tau_min, tau_max].
// The standard error of each bin is the Poisson error of the expected count,
// doubled in variance for the tau = 0 bin whose counts come in pairs.
inline CurveComparison compare_to_expectation(const G2Curve& measured, const G2Curve& expected,
                                              double tau_min, double tau_max) {
  if (measured.tau.size() != expected.tau.size() || measured.normalization <= 0.0) {
    throw InvalidArgument("curves must share a tau axis and carry a normalization");
  }
  const double half = measured.tau.size() > 1 ? 0.5 * (measured.tau[1] - measured.tau[0]) : 0.0;
  CurveComparison c;
  for (std::size_t k = 0; k < measured.tau.size(); ++k) {
    const double t = measured.tau[k];
    if (t < tau_min - 1e-3 * half || t > tau_max + 1e-3 * half) continue;
    const double mu = expected.values[k] * measured.normalization;
    const double multiplicity = std::abs(t) < half ? 2.0 : 1.0;
    const double sigma = std::sqrt(multiplicity * std::max(mu, 1.0));
    const double z = (static_cast<double>(measured.counts[k]) - mu) / sigma;
    ++c.bins;
    if (std::abs(z) < 3.0) ++c.within_3sigma;
    c.chi2 += z * z;
  }
  if (c.bins == 0) throw InvalidArgument("no bins in the comparison range");
  c.reduced_chi2 = c.chi2 / static_cast<double>(c.bins);
  return c;
}

}  // namespace ionlight
