#pragma once

// Fluorescence line scans over the 397 nm detuning and Lorentzian fits.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ionlight/atomic_model.hpp"
#include "ionlight/error.hpp"
#include "ionlight/least_squares.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/photostream.hpp"

namespace ionlight {

struct ScanResult {
  std::vector<double> detunings;  // rad/s
  std::vector<double> combined;   // counts/s, both channels, background included
  std::vector<double> channel1;   // counts/s, background included
  std::vector<double> channel2;
  double background = 0.0;        // combined background, counts/s

  std::size_t peak_index() const {
    return static_cast<std::size_t>(std::max_element(combined.begin(), combined.end()) -
                                    combined.begin());
  }
  double peak() const { return combined.at(peak_index()); }
};

// Detected rate at each detuning of the drive on `scanned` (default the 397 nm
// S1/2 -> P1/2 drive); all other drives are held fixed.
inline ScanResult line_scan(const LevelScheme& scheme, std::vector<LaserDrive> drives,
                            std::span<const double> detunings, const DetectorModel& detector,
                            Level scanned_upper = Level::P12) {
  detector.validate();
  auto it = std::find_if(drives.begin(), drives.end(), [&](const LaserDrive& d) {
    return d.lower == Level::S12 && d.upper == scanned_upper;
  });
  if (it == drives.end()) throw InvalidArgument("no drive on the scanned transition");
  const DecayChannel& signal = scheme.require_channel(Level::P12, Level::S12);

  ScanResult out;
  out.background = detector.background[0] + detector.background[1];
  for (double d : detunings) {
    if (!std::isfinite(d)) throw InvalidArgument("scan detunings must be finite");
    it->detuning = d;
    const double emitted = scattering_rate(steady_state(master_equation(scheme, drives)), signal);
    const double c1 = emitted * detector.routing(0) + detector.background[0];
    const double c2 = emitted * detector.routing(1) + detector.background[1];
    out.detunings.push_back(d);
    out.channel1.push_back(c1);
    out.channel2.push_back(c2);
    out.combined.push_back(c1 + c2);
  }
  return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return v;
}

struct LorentzianFit {
  double center = 0.0;
  double hwhm = 0.0;
  double peak = 0.0;
  double floor = 0.0;
  double center_err = 0.0;
  double hwhm_err = 0.0;
  double peak_err = 0.0;
  double floor_err = 0.0;
  FitReport report;

  double operator()(double x) const {
    const double u = (x - center) / hwhm;
    return peak / (1.0 + u * u) + floor;
  }
};

// y = peak / (1 + ((x - center) / hwhm)^2) + floor
inline LorentzianFit lorentzian_fit(std::span<const double> x, std::span<const double> y,
                                    const LeastSquaresOptions& opt = {}) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InvalidArgument("lorentzian_fit: x and y differ in length");
  if (n < 5) throw InvalidArgument("lorentzian_fit needs at least 5 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !(y[i] >= 0.0) || !std::isfinite(y[i])) {
      throw InvalidArgument("lorentzian_fit: data must be finite with y >= 0");
    }
  }

  // Initial guess from the sampled maximum and its nearest half-maximum crossing.
  const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double half = 0.5 * (y[imax] + ymin);
  const double span = *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
  double width = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] <= half) {
      const double w = std::abs(x[i] - x[imax]);
      if (width == 0.0 || w < width) width = w;
    }
  }
  if (!(width > 0.0)) width = 0.25 * span;
  if (!(width > 0.0)) throw InvalidArgument("lorentzian_fit: x values are all equal");

  // Parameters are scaled to O(1) for conditioning.
  const double xs = width;
  const double ys = std::max(y[imax], 1e-300);
  const double x0 = x[imax];
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    r.resize(static_cast<Eigen::Index>(n));
    jac.resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double u = ((x[i] - x0) / xs - p(0)) / p(1);
      const double den = 1.0 + u * u;
      const double lor = 1.0 / den;
      r(k) = p(2) * lor + p(3) - y[i] / ys;
      const double dlor_du = -2.0 * u * lor * lor;
      jac(k, 0) = p(2) * dlor_du * (-1.0 / p(1));
      jac(k, 1) = p(2) * dlor_du * (-u / p(1));
      jac(k, 2) = lor;
      jac(k, 3) = 1.0;
    }
  };
  Eigen::VectorXd p0(4);
  p0 << 0.0, 1.0, (y[imax] - ymin) / ys, ymin / ys;
  const FitReport rep = levenberg_marquardt(model, p0, 1.0, opt);

  LorentzianFit fit;
  fit.center = x0 + xs * rep.params(0);
  fit.hwhm = xs * std::abs(rep.params(1));
  fit.peak = ys * rep.params(2);
  fit.floor = ys * rep.params(3);
  fit.center_err = xs * rep.errors(0);
  fit.hwhm_err = xs * rep.errors(1);
  fit.peak_err = ys * rep.errors(2);
  fit.floor_err = ys * rep.errors(3);
  fit.report = rep;
  return fit;
}

// Signal-to-background ratio; `signal` excludes background.
inline double sbr(double signal, double background) {
  if (!(background > 0.0)) throw InvalidArgument("sbr requires background > 0");
  return signal / background;
}

}  // namespace ionlight
