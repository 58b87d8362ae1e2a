#pragma once

// Micromotion estimates and stray-field tracking from compensation voltages.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionlight/constants.hpp"
#include "ionlight/error.hpp"
#include "ionlight/least_squares.hpp"
#include "ionlight/random.hpp"
#include "ionlight/trap_field.hpp"

namespace ionlight {

struct MicromotionResult {
  Eigen::Vector3d displacement = Eigen::Vector3d::Zero();  // m
  double displacement_norm = 0.0;                          // m
  double amplitude = 0.0;                                  // m, micromotion amplitude
  double modulation_index = 0.0;
  double mathieu_q = 0.0;
};

// Static displacement u = qE / (m w^2); micromotion amplitude (q_M / 2) u with
// q_M = 2 sqrt(2) w / Omega; modulation index k x_mm.
inline MicromotionResult micromotion_analysis(const Eigen::Vector3d& stray_field,
                                              double secular_frequency, const RfDrive& drive,
                                              double mass, double charge, double wavenumber) {
  drive.validate();
  if (!stray_field.allFinite()) throw InvalidArgument("stray field must be finite");
  if (!(secular_frequency > 0.0) || !(mass > 0.0) || !(charge > 0.0) || !(wavenumber >= 0.0)) {
    throw InvalidArgument("micromotion_analysis needs positive frequency, mass and charge");
  }
  MicromotionResult m;
  m.mathieu_q = 2.0 * std::sqrt(2.0) * secular_frequency / drive.frequency;
  m.displacement = charge * stray_field / (mass * secular_frequency * secular_frequency);
  m.displacement_norm = m.displacement.norm();
  m.amplitude = 0.5 * m.mathieu_q * m.displacement_norm;
  m.modulation_index = wavenumber * m.amplitude;
  return m;
}

// Calibration that maps the Doppler-modulation sensitivity onto an axial
// displacement; fixed by 0.016 Gamma/sqrt(Hz) over 4 s giving 0.006 Gamma lambda / w.
inline constexpr double kDetectionCalibration = 0.75;

// Smallest detectable displacement: c * (sensitivity / sqrt(t)) * (gamma / w) * lambda.
inline double detection_limit(double sensitivity, double acquisition, double gamma, double omega,
                              double wavelength, double calibration = kDetectionCalibration) {
  if (!(sensitivity > 0.0) || !(acquisition > 0.0) || !(gamma > 0.0) || !(omega > 0.0) ||
      !(wavelength > 0.0)) {
    throw InvalidArgument("detection_limit arguments must be positive");
  }
  if (std::isinf(omega)) return 0.0;
  return calibration * (sensitivity / std::sqrt(acquisition)) * (gamma / omega) * wavelength;
}

struct CompensationSample {
  double time = 0.0;                                   // s
  Eigen::Vector3d voltages = Eigen::Vector3d::Zero();  // V
};

namespace detail {

inline void require_invertible(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw InvalidArgument("calibration matrix must be finite");
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
  const auto& s = svd.singularValues();
  if (!(s(2) > 1e-12 * s(0))) throw InvalidArgument("calibration matrix is singular");
}

}  // namespace detail

// The compensation field -M v cancels the stray field, so E_stray = -M v.
// M is in (V/cm) per V; the result is in V/cm.
inline Eigen::Vector3d stray_field_from_voltages(const CompensationSample& s,
                                                 const Eigen::Matrix3d& calibration) {
  detail::require_invertible(calibration);
  return -calibration * s.voltages;
}

inline Eigen::Vector3d voltages_from_field(const Eigen::Vector3d& stray_field,
                                           const Eigen::Matrix3d& calibration) {
  detail::require_invertible(calibration);
  return -calibration.fullPivLu().solve(stray_field);
}

struct FieldSample {
  double time = 0.0;                              // s
  Eigen::Vector3d field = Eigen::Vector3d::Zero();  // V/cm
};

struct DecayFit {
  double rate = 0.0;       // 1/s
  double rate_err = 0.0;
  double amplitude = 0.0;  // V/cm at t = 0
  double amplitude_err = 0.0;
  double floor = 0.0;      // V/cm, zero unless fitted
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
  double field_azimuth_deg = 0.0;   // azimuth of the mean field direction in the x-y plane
  double source_azimuth_deg = 0.0;  // azimuth of -direction: towards a positive charge
  double residual_rms = 0.0;        // V/cm
  FitReport report;
};

inline double azimuth_deg(const Eigen::Vector3d& v) {
  return std::atan2(v.y(), v.x()) * 180.0 / constants::pi;
}

// Fits the field component along the mean field direction with A exp(-gamma t)
// (+ floor). Projecting keeps the noise unbiased where |E| becomes small.
inline DecayFit fit_field_decay(const std::vector<FieldSample>& series, bool with_floor = false) {
  if (series.size() < 5) throw InvalidArgument("fit_field_decay needs at least 5 samples");
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (!(series[i].time > series[i - 1].time)) {
      throw InvalidArgument("field samples must have strictly increasing times");
    }
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& s : series) {
    if (!s.field.allFinite()) throw InvalidArgument("field samples must be finite");
    const double n = s.field.norm();
    if (n > 0.0) mean += s.field / n;
  }
  if (!(mean.norm() > 0.0)) throw InvalidArgument("field series has no net direction");
  const Eigen::Vector3d dir = mean.normalized();

  const auto n = static_cast<Eigen::Index>(series.size());
  const double t0 = series.front().time;
  Eigen::VectorXd t(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t(i) = series[static_cast<std::size_t>(i)].time - t0;
    y(i) = series[static_cast<std::size_t>(i)].field.dot(dir);
  }
  const double span = t(n - 1);
  const double yscale = std::max(y.cwiseAbs().maxCoeff(), 1e-300);

  // Start from a log-linear fit over the positive samples.
  double a0 = y(0), g0 = 0.0;
  {
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y(i) <= 0.0) continue;
      const double l = std::log(y(i));
      sw += 1;
      st += t(i);
      sl += l;
      stt += t(i) * t(i);
      stl += t(i) * l;
    }
    const double det = sw * stt - st * st;
    if (sw >= 2 && det > 0.0) {
      g0 = std::max(0.0, -(sw * stl - st * sl) / det);
      a0 = std::exp((sl + g0 * st) / sw);
    }
  }
  // Rate is fitted in units of 1/span, amplitude and floor in units of yscale.
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    r.resize(n);
    jac.resize(n, p.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = t(i) / span;
      const double e = std::exp(-p(1) * x);
      r(i) = p(0) * e + (with_floor ? p(2) : 0.0) - y(i) / yscale;
      jac(i, 0) = e;
      jac(i, 1) = -p(0) * x * e;
      if (with_floor) jac(i, 2) = 1.0;
    }
  };
  Eigen::VectorXd p0(with_floor ? 3 : 2);
  p0(0) = a0 / yscale;
  p0(1) = g0 * span;
  if (with_floor) p0(2) = 0.0;
  const FitReport rep = levenberg_marquardt(model, p0, 1.0);

  DecayFit fit;
  fit.report = rep;
  fit.amplitude = rep.params(0) * yscale;
  fit.amplitude_err = rep.errors(0) * yscale;
  fit.rate = rep.params(1) / span;
  fit.rate_err = rep.errors(1) / span;
  if (with_floor) fit.floor = rep.params(2) * yscale;
  fit.direction = dir;
  fit.field_azimuth_deg = azimuth_deg(dir);
  fit.source_azimuth_deg = azimuth_deg(-dir);
  fit.residual_rms = rep.residual_norm * yscale / std::sqrt(static_cast<double>(n));
  return fit;
}

// Synthetic tracking run: E(t) = A exp(-gamma t) * direction plus white noise.
// Each sample integrates over one sampling interval, so a noise density of
// `noise_density` V/(cm sqrt(Hz)) gives noise_density / sqrt(interval) per component.
inline std::vector<FieldSample> synthetic_decay_series(double amplitude, double rate,
                                                       const Eigen::Vector3d& direction,
                                                       double duration, double interval,
                                                       double noise_density, std::uint64_t seed) {
  if (!(interval > 0.0) || !(duration >= interval) || !(noise_density >= 0.0) ||
      !(direction.norm() > 0)) {
    throw InvalidArgument("invalid synthetic series parameters");
  }
  const double noise = noise_density / std::sqrt(interval);
  Rng rng(seed);
  const Eigen::Vector3d u = direction.normalized();
  std::vector<FieldSample> out;
  const auto count = static_cast<std::size_t>(std::floor(duration / interval + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * interval;
    Eigen::Vector3d e = amplitude * std::exp(-rate * t) * u;
    // Box-Muller on our own uniforms keeps the stream identical across standard libraries.
    for (int c = 0; c < 3; ++c) {
      const double u1 = rng.uniform_open_zero(), u2 = rng.uniform();
      e(c) += noise * std::sqrt(-2.0 * std::log(u1)) * std::cos(constants::two_pi * u2);
    }
    out.push_back({t, e});
  }
  return out;
}

}  // namespace ionlight
