#pragma once

// Small dense Levenberg-Marquardt solver for the curve fits in this library
// (Lorentzian line shapes, exponential decays). Models supply residuals and an
// analytic Jacobian.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionlight/error.hpp"

namespace ionlight {

struct LeastSquaresOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // on the scaled gradient, see FitReport
  double step_tolerance = 1e-15;     // relative parameter change
};

struct FitReport {
  Eigen::VectorXd params;
  Eigen::VectorXd errors;  // one-sigma, from s^2 (J^T J)^-1
  double residual_norm = 0.0;
  // max_j |(J^T r)_j| / (|J_j| |r|): cosine between the residual and each
  // Jacobian column, zero at a stationary point. Zero for an exact fit.
  double scaled_gradient = 0.0;
  int iterations = 0;
};

namespace detail {

inline double scaled_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r,
                              double exact_fit_threshold) {
  const double rn = r.norm();
  if (rn <= exact_fit_threshold) return 0.0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    const double cn = jac.col(j).norm();
    if (cn > 0.0) worst = std::max(worst, std::abs(g(j)) / (cn * rn));
  }
  return worst;
}

}  // namespace detail

// `model(p, r, J)` fills residuals r (size n) and Jacobian J (n x p) at parameters p.
// `data_scale` is a typical magnitude of the data; residual norms below
// 1e-13 * data_scale count as an exact fit.
template <class Model>
FitReport levenberg_marquardt(const Model& model, Eigen::VectorXd p, double data_scale,
                              const LeastSquaresOptions& opt = {}) {
  const double exact = 1e-13 * std::max(data_scale, std::numeric_limits<double>::min());
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  model(p, r, jac);
  if (!r.allFinite() || !jac.allFinite()) {
    throw ConvergenceError("non-finite residuals at the initial guess", {});
  }
  double cost = r.squaredNorm();
  std::vector<double> history{std::sqrt(cost)};

  Eigen::MatrixXd a = jac.transpose() * jac;
  double mu = 1e-3 * a.diagonal().maxCoeff();
  double nu = 2.0;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iterations; ++it) {
    if (detail::scaled_gradient(jac, r, exact) <= opt.gradient_tolerance) {
      converged = true;
      break;
    }
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::MatrixXd damped = a;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      damped(j, j) += mu * std::max(a(j, j), 1e-300);
    }
    const Eigen::VectorXd step = damped.ldlt().solve(-g);
    const Eigen::VectorXd trial = p + step;
    Eigen::VectorXd r_new;
    Eigen::MatrixXd jac_new;
    model(trial, r_new, jac_new);
    const double cost_new = r_new.allFinite() ? r_new.squaredNorm()
                                              : std::numeric_limits<double>::infinity();
    // Gain ratio against the linearised model.
    Eigen::VectorXd dscaled = step;
    for (Eigen::Index j = 0; j < a.rows(); ++j) dscaled(j) *= mu * std::max(a(j, j), 1e-300);
    const double predicted = step.dot(dscaled - g);
    const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;

    if (cost_new < cost && rho > 0.0) {
      const bool tiny = step.norm() <= opt.step_tolerance * (p.norm() + opt.step_tolerance);
      p = trial;
      r = std::move(r_new);
      jac = std::move(jac_new);
      cost = cost_new;
      a = jac.transpose() * jac;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      history.push_back(std::sqrt(cost));
      if (tiny) {
        converged = detail::scaled_gradient(jac, r, exact) <= 1e3 * opt.gradient_tolerance;
        ++it;
        break;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!std::isfinite(mu) || mu > 1e300) {
        // No downhill direction left at machine precision.
        converged = detail::scaled_gradient(jac, r, exact) <= 1e3 * opt.gradient_tolerance;
        break;
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("least-squares fit did not converge; final residual norm " +
                               std::to_string(std::sqrt(cost)),
                           std::move(history));
  }

  FitReport rep;
  rep.params = p;
  rep.residual_norm = std::sqrt(cost);
  rep.scaled_gradient = detail::scaled_gradient(jac, r, exact);
  rep.iterations = it;
  const auto n = jac.rows();
  const auto np = jac.cols();
  rep.errors = Eigen::VectorXd::Zero(np);
  if (n > np) {
    const double s2 = cost / static_cast<double>(n - np);
    const Eigen::MatrixXd cov = a.completeOrthogonalDecomposition().pseudoInverse() * s2;
    for (Eigen::Index j = 0; j < np; ++j) rep.errors(j) = std::sqrt(std::max(cov(j, j), 0.0));
  }
  return rep;
}

}  // namespace ionlight
