#pragma once

// Lindblad master equation for a few-level ion: right-hand side, adaptive time
// evolution, steady state and the quantum-regression intensity correlation.
//
// Everything runs in SI units (rad/s, s). Absolute tolerances on quantities that
// carry a rate are applied relative to MasterEquation::rate_scale().

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionlight/atomic_model.hpp"
#include "ionlight/error.hpp"

namespace ionlight {

// Collapse operator L = sqrt(rate) |lower><upper|.
struct Jump {
  std::size_t upper = 0;
  std::size_t lower = 0;
  double rate = 0.0;  // rad/s
  std::string name;
};

struct MasterEquation {
  Operator hamiltonian;
  std::vector<Jump> jumps;
  std::vector<std::string> labels;

  std::size_t dim() const { return static_cast<std::size_t>(hamiltonian.rows()); }

  // Largest rate in the problem; sets the scale for rate-valued tolerances.
  double rate_scale() const {
    double s = hamiltonian.cwiseAbs().maxCoeff();
    for (const auto& j : jumps) s = std::max(s, j.rate);
    return s > 0.0 ? s : 1.0;
  }

  std::size_t jump_index(std::string_view name) const {
    for (std::size_t k = 0; k < jumps.size(); ++k) {
      if (jumps[k].name == name) return k;
    }
    throw InvalidArgument("no jump named '" + std::string(name) + "'");
  }
};

inline Jump to_jump(const DecayChannel& c) {
  return Jump{index_of(c.upper), index_of(c.lower), c.rate, c.name()};
}

inline MasterEquation master_equation(const LevelScheme& scheme,
                                      std::span<const LaserDrive> drives) {
  MasterEquation me;
  me.hamiltonian = hamiltonian(scheme, drives);
  for (const auto& c : scheme.decays()) me.jumps.push_back(to_jump(c));
  for (Level l : kAllLevels) me.labels.emplace_back(label(l));
  return me;
}

// Driven two-level atom |g> = 0, |e> = 1 with a single decay channel.
inline MasterEquation two_level_system(double gamma, double rabi, double detuning) {
  MasterEquation me;
  me.hamiltonian = Operator::Zero(2, 2);
  me.hamiltonian(1, 1) = -detuning;
  me.hamiltonian(0, 1) = rabi / 2.0;
  me.hamiltonian(1, 0) = rabi / 2.0;
  me.jumps.push_back(Jump{1, 0, gamma, "e->g"});
  me.labels = {"g", "e"};
  return me;
}

class DensityMatrix {
 public:
  static constexpr double kTolerance = 1e-10;

  explicit DensityMatrix(Operator m) : m_(std::move(m)) {
    if (const auto problem = check(m_, kTolerance); !problem.empty()) {
      throw InvalidArgument("not a density matrix: " + problem);
    }
  }

  static DensityMatrix pure(std::size_t dim, std::size_t level) {
    Operator m = Operator::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m(static_cast<Eigen::Index>(level), static_cast<Eigen::Index>(level)) = 1.0;
    return DensityMatrix(std::move(m));
  }

  // Empty string when `m` is Hermitian, unit-trace and positive to `tol`.
  static std::string check(const Operator& m, double tol) {
    if (m.rows() != m.cols() || m.rows() == 0) return "matrix is not square";
    if (!m.allFinite()) return "non-finite entries";
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol) return "not Hermitian (deviation " + std::to_string(herm) + ")";
    const Complex tr = m.trace();
    if (std::abs(tr - 1.0) > tol) return "trace " + std::to_string(tr.real()) + " != 1";
    Eigen::SelfAdjointEigenSolver<Operator> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
      return "negative eigenvalue " + std::to_string(es.eigenvalues().minCoeff());
    }
    return {};
  }

  const Operator& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  double population(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return m_(k, k).real();
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Operator> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  Operator m_;
};

// -i[H, rho] + sum_k G_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho}).
inline Operator lindblad_rhs(const Operator& rho, const MasterEquation& me) {
  const Complex minus_i(0.0, -1.0);
  const Operator& h = me.hamiltonian;
  Operator d = minus_i * (h * rho - rho * h);
  for (const auto& j : me.jumps) {
    const auto u = static_cast<Eigen::Index>(j.upper);
    const auto l = static_cast<Eigen::Index>(j.lower);
    d(l, l) += j.rate * rho(u, u);
    d.row(u) -= 0.5 * j.rate * rho.row(u);
    d.col(u) -= 0.5 * j.rate * rho.col(u);
  }
  return d;
}

inline Operator lindblad_rhs(const DensityMatrix& rho, const MasterEquation& me) {
  return lindblad_rhs(rho.matrix(), me);
}

// Superoperator on column-major vec(rho): index (i, j) -> i + j * dim.
inline Eigen::MatrixXcd liouvillian(const MasterEquation& me) {
  const auto n = static_cast<Eigen::Index>(me.dim());
  Eigen::MatrixXcd sup(n * n, n * n);
  Operator basis = Operator::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      basis(i, j) = 1.0;
      const Operator col = lindblad_rhs(basis, me);
      sup.col(i + j * n) = Eigen::Map<const Eigen::VectorXcd>(col.data(), n * n);
      basis(i, j) = 0.0;
    }
  }
  return sup;
}

namespace detail {

inline void hermitize(Operator& m) { m = 0.5 * (m + m.adjoint()).eval(); }

// Closed communicating classes of the level graph (coherent couplings both ways,
// decays downward). More than one closed class means more than one steady state.
inline std::vector<std::vector<std::size_t>> closed_classes(const MasterEquation& me) {
  const std::size_t n = me.dim();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && std::abs(me.hamiltonian(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j))) > 0.0) {
        reach[i][j] = true;
      }
    }
  }
  for (const auto& jmp : me.jumps) {
    if (jmp.rate > 0.0) reach[jmp.upper][jmp.lower] = true;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
      }
    }
  }
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<std::size_t>> closed;
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    std::vector<std::size_t> cls;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j] && reach[j][i]) {
        cls.push_back(j);
        assigned[j] = true;
      }
    }
    bool is_closed = true;
    for (std::size_t a : cls) {
      for (std::size_t b = 0; b < n; ++b) {
        if (reach[a][b] && !reach[b][a]) is_closed = false;
      }
    }
    if (is_closed) closed.push_back(std::move(cls));
  }
  return closed;
}

}  // namespace detail

inline DensityMatrix steady_state(const MasterEquation& me) {
  const auto closed = detail::closed_classes(me);
  if (closed.size() > 1) {
    std::vector<std::vector<std::string>> names;
    std::string msg = "steady state is not unique; closed level sets:";
    for (const auto& cls : closed) {
      std::vector<std::string> group;
      msg += " {";
      for (std::size_t k = 0; k < cls.size(); ++k) {
        group.push_back(me.labels.at(cls[k]));
        msg += (k ? ", " : "") + me.labels.at(cls[k]);
      }
      msg += "}";
      names.push_back(std::move(group));
    }
    throw DegenerateSteadyState(msg, std::move(names));
  }

  const auto n = static_cast<Eigen::Index>(me.dim());
  const double scale = me.rate_scale();
  const Eigen::MatrixXcd sup = liouvillian(me) / scale;
  Eigen::MatrixXcd a = sup;
  // The trace condition replaces the equation for rho(0,0).
  a.row(0).setZero();
  for (Eigen::Index i = 0; i < n; ++i) a(0, i + i * n) = 1.0;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n * n);
  b(0) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw DegenerateSteadyState(
        "steady state is not unique: Liouvillian null space has dimension " +
            std::to_string(n * n - lu.rank() + 1),
        {});
  }
  Eigen::VectorXcd x = lu.solve(b);
  x += lu.solve(b - a * x);  // one step of iterative refinement

  Operator rho = Eigen::Map<const Operator>(x.data(), n, n);
  detail::hermitize(rho);
  rho /= rho.trace();
  const double residual = lindblad_rhs(rho, me).cwiseAbs().maxCoeff() / scale;
  if (residual > 1e-10) {
    throw ConvergenceError("steady-state residual " + std::to_string(residual) +
                               " exceeds 1e-10",
                           {residual});
  }
  return DensityMatrix(std::move(rho));
}

inline double scattering_rate(const DensityMatrix& rho, const Jump& channel) {
  return channel.rate * rho.population(channel.upper);
}

inline double scattering_rate(const DensityMatrix& rho, const DecayChannel& channel) {
  return channel.rate * rho.population(index_of(channel.upper));
}

// Adaptive Dormand-Prince 5(4) integration of the master equation.
class LindbladIntegrator {
 public:
  LindbladIntegrator(const MasterEquation& me, double tol) : me_(me), tol_(tol) {
    if (!(tol > 0.0 && tol <= 1e-3)) {
      throw InvalidArgument("integration tolerance must lie in (0, 1e-3]");
    }
    h_ = 0.01 / me_.rate_scale();
  }

  // Advances `rho` in place from time t0 to t1 >= t0.
  void advance(Operator& rho, double t0, double t1) {
    double t = t0;
    const double h_min = 1e-12 / me_.rate_scale();
    while (t < t1) {
      double h = std::min(h_, t1 - t);
      const bool clipped = h < h_;
      const Operator k1 = lindblad_rhs(rho, me_);
      const Operator k2 = lindblad_rhs(rho + h * (a21 * k1), me_);
      const Operator k3 = lindblad_rhs(rho + h * (a31 * k1 + a32 * k2), me_);
      const Operator k4 = lindblad_rhs(rho + h * (a41 * k1 + a42 * k2 + a43 * k3), me_);
      const Operator k5 =
          lindblad_rhs(rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), me_);
      const Operator k6 = lindblad_rhs(
          rho + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), me_);
      const Operator y5 = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Operator k7 = lindblad_rhs(y5, me_);
      const Operator err =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double err_norm = err.cwiseAbs().maxCoeff();
      const double factor =
          err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(tol_ / err_norm, 0.2), 0.2, 5.0);
      if (err_norm <= tol_) {
        rho = y5;
        detail::hermitize(rho);
        t = (h == t1 - t) ? t1 : t + h;
        if (!clipped) h_ = h * factor;
      } else {
        h_ = h * factor;
        if (h_ < h_min) {
          throw IntegrationError("step size underflow at t = " + std::to_string(t) + " s", t);
        }
      }
    }
  }

 private:
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                          b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
  // Difference between the 5th and embedded 4th order weights.
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  const MasterEquation& me_;
  double tol_;
  double h_;
};

namespace detail {

inline DensityMatrix finish(Operator rho) {
  hermitize(rho);
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

}  // namespace detail

// Density matrices at each of the requested times (any order, all >= 0).
inline std::vector<DensityMatrix> evolve_sampled(const DensityMatrix& rho0,
                                                 const MasterEquation& me,
                                                 std::span<const double> times,
                                                 double tol = 1e-10) {
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("evolution times must be >= 0");
  }

  LindbladIntegrator integrator(me, tol);
  Operator rho = rho0.matrix();
  double t = 0.0;
  std::vector<Operator> out(times.size());
  for (std::size_t k : order) {
    integrator.advance(rho, t, times[k]);
    t = times[k];
    out[k] = rho;
  }
  std::vector<DensityMatrix> result;
  result.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    result.push_back(times[k] == 0.0 ? rho0 : detail::finish(std::move(out[k])));
  }
  return result;
}

inline DensityMatrix evolve(const DensityMatrix& rho0, const MasterEquation& me, double t,
                            double tol = 1e-10) {
  if (!(t >= 0.0)) throw InvalidArgument("evolution time must be >= 0");
  if (t == 0.0) return rho0;
  const double times[] = {t};
  return evolve_sampled(rho0, me, times, tol).front();
}

struct G2Curve {
  std::vector<double> tau;     // s
  std::vector<double> values;  // g2
  // Present for measured curves: one-sigma errors, raw bin counts, and the
  // normalization with values = counts / normalization.
  std::vector<double> errors;
  std::vector<std::uint64_t> counts;
  double normalization = 0.0;
  std::map<std::string, double> metadata;
};

// g2(tau) by the quantum regression theorem: the state right after a detection on
// `detect` is evolved and its upper-level population compared to steady state.
inline G2Curve g2_regression(const MasterEquation& me, std::size_t detect,
                             std::span<const double> tau_grid, double tol = 1e-10) {
  if (detect >= me.jumps.size()) throw InvalidArgument("detection channel out of range");
  const Jump& jump = me.jumps[detect];
  const DensityMatrix ss = steady_state(me);
  const double p_ss = ss.population(jump.upper);
  if (!(p_ss > 1e-14)) {
    throw InvalidArgument("steady-state population of the detected level is zero; g2 undefined");
  }

  const auto n = static_cast<Eigen::Index>(me.dim());
  Operator lower = Operator::Zero(n, n);
  lower(static_cast<Eigen::Index>(jump.lower), static_cast<Eigen::Index>(jump.upper)) = 1.0;
  Operator collapsed = lower * ss.matrix() * lower.adjoint();
  collapsed /= collapsed.trace();
  const DensityMatrix start = detail::finish(collapsed);

  std::vector<double> abs_tau(tau_grid.size());
  std::transform(tau_grid.begin(), tau_grid.end(), abs_tau.begin(),
                 [](double t) { return std::abs(t); });
  const auto states = evolve_sampled(start, me, abs_tau, tol);

  G2Curve curve;
  curve.tau.assign(tau_grid.begin(), tau_grid.end());
  curve.values.reserve(states.size());
  for (const auto& s : states) curve.values.push_back(s.population(jump.upper) / p_ss);
  curve.metadata["steady_state_population"] = p_ss;
  curve.metadata["detect_rate_per_s"] = jump.rate;
  return curve;
}

}  // namespace ionlight
