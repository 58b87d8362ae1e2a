#pragma once

// Axisymmetric electrostatics for the endcap trap and its rf pseudopotential.
//
// Laplace's equation in (r, z) is discretised by finite volumes on a uniform
// node grid: every node owns an annular cell, so the system is symmetric and the
// axis needs no special treatment beyond its disc-shaped cell. Electrodes are
// rectangles in (r, z) at fixed potential. A grid link that is cut by an
// electrode surface couples to the surface value at the true distance
// (Shortley-Weller), so results do not depend on how the surfaces fall between
// nodes. Outer-edge nodes take values from a boundary function or, where it
// returns nothing, a zero-flux condition.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ionlight/constants.hpp"
#include "ionlight/error.hpp"

namespace ionlight {

struct AxisymGrid {
  double spacing = 5e-6;  // m
  std::size_t nr = 0;     // nodes at r = 0, h, ..., (nr-1) h
  std::size_t nz = 0;     // nodes at z = z_min + j h
  double z_min = 0.0;

  // Grid covering r in [0, r_max] and z in [-z_max, z_max] with a node at z = 0.
  static AxisymGrid covering(double spacing, double r_max, double z_max) {
    if (!(spacing > 0.0) || !(r_max > spacing) || !(z_max > spacing)) {
      throw InvalidArgument("grid extent must exceed the spacing");
    }
    AxisymGrid g;
    g.spacing = spacing;
    const auto kr = static_cast<std::size_t>(std::ceil(r_max / spacing - 1e-9));
    const auto kz = static_cast<std::size_t>(std::ceil(z_max / spacing - 1e-9));
    g.nr = kr + 1;
    g.nz = 2 * kz + 1;
    g.z_min = -static_cast<double>(kz) * spacing;
    return g;
  }

  double r(std::size_t i) const { return static_cast<double>(i) * spacing; }
  double z(std::size_t j) const { return z_min + static_cast<double>(j) * spacing; }
  double r_max() const { return r(nr - 1); }
  double z_max() const { return z(nz - 1); }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nr + i; }
  std::size_t size() const { return nr * nz; }
  std::size_t nearest_j(double zz) const {
    return static_cast<std::size_t>(std::clamp(std::lround((zz - z_min) / spacing), 0L,
                                               static_cast<long>(nz) - 1));
  }
};

// Closed rectangle r_min <= r <= r_max, z_min <= z <= z_max at a fixed potential.
struct Electrode {
  double r_min = 0.0, r_max = 0.0;
  double z_min = 0.0, z_max = 0.0;
  double voltage = 0.0;
  std::string name;

  bool contains(double r, double z, double margin = 0.0) const {
    return r >= r_min - margin && r <= r_max + margin && z >= z_min - margin &&
           z <= z_max + margin;
  }
};

// Dirichlet value for an outer-edge node (r = r_max or z = +-z_max) that is not
// inside an electrode, or nullopt for zero normal flux there.
using BoundaryFn = std::function<std::optional<double>(double r, double z)>;

struct LaplaceProblem {
  AxisymGrid grid;
  std::vector<Electrode> electrodes;
  BoundaryFn outer;
};

struct SolverOptions {
  double tolerance = 1e-8;      // max node residual relative to `scale`
  double scale = 1.0;           // V, typically the largest electrode voltage
  std::size_t max_iterations = 20000;
};

struct FieldMap {
  AxisymGrid grid;
  std::vector<double> phi;           // V
  std::vector<double> e_r, e_z;      // V/m
  std::vector<unsigned char> fixed;  // 1 on Dirichlet nodes
  std::vector<double> residual_history;  // max normalized residual per iteration, V
  double max_residual = 0.0;             // V

  double e_mag(std::size_t k) const { return std::hypot(e_r[k], e_z[k]); }
  double phi_at(std::size_t i, std::size_t j) const { return phi[grid.index(i, j)]; }
};

namespace detail {

// Nodes closer than this fraction of h to an electrode are taken as electrode
// nodes, which keeps cut-link couplings bounded.
inline constexpr double kSnapFraction = 0.1;

struct Link {
  bool exists = false;  // false across the outer edge (zero flux)
  double coeff = 0.0;   // flux coefficient, divided by 2 pi h
  double frac = 1.0;    // neighbour distance / h
  long node = -1;       // neighbour node, or -1 when the link ends on a surface
  double value = 0.0;   // surface potential when node < 0
};

struct NodeLinks {
  std::array<Link, 4> link;  // west, east, south, north
};

// Finite-volume couplings of node (i, j) with uncut links, divided by 2 pi h.
inline std::array<double, 4> fv_coefficients(const AxisymGrid& g, std::size_t i, std::size_t j) {
  const double ri = static_cast<double>(i);
  const bool top_or_bottom = j == 0 || j + 1 == g.nz;
  const double height = top_or_bottom ? 0.5 : 1.0;  // cell height / h
  double area;                                      // cell cross-section / h^2
  if (i == 0) {
    area = 0.125;
  } else if (i + 1 == g.nr) {
    area = 0.5 * (ri - 0.25);
  } else {
    area = ri;
  }
  return {i > 0 ? (ri - 0.5) * height : 0.0, i + 1 < g.nr ? (ri + 0.5) * height : 0.0,
          j > 0 ? area : 0.0, j + 1 < g.nz ? area : 0.0};
}

// First electrode surface crossed when moving from (r, z) by `step` along r
// (axis 0) or z (axis 1), as a fraction of the step length.
inline std::optional<std::pair<double, double>> surface_hit(const std::vector<Electrode>& es,
                                                            double r, double z, int axis,
                                                            double step) {
  std::optional<std::pair<double, double>> best;
  const double h = std::abs(step);
  for (const auto& e : es) {
    double t = -1.0;
    if (axis == 0) {
      if (z < e.z_min || z > e.z_max) continue;
      if (step > 0 && e.r_min > r && e.r_min <= r + h) t = (e.r_min - r) / h;
      if (step < 0 && e.r_max < r && e.r_max >= r - h) t = (r - e.r_max) / h;
    } else {
      if (r < e.r_min || r > e.r_max) continue;
      if (step > 0 && e.z_min > z && e.z_min <= z + h) t = (e.z_min - z) / h;
      if (step < 0 && e.z_max < z && e.z_max >= z - h) t = (z - e.z_max) / h;
    }
    if (t > 0.0 && (!best || t < best->first)) best = std::make_pair(t, e.voltage);
  }
  return best;
}

inline NodeLinks node_links(const LaplaceProblem& p, std::size_t i, std::size_t j) {
  const auto& g = p.grid;
  const auto c = fv_coefficients(g, i, j);
  const double h = g.spacing;
  const double r = g.r(i), z = g.z(j);
  NodeLinks out;
  const std::array<int, 4> axis{0, 0, 1, 1};
  const std::array<double, 4> step{-h, h, -h, h};
  const std::array<bool, 4> inside{i > 0, i + 1 < g.nr, j > 0, j + 1 < g.nz};
  const std::array<long, 4> nb{static_cast<long>(g.index(i, j)) - 1,
                               static_cast<long>(g.index(i, j)) + 1,
                               static_cast<long>(g.index(i, j)) - static_cast<long>(g.nr),
                               static_cast<long>(g.index(i, j)) + static_cast<long>(g.nr)};
  for (int d = 0; d < 4; ++d) {
    Link& l = out.link[static_cast<std::size_t>(d)];
    if (!inside[static_cast<std::size_t>(d)]) continue;
    l.exists = true;
    const double base = c[static_cast<std::size_t>(d)];
    const auto hit = surface_hit(p.electrodes, r, z, axis[static_cast<std::size_t>(d)],
                                 step[static_cast<std::size_t>(d)]);
    if (hit && hit->first < 1.0 - 1e-12) {
      l.frac = hit->first;
      l.coeff = base / hit->first;
      l.node = -1;
      l.value = hit->second;
    } else {
      l.frac = 1.0;
      l.coeff = base;
      l.node = nb[static_cast<std::size_t>(d)];
    }
  }
  return out;
}

// Derivative along one axis at a node from its two links (either may be missing).
inline double link_derivative(double f0, const Link& minus, const Link& plus,
                              const std::vector<double>& phi, double h) {
  auto val = [&](const Link& l) { return l.node >= 0 ? phi[static_cast<std::size_t>(l.node)] : l.value; };
  if (minus.exists && plus.exists) {
    const double a = minus.frac, b = plus.frac;
    return (a * a * (val(plus) - f0) - b * b * (val(minus) - f0)) / (a * b * (a + b) * h);
  }
  if (plus.exists) return (val(plus) - f0) / (plus.frac * h);
  if (minus.exists) return (f0 - val(minus)) / (minus.frac * h);
  return 0.0;
}

inline void compute_field(const LaplaceProblem& p, FieldMap& f) {
  const auto& g = f.grid;
  const double h = g.spacing;
  f.e_r.assign(g.size(), 0.0);
  f.e_z.assign(g.size(), 0.0);
  for (std::size_t j = 0; j < g.nz; ++j) {
    for (std::size_t i = 0; i < g.nr; ++i) {
      const auto k = g.index(i, j);
      const auto links = node_links(p, i, j);
      const double f0 = f.phi[k];
      f.e_r[k] = i == 0 ? 0.0 : -link_derivative(f0, links.link[0], links.link[1], f.phi, h);
      f.e_z[k] = -link_derivative(f0, links.link[2], links.link[3], f.phi, h);
    }
  }
}

inline double node_residual(const NodeLinks& links, const std::vector<double>& phi, double f0) {
  double num = 0.0, den = 0.0;
  for (const auto& l : links.link) {
    if (!l.exists) continue;
    const double v = l.node >= 0 ? phi[static_cast<std::size_t>(l.node)] : l.value;
    num += l.coeff * (v - f0);
    den += l.coeff;
  }
  return den > 0.0 ? std::abs(num) / den : 0.0;
}

}  // namespace detail

// Max over free nodes of |sum_k c_k (phi_k - phi_0)| / sum_k c_k, in volts.
inline double max_node_residual(const LaplaceProblem& p, const FieldMap& f) {
  const auto& g = f.grid;
  double worst = 0.0;
  for (std::size_t j = 0; j < g.nz; ++j) {
    for (std::size_t i = 0; i < g.nr; ++i) {
      const auto k = g.index(i, j);
      if (f.fixed[k]) continue;
      worst = std::max(worst, detail::node_residual(detail::node_links(p, i, j), f.phi,
                                                    f.phi[k]));
    }
  }
  return worst;
}

// Preconditioned conjugate gradients on the reduced system; the stopping test is
// the max node residual above, so the guarantee is independent of grid size.
inline FieldMap solve_laplace(const LaplaceProblem& p, const SolverOptions& opt = {}) {
  const auto& g = p.grid;
  if (g.nr < 3 || g.nz < 3) throw InvalidArgument("grid needs at least 3 x 3 nodes");
  FieldMap f;
  f.grid = g;
  f.phi.assign(g.size(), 0.0);
  f.fixed.assign(g.size(), 0);
  std::vector<long> unknown(g.size(), -1);
  long n = 0;
  const double margin = detail::kSnapFraction * g.spacing;
  for (std::size_t j = 0; j < g.nz; ++j) {
    for (std::size_t i = 0; i < g.nr; ++i) {
      const auto k = g.index(i, j);
      const double r = g.r(i), z = g.z(j);
      std::optional<double> v;
      for (const auto& e : p.electrodes) {
        if (e.contains(r, z, margin)) {
          v = e.voltage;
          break;
        }
      }
      const bool edge = i + 1 == g.nr || j == 0 || j + 1 == g.nz;
      if (!v && edge && p.outer) v = p.outer(r, z);
      if (v) {
        if (!std::isfinite(*v)) throw InvalidArgument("non-finite boundary value");
        f.phi[k] = *v;
        f.fixed[k] = 1;
      } else {
        unknown[k] = n++;
      }
    }
  }

  using SpMat = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd diag(n);
  for (std::size_t j = 0; j < g.nz; ++j) {
    for (std::size_t i = 0; i < g.nr; ++i) {
      const auto k = g.index(i, j);
      const long row = unknown[k];
      if (row < 0) continue;
      const auto links = detail::node_links(p, i, j);
      double d = 0.0;
      for (const auto& l : links.link) {
        if (!l.exists || l.coeff <= 0.0) continue;
        d += l.coeff;
        if (l.node < 0) {
          rhs(row) += l.coeff * l.value;
        } else if (unknown[static_cast<std::size_t>(l.node)] >= 0) {
          trip.emplace_back(row, unknown[static_cast<std::size_t>(l.node)], -l.coeff);
        } else {
          rhs(row) += l.coeff * f.phi[static_cast<std::size_t>(l.node)];
        }
      }
      if (d <= 0.0) throw InvalidArgument("isolated free node in Laplace problem");
      trip.emplace_back(row, row, d);
      diag(row) = d;
    }
  }
  SpMat a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  trip.shrink_to_fit();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n > 0) {
    Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::NaturalOrdering<int>> ic;
    ic.compute(a);
    if (ic.info() != Eigen::Success) throw ConvergenceError("incomplete Cholesky failed", {});

    const double target = opt.tolerance * opt.scale;
    Eigen::VectorXd r = rhs - a * x;
    Eigen::VectorXd z = ic.solve(r);
    Eigen::VectorXd dir = z;
    double rz = r.dot(z);
    bool done = false;
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
      const double res = (r.array() / diag.array()).abs().maxCoeff();
      f.residual_history.push_back(res);
      if (res <= target) {
        done = true;
        break;
      }
      const Eigen::VectorXd ad = a * dir;
      const double alpha = rz / dir.dot(ad);
      x += alpha * dir;
      // Periodic true-residual refresh keeps rounding drift out of the stop test.
      if ((it + 1) % 200 == 0) {
        r = rhs - a * x;
      } else {
        r -= alpha * ad;
      }
      z = ic.solve(r);
      const double rz_new = r.dot(z);
      dir = z + (rz_new / rz) * dir;
      rz = rz_new;
    }
    if (!done) {
      throw ConvergenceError("Laplace solver did not reach the residual tolerance",
                             std::move(f.residual_history));
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (unknown[k] >= 0) f.phi[k] = x(unknown[k]);
  }
  f.max_residual = max_node_residual(p, f);
  detail::compute_field(p, f);
  return f;
}

// ---------------------------------------------------------------------------
// Endcap trap geometry

enum class ElectrodeStyle { Tubular, Solid };

struct TrapGeometry {
  double center_outer_radius = 229e-6;  // m
  double center_inner_radius = 127e-6;  // bore, m
  double tip_separation = 446e-6;       // m
  // Grounded coaxial tubes around each centre electrode.
  double ground_inner_radius = 240e-6;
  double ground_outer_radius = 340e-6;
  double ground_tip_z = 615e-6;         // |z| of the ground tube faces
  ElectrodeStyle style = ElectrodeStyle::Tubular;
  double far_field = 2.25e-3;           // r and |z| extent of the domain

  void validate() const {
    if (!(center_inner_radius > 0.0) || !(center_inner_radius < center_outer_radius)) {
      throw ConfigError("centre electrode needs 0 < inner radius < outer radius");
    }
    if (!(tip_separation > 0.0)) throw ConfigError("tip separation must be > 0");
    if (!(ground_inner_radius > center_outer_radius) ||
        !(ground_outer_radius > ground_inner_radius)) {
      throw ConfigError("ground tube must enclose the centre electrode");
    }
    if (!(ground_tip_z > 0.0)) throw ConfigError("ground tube face position must be > 0");
    if (!(far_field > ground_outer_radius) || !(far_field > ground_tip_z) ||
        !(far_field > 0.5 * tip_separation)) {
      throw ConfigError("far-field boundary must lie outside all electrodes");
    }
  }
};

struct RfDrive {
  double amplitude = 200.0;                 // V, peak
  double frequency = constants::mhz(14.9);  // rad/s

  void validate() const {
    if (!(amplitude > 0.0) || !(frequency > 0.0)) {
      throw ConfigError("rf amplitude and frequency must be > 0");
    }
  }
};

// Both centre electrodes at `voltage`, ground tubes and far field at 0. Where the
// electrodes leave the domain the cut is filled with the long-tube limit: the
// bore at the electrode potential and the coaxial gap with the logarithmic
// coax profile.
inline LaplaceProblem trap_problem(const TrapGeometry& g, double spacing, double voltage) {
  g.validate();
  LaplaceProblem p;
  p.grid = AxisymGrid::covering(spacing, g.far_field, g.far_field);
  const double zmax = p.grid.z_max();
  const double tip = 0.5 * g.tip_separation;
  const double inner = g.style == ElectrodeStyle::Solid ? 0.0 : g.center_inner_radius;
  p.electrodes = {
      {inner, g.center_outer_radius, tip, zmax, voltage, "centre_top"},
      {inner, g.center_outer_radius, -zmax, -tip, voltage, "centre_bottom"},
      {g.ground_inner_radius, g.ground_outer_radius, g.ground_tip_z, zmax, 0.0, "ground_top"},
      {g.ground_inner_radius, g.ground_outer_radius, -zmax, -g.ground_tip_z, 0.0,
       "ground_bottom"},
  };
  const double rmax = p.grid.r_max();
  p.outer = [g, voltage, zmax, rmax](double r, double z) -> std::optional<double> {
    if (r >= rmax) return 0.0;
    if (std::abs(z) >= zmax) {
      if (r < g.center_outer_radius) return voltage;
      if (r < g.ground_inner_radius) {
        return voltage * std::log(g.ground_inner_radius / r) /
               std::log(g.ground_inner_radius / g.center_outer_radius);
      }
    }
    return 0.0;
  };
  return p;
}

inline FieldMap solve_potential(const TrapGeometry& geom, double spacing, double voltage,
                                SolverOptions opt = {}) {
  geom.validate();
  if (geom.style == ElectrodeStyle::Tubular && geom.center_inner_radius / spacing < 8.0) {
    throw InvalidArgument("grid must resolve the bore radius with at least 8 cells");
  }
  opt.scale = std::abs(voltage) > 0.0 ? std::abs(voltage) : 1.0;
  return solve_laplace(trap_problem(geom, spacing, voltage), opt);
}

// ---------------------------------------------------------------------------
// Pseudopotential

struct PotentialMap {
  AxisymGrid grid;
  std::vector<double> u_ev;          // eV
  std::vector<unsigned char> fixed;  // electrode / boundary nodes

  double at(std::size_t i, std::size_t j) const { return u_ev[grid.index(i, j)]; }
};

// U = q^2 E^2 / (4 m Omega^2) in eV for a field map computed at the rf amplitude.
inline double pseudopotential_ev(double e_field, double rf_frequency, double mass,
                                 double charge) {
  return charge * charge * e_field * e_field / (4.0 * mass * rf_frequency * rf_frequency) /
         constants::elementary_charge;
}

inline PotentialMap pseudopotential(const FieldMap& f, const RfDrive& drive, double mass,
                                    double charge) {
  drive.validate();
  if (!(mass > 0.0) || !(charge > 0.0)) throw InvalidArgument("mass and charge must be > 0");
  PotentialMap u;
  u.grid = f.grid;
  u.fixed = f.fixed;
  u.u_ev.resize(f.phi.size());
  for (std::size_t k = 0; k < f.phi.size(); ++k) {
    u.u_ev[k] = pseudopotential_ev(f.e_mag(k), drive.frequency, mass, charge);
  }
  return u;
}

struct TrapDepth {
  double radial = 0.0;  // eV
  double axial = 0.0;   // eV
  double minimum = 0.0; // eV at the trap centre
  double z_center = 0.0;
  double radial_barrier_r = 0.0;  // m, where the radial barrier peaks
  double axial_barrier_z = 0.0;   // m, signed
  double overall() const { return std::min(radial, axial); }
};

namespace detail {

// Interior minimum of U on the axis closest to z = 0.
inline std::size_t axis_minimum(const PotentialMap& u) {
  const auto& g = u.grid;
  const std::size_t j0 = g.nearest_j(0.0);
  // Walk downhill from the node nearest z = 0.
  std::size_t j = j0;
  for (;;) {
    const double here = u.at(0, j);
    if (j > 0 && !u.fixed[g.index(0, j - 1)] && u.at(0, j - 1) < here) {
      --j;
    } else if (j + 1 < g.nz && !u.fixed[g.index(0, j + 1)] && u.at(0, j + 1) < here) {
      ++j;
    } else {
      break;
    }
  }
  const bool interior = j > 0 && j + 1 < g.nz && !u.fixed[g.index(0, j)] &&
                        !u.fixed[g.index(1, j)] && u.at(1, j) >= u.at(0, j);
  if (!interior) throw InvalidArgument("pseudopotential has no interior minimum near the centre");
  return j;
}

}  // namespace detail

// Barrier heights along the radial line through the minimum and along the axis
// in both directions. A path ends at the first electrode or boundary node.
inline TrapDepth trap_depth(const PotentialMap& u) {
  const auto& g = u.grid;
  const std::size_t jm = detail::axis_minimum(u);
  TrapDepth d;
  d.minimum = u.at(0, jm);
  d.z_center = g.z(jm);

  double best = d.minimum;
  for (std::size_t i = 0; i < g.nr && !u.fixed[g.index(i, jm)]; ++i) {
    if (u.at(i, jm) > best) {
      best = u.at(i, jm);
      d.radial_barrier_r = g.r(i);
    }
  }
  d.radial = best - d.minimum;

  double up = d.minimum, down = d.minimum;
  double z_up = d.z_center, z_down = d.z_center;
  for (std::size_t j = jm; j < g.nz && !u.fixed[g.index(0, j)]; ++j) {
    if (u.at(0, j) > up) {
      up = u.at(0, j);
      z_up = g.z(j);
    }
  }
  for (std::size_t j = jm + 1; j-- > 0 && !u.fixed[g.index(0, j)];) {
    if (u.at(0, j) > down) {
      down = u.at(0, j);
      z_down = g.z(j);
    }
  }
  d.axial = std::min(up, down) - d.minimum;
  d.axial_barrier_z = up <= down ? z_up : z_down;
  return d;
}

struct SecularFrequencies {
  double radial = 0.0;  // rad/s
  double axial = 0.0;   // rad/s
  double fit_residual = 0.0;  // rms residual / potential range in the fit region
};

// Fits U = U0 + a r^2 + b (z - z0)^2 + c (z - z0) to the nodes within `radius`
// of the minimum; omega = sqrt(2 a / m), sqrt(2 b / m) with U in joules.
inline SecularFrequencies secular_frequencies(const PotentialMap& u, double mass,
                                              double radius = 20e-6) {
  if (!(mass > 0.0)) throw InvalidArgument("mass must be > 0");
  const auto& g = u.grid;
  const std::size_t jm = detail::axis_minimum(u);
  const double z0 = g.z(jm);
  const auto span = static_cast<long>(std::floor(radius / g.spacing));
  if (span < 2) throw InvalidArgument("fit region must span at least 2 grid cells");
  std::vector<std::array<double, 3>> pts;
  for (long dj = -span; dj <= span; ++dj) {
    const long j = static_cast<long>(jm) + dj;
    if (j < 0 || j >= static_cast<long>(g.nz)) continue;
    for (long i = 0; i <= span && i < static_cast<long>(g.nr); ++i) {
      const double r = g.r(static_cast<std::size_t>(i));
      const double dz = g.z(static_cast<std::size_t>(j)) - z0;
      if (r * r + dz * dz > radius * radius * (1 + 1e-12)) continue;
      const auto k = g.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (u.fixed[k]) continue;
      pts.push_back({r, dz, u.u_ev[k] * constants::elementary_charge});
    }
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 4);
  Eigen::VectorXd y(a.rows());
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    const auto& p = pts[static_cast<std::size_t>(k)];
    // Columns scaled to O(1) for conditioning.
    a(k, 0) = 1.0;
    a(k, 1) = (p[0] / radius) * (p[0] / radius);
    a(k, 2) = (p[1] / radius) * (p[1] / radius);
    a(k, 3) = p[1] / radius;
    y(k) = p[2];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
  const double range = y.maxCoeff() - y.minCoeff();
  const double rms = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(y.size()));
  SecularFrequencies s;
  s.fit_residual = range > 0.0 ? rms / range : 0.0;
  if (!(s.fit_residual < 0.05)) {
    throw ConvergenceError("quadratic fit around the minimum is poor (relative residual " +
                               std::to_string(s.fit_residual) + ")",
                           {s.fit_residual});
  }
  const double ar = c(1) / (radius * radius);
  const double az = c(2) / (radius * radius);
  if (!(ar > 0.0) || !(az > 0.0)) throw InvalidArgument("potential is not confining at the minimum");
  s.radial = std::sqrt(2.0 * ar / mass);
  s.axial = std::sqrt(2.0 * az / mass);
  return s;
}

}  // namespace ionlight
