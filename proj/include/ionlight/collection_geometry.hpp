#pragma once

// Light collection by a bare multimode fibre facing the ion.

#include <cmath>
#include <string>
#include <vector>

#include "ionlight/error.hpp"

namespace ionlight {

struct FiberGeometry {
  double core_radius = 100e-6;  // m
  double fiber_na = 0.48;
  double separation = 275e-6;   // ion to fibre face, m
  double recess = 50e-6;        // fibre face behind the electrode tip, m
  double bore_radius = 127e-6;  // electrode bore holding the fibre, m

  void validate() const {
    if (!(core_radius > 0.0)) throw InvalidArgument("core radius must be > 0");
    if (!(fiber_na > 0.0 && fiber_na < 1.0)) throw InvalidArgument("fibre NA must be in (0, 1)");
    if (!(separation > 0.0)) throw InvalidArgument("ion-fibre separation must be > 0");
    if (!(recess >= 0.0) || recess >= separation) {
      throw InvalidArgument("recess must be in [0, separation)");
    }
  }
};

// min(NA, sin of the half angle the core subtends at the ion)
inline double effective_na(const FiberGeometry& g) {
  g.validate();
  const double r = g.core_radius, d = g.separation;
  return std::min(g.fiber_na, r / std::sqrt(r * r + d * d));
}

// Fraction of 4 pi inside a cone of half angle asin(na).
inline double solid_angle_fraction(double na_eff) {
  if (!(na_eff >= 0.0 && na_eff < 1.0)) throw InvalidArgument("NA must lie in [0, 1)");
  // (1 - cos)/2 written to avoid cancellation at small NA.
  const double s2 = na_eff * na_eff;
  return 0.5 * s2 / (1.0 + std::sqrt(1.0 - s2));
}

inline double collection_fraction(const FiberGeometry& g) {
  return solid_angle_fraction(effective_na(g));
}

struct VignettingCheck {
  double core_half_angle = 0.0;  // rad, accepted cone at the ion
  double bore_half_angle = 0.0;  // rad, cone through the bore opening at the tip
  bool clipped = false;
  std::string message;
};

// The bore opening sits `recess` in front of the fibre face. Light accepted by the
// fibre is clipped if that opening subtends a smaller angle than the accepted cone.
inline VignettingCheck check_vignetting(const FiberGeometry& g) {
  g.validate();
  VignettingCheck v;
  v.core_half_angle = std::asin(effective_na(g));
  v.bore_half_angle = std::atan(g.bore_radius / (g.separation - g.recess));
  v.clipped = v.bore_half_angle < v.core_half_angle;
  if (v.clipped) {
    v.message = "electrode bore clips the fibre acceptance cone";
  }
  return v;
}

struct GeometryRow {
  double separation = 0.0;
  double na_eff = 0.0;
  double per_fiber = 0.0;
  double total = 0.0;  // two opposing fibres
  bool clipped = false;
};

inline std::vector<GeometryRow> geometry_table(FiberGeometry base,
                                               const std::vector<double>& separations) {
  std::vector<GeometryRow> rows;
  for (double d : separations) {
    base.separation = d;
    base.recess = std::min(base.recess, 0.5 * d);
    GeometryRow row;
    row.separation = d;
    row.na_eff = effective_na(base);
    row.per_fiber = solid_angle_fraction(row.na_eff);
    row.total = 2.0 * row.per_fiber;
    row.clipped = check_vignetting(base).clipped;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ionlight
