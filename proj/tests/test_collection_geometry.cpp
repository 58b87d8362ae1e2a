#include <cmath>

#include <gtest/gtest.h>

#include "ionlight/collection_geometry.hpp"

namespace {

using namespace ionlight;

TEST(Geometry, EffectiveNaAtDefaultSeparation) {
  FiberGeometry g;
  EXPECT_NEAR(effective_na(g), 100.0 / std::hypot(100.0, 275.0), 1e-12);
  EXPECT_NEAR(effective_na(g), 0.3417, 1e-4);
  EXPECT_NEAR(2.0 * collection_fraction(g), 0.0602, 1e-4);
}

TEST(Geometry, CloserFibreCollectsMore) {
  FiberGeometry g;
  g.separation = 183e-6;
  EXPECT_NEAR(2.0 * collection_fraction(g), 0.1225, 1e-4);
}

TEST(Geometry, NaLimitsCloseApproach) {
  FiberGeometry g;
  g.separation = 10e-6;
  g.recess = 0.0;
  EXPECT_DOUBLE_EQ(effective_na(g), g.fiber_na);
}

TEST(Geometry, SolidAngleLimits) {
  EXPECT_EQ(solid_angle_fraction(0.0), 0.0);
  EXPECT_NEAR(solid_angle_fraction(1e-8), 0.25e-16, 1e-30);
  EXPECT_NEAR(solid_angle_fraction(0.999999), 0.5 * (1.0 - std::sqrt(1.0 - 0.999999 * 0.999999)), 1e-15);
  EXPECT_NEAR(solid_angle_fraction(0.5), 0.5 * (1.0 - std::cos(std::asin(0.5))), 1e-15);
  EXPECT_THROW(solid_angle_fraction(1.0), InvalidArgument);
  EXPECT_THROW(solid_angle_fraction(-0.1), InvalidArgument);
}

TEST(Geometry, FarFibreCollectsNothing) {
  FiberGeometry g;
  g.separation = 1.0;
  EXPECT_LT(collection_fraction(g), 1e-8);
}

TEST(Geometry, MonotoneInSeparation) {
  const auto rows = geometry_table(FiberGeometry{}, {100e-6, 183e-6, 275e-6, 500e-6, 1e-3});
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].total, rows[i - 1].total);
}

TEST(Geometry, VignettingFlag) {
  FiberGeometry g;
  EXPECT_FALSE(check_vignetting(g).clipped);
  g.bore_radius = 20e-6;
  const auto v = check_vignetting(g);
  EXPECT_TRUE(v.clipped);
  EXPECT_FALSE(v.message.empty());
}

TEST(Geometry, Validation) {
  FiberGeometry g;
  g.separation = -1;
  EXPECT_THROW(effective_na(g), InvalidArgument);
  g = {};
  g.fiber_na = 1.2;
  EXPECT_THROW(effective_na(g), InvalidArgument);
  g = {};
  g.recess = g.separation;
  EXPECT_THROW(effective_na(g), InvalidArgument);
}

}  // namespace
