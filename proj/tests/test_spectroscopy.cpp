#include <cmath>

#include <gtest/gtest.h>

#include "ionlight/presets.hpp"
#include "ionlight/spectroscopy.hpp"

namespace {

using namespace ionlight;
using constants::mhz;
using constants::to_mhz;

TEST(LorentzianFit, ExactRecovery) {
  const auto x = linspace(mhz(-100), mhz(0), 41);
  std::vector<double> y;
  for (double d : x) {
    const double u = (d - mhz(-20)) / mhz(15);
    y.push_back(3e4 / (1 + u * u) + 740);
  }
  const auto f = lorentzian_fit(x, y);
  EXPECT_NEAR(f.center / mhz(-20), 1.0, 1e-9);
  EXPECT_NEAR(f.hwhm / mhz(15), 1.0, 1e-9);
  EXPECT_NEAR(f.peak / 3e4, 1.0, 1e-9);
  EXPECT_NEAR(f.floor / 740, 1.0, 1e-9);
  EXPECT_NEAR(f(mhz(-20)), 30740, 1e-6);
}

TEST(LorentzianFit, RedHalfOnly) {
  // Only the red side and the top of the line are sampled.
  const auto x = linspace(mhz(-100), mhz(0), 51);
  std::vector<double> y;
  for (double d : x) {
    const double u = (d - mhz(5)) / mhz(18);
    y.push_back(4e4 / (1 + u * u) + 500);
  }
  const auto f = lorentzian_fit(x, y);
  EXPECT_NEAR(to_mhz(f.center), 5.0, 1e-6);
  EXPECT_NEAR(to_mhz(f.hwhm), 18.0, 1e-6);
}

TEST(LorentzianFit, TwoLevelPowerBroadening) {
  // rho_ee = (s/2) / (1 + s + (2 delta / gamma)^2): a Lorentzian of HWHM
  // (gamma / 2) sqrt(1 + s).
  const double gamma = mhz(22.3);
  for (double s : {0.1, 1.0, 1.3, 5.0}) {
    const auto x = linspace(mhz(-80), mhz(80), 81);
    std::vector<double> y;
    for (double d : x) y.push_back(gamma * 0.5 * s / (1 + s + std::pow(2 * d / gamma, 2)));
    const auto f = lorentzian_fit(x, y);
    EXPECT_NEAR(f.hwhm / (0.5 * gamma * std::sqrt(1 + s)), 1.0, 1e-8) << s;
    EXPECT_NEAR(f.center / gamma, 0.0, 1e-8);
  }
}

TEST(LorentzianFit, InputValidation) {
  std::vector<double> x{1, 2, 3, 4}, y{1, 2, 1, 0};
  EXPECT_THROW(lorentzian_fit(x, y), InvalidArgument);
  x.push_back(5);
  EXPECT_THROW(lorentzian_fit(x, y), InvalidArgument);
  y.push_back(-1);
  EXPECT_THROW(lorentzian_fit(x, y), InvalidArgument);
}

TEST(Sbr, Values) {
  EXPECT_NEAR(sbr(36000, 740), 48.65, 0.01);
  EXPECT_THROW(sbr(1, 0), InvalidArgument);
}

class Ca40Scan : public ::testing::Test {
 protected:
  ExperimentConfig c;
  LevelScheme scheme = build_ca40_scheme(ca40_default_config());
  double gamma = scheme.total_decay_rate(Level::P12);

  ScanResult scan(double s, std::span<const double> detunings) const {
    return line_scan(scheme, experiment_drives(c, scheme, s, 0.0), detunings,
                     spectroscopy_detector(c));
  }
};

TEST_F(Ca40Scan, ZeroDriveIsFlatBackground) {
  const auto x = scan_detunings(c);
  const auto r = scan(0.0, x);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_NEAR(r.combined[k], c.background_total, 1e-9);
    EXPECT_NEAR(r.channel1[k] + r.channel2[k], r.combined[k], 1e-9);
  }
}

TEST_F(Ca40Scan, BackgroundSplitFollowsSbr) {
  const auto d = spectroscopy_detector(c);
  EXPECT_NEAR(d.background[0] + d.background[1], 740.0, 1e-9);
  EXPECT_NEAR(d.background[1] / d.background[0], 75.0 / 26.0, 1e-12);
}

TEST_F(Ca40Scan, CalibratedPeakRate) {
  const auto r = scan(c.calibration_saturation, scan_detunings(c));
  EXPECT_NEAR(r.peak(), 36000.0, 5.0);
}

TEST_F(Ca40Scan, LineIsAtLeastNaturalWidth) {
  const auto x = linspace(mhz(-100), mhz(100), 81);
  const auto r = scan(c.scan_saturation, x);
  const auto f = lorentzian_fit(r.detunings, r.combined);
  EXPECT_GE(f.hwhm, 0.5 * gamma);
  EXPECT_NEAR(f.floor, c.background_total, 0.05 * c.background_total);
  EXPECT_LT(std::abs(f.center), 0.25 * gamma);
}

TEST_F(Ca40Scan, RequiresScannedDrive) {
  const std::vector<LaserDrive> drives{{Level::D32, Level::P32, mhz(10), 0.0}};
  const std::vector<double> x{0.0};
  EXPECT_THROW(line_scan(scheme, drives, x, spectroscopy_detector(c)), InvalidArgument);
}

}  // namespace
