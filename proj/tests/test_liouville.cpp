#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ionlight/master_equation.hpp"
#include "ionlight/presets.hpp"

namespace {

using namespace ionlight;
using constants::mhz;

const double kGamma = mhz(22.3);

double bloch_pe(double s, double delta, double gamma) {
  const double x = 2.0 * delta / gamma;
  return 0.5 * s / (1.0 + s + x * x);
}

// Resonant two-level g2 (Kimble-Mandel): rho_ee(tau | g) / rho_ee(ss).
double two_level_g2(double tau, double gamma, double rabi) {
  const double w = std::sqrt(rabi * rabi - gamma * gamma / 16.0);
  const double a = 0.75 * gamma;
  return 1.0 - std::exp(-a * tau) * (std::cos(w * tau) + a / w * std::sin(w * tau));
}

DensityMatrix random_state(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> g;
  Operator a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(g(gen), g(gen));
  Operator rho = a * a.adjoint();
  rho /= rho.trace();
  return detail::finish(rho);
}

MasterEquation ca40_model(double s, double delta) {
  const ExperimentConfig c;
  const auto scheme = build_ca40_scheme(ca40_default_config());
  return master_equation(scheme, experiment_drives(c, scheme, s, delta));
}

TEST(LindbladRhs, GroundStateWithoutDrivesIsStationary) {
  const auto me = master_equation(build_ca40_scheme(ca40_default_config()), {});
  EXPECT_EQ(lindblad_rhs(DensityMatrix::pure(5, 0), me).norm(), 0.0);
}

TEST(LindbladRhs, PureDecayOfP12) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  const auto me = master_equation(scheme, {});
  const Operator d = lindblad_rhs(DensityMatrix::pure(5, index_of(Level::P12)), me);
  EXPECT_NEAR(d(1, 1).real(), -kGamma, 1e-6);
  EXPECT_NEAR(d(0, 0).real(), kGamma * 0.93565, 1e-6);
  EXPECT_NEAR(d(3, 3).real(), kGamma * 0.06435, 1e-6);
  Operator off = d;
  off.diagonal().setZero();
  EXPECT_EQ(off.norm(), 0.0);
}

TEST(LindbladRhs, RandomStatesTraceless) {
  std::mt19937_64 gen(11);
  const auto me = ca40_model(1.0, mhz(-6));
  for (int k = 0; k < 50; ++k) {
    const Operator d = lindblad_rhs(random_state(gen, 5), me);
    EXPECT_LT(std::abs(d.trace()), 1e-12 * me.rate_scale());
  }
}

TEST(Evolve, ZeroTimeReturnsInitialState) {
  const auto me = two_level_system(kGamma, rabi_from_saturation(1, kGamma), 0);
  const auto rho0 = DensityMatrix::pure(2, 0);
  EXPECT_EQ((evolve(rho0, me, 0.0).matrix() - rho0.matrix()).norm(), 0.0);
}

TEST(Evolve, TwoLevelRelaxesToBlochSteadyStateAndConservesTrace) {
  const auto me = two_level_system(kGamma, rabi_from_saturation(1, kGamma), 0);
  std::vector<double> times;
  for (int k = 1; k <= 60; ++k) times.push_back(k * 1e-9);
  const auto states = evolve_sampled(DensityMatrix::pure(2, 0), me, times);
  for (const auto& s : states) {
    EXPECT_LT(std::abs(s.matrix().trace() - 1.0), 1e-9);
    EXPECT_GT(s.min_eigenvalue(), -1e-8);
  }
  EXPECT_NEAR(states.back().population(1), 0.25, 1e-6);
}

TEST(Evolve, RejectsBadArguments) {
  const auto me = two_level_system(kGamma, 0, 0);
  EXPECT_THROW(evolve(DensityMatrix::pure(2, 0), me, -1.0), InvalidArgument);
  EXPECT_THROW(evolve(DensityMatrix::pure(2, 0), me, 1e-9, 0.1), InvalidArgument);
}

TEST(Evolve, PositivityAlongRandomFiveLevelTrajectories) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 3.0), d(-40, 40);
  for (int k = 0; k < 5; ++k) {
    const auto me = ca40_model(u(gen), mhz(d(gen)));
    std::vector<double> times{5e-9, 20e-9, 80e-9, 300e-9};
    for (const auto& s : evolve_sampled(random_state(gen, 5), me, times, 1e-9)) {
      EXPECT_GT(s.min_eigenvalue(), -1e-8);
    }
  }
}

TEST(SteadyState, TwoLevelBlochFormula) {
  for (auto [s, delta] : {std::pair{1.0, 0.0}, {1.3, -0.5 * kGamma}, {0.2, mhz(30)}}) {
    const auto ss = steady_state(two_level_system(kGamma, rabi_from_saturation(s, kGamma), delta));
    EXPECT_NEAR(ss.population(1), bloch_pe(s, delta, kGamma), 1e-10);
  }
  const auto ss = steady_state(two_level_system(kGamma, rabi_from_saturation(1.3, kGamma), -0.5 * kGamma));
  EXPECT_NEAR(ss.population(1), 0.1970, 5e-5);
}

TEST(SteadyState, UndrivenFiveLevelIsDegenerate) {
  const auto me = master_equation(build_ca40_scheme(ca40_default_config()), {});
  try {
    steady_state(me);
    FAIL() << "expected DegenerateSteadyState";
  } catch (const DegenerateSteadyState& e) {
    EXPECT_GE(e.closed_sets().size(), 2u);
  }
}

TEST(SteadyState, Ca40DrivesUniqueAndFixedPoint) {
  const auto me = ca40_model(1.3, 0.0);
  const auto ss = steady_state(me);
  EXPECT_LT(lindblad_rhs(ss, me).cwiseAbs().maxCoeff(), 1e-10 * me.rate_scale());
  const auto later = evolve(ss, me, 10.0 / kGamma);
  EXPECT_LT((later.matrix() - ss.matrix()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ScatteringRate, ProductAndLinearity) {
  const Jump j{1, 0, mhz(20.7), "e->g"};
  Operator m = Operator::Zero(2, 2);
  m(0, 0) = 0.75;
  m(1, 1) = 0.25;
  EXPECT_NEAR(scattering_rate(DensityMatrix(m), j), 0.25 * mhz(20.7), 1e-3);
  EXPECT_NEAR(0.25 * mhz(20.7), 3.25e7, 0.01e7);
  EXPECT_EQ(scattering_rate(DensityMatrix::pure(2, 0), j), 0.0);
  Operator m2 = Operator::Zero(2, 2);
  m2(0, 0) = 0.5;
  m2(1, 1) = 0.5;
  EXPECT_NEAR(scattering_rate(DensityMatrix(m2), j), 2 * scattering_rate(DensityMatrix(m), j), 1e-3);
}

TEST(G2Regression, TwoLevelClosedForm) {
  const double rabi = rabi_from_saturation(1.0, kGamma);
  const auto me = two_level_system(kGamma, rabi, 0.0);
  std::vector<double> tau;
  for (int k = 0; k <= 400; ++k) tau.push_back(k * (20.0 / kGamma) / 400);
  const auto g = g2_regression(me, 0, tau);
  EXPECT_EQ(g.values.front(), 0.0);
  double worst = 0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    worst = std::max(worst, std::abs(g.values[k] - two_level_g2(tau[k], kGamma, rabi)));
  }
  EXPECT_LT(worst, 1e-4);
  EXPECT_NEAR(g.values.back(), 1.0, 0.02);
}

TEST(G2Regression, CorrelationDriveAntibunchedAndRelaxesToOne) {
  const auto me = ca40_model(1.3 * 0.16 / 0.39, mhz(-6));
  std::vector<double> tau;
  for (int k = 0; k <= 300; ++k) tau.push_back(k * 1e-9);
  const auto g = g2_regression(me, signal_jump(me), tau);
  EXPECT_LT(std::abs(g.values.front()), 1e-9);
  EXPECT_NEAR(g.values.back(), 1.0, 0.02);
  for (double v : g.values) EXPECT_GT(v, -1e-9);
}

TEST(G2Regression, UnpopulatedUpperLevelIsAnError) {
  const auto me = two_level_system(kGamma, 0.0, 0.0);
  const double tau[] = {0.0};
  EXPECT_THROW(g2_regression(me, 0, tau), InvalidArgument);
}

}  // namespace
