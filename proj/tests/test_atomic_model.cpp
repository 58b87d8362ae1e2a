#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ionlight/atomic_model.hpp"

namespace {

using namespace ionlight;
using constants::mhz;

TEST(LevelScheme, DefaultChannelsCarryLinewidthTimesBranching) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  EXPECT_EQ(scheme.decays().size(), 5u);
  const auto& c = scheme.require_channel(Level::P12, Level::S12);
  EXPECT_NEAR(c.rate, mhz(22.3) * 0.93565, 1e-6);
  EXPECT_NEAR(scheme.total_decay_rate(Level::P12), mhz(22.3), 1e-6);
  EXPECT_NEAR(c.wavelength, 396.959e-9, 1e-15);
  for (const auto& d : scheme.decays()) {
    EXPECT_GT(d.rate, 0.0);
    EXPECT_NE(d.upper, d.lower);
  }
}

TEST(LevelScheme, DegenerateBranchingDropsChannel) {
  auto cfg = ca40_default_config();
  for (auto& b : cfg.branchings) {
    if (b.upper == Level::P12) b.fraction = b.lower == Level::S12 ? 1.0 : 0.0;
  }
  const auto scheme = build_ca40_scheme(cfg);
  EXPECT_FALSE(scheme.channel(Level::P12, Level::D32).has_value());
  EXPECT_NEAR(scheme.require_channel(Level::P12, Level::S12).rate, mhz(22.3), 1e-6);
}

TEST(LevelScheme, RejectsBranchingsNotSummingToOne) {
  auto cfg = ca40_default_config();
  for (auto& b : cfg.branchings) {
    if (b.upper == Level::P12) b.fraction = b.lower == Level::S12 ? 0.9 : 0.2;
  }
  EXPECT_THROW(build_ca40_scheme(cfg), ConfigError);
}

TEST(LevelScheme, RatesIndependentOfBranchingOrder) {
  auto cfg = ca40_default_config();
  const auto a = build_ca40_scheme(cfg);
  std::reverse(cfg.branchings.begin(), cfg.branchings.end());
  const auto b = build_ca40_scheme(cfg);
  for (const auto& d : a.decays()) {
    EXPECT_DOUBLE_EQ(b.require_channel(d.upper, d.lower).rate, d.rate);
  }
}

TEST(AtomConfig, ParsesKeysAndRejectsUnknown) {
  const auto kv = KeyValueFile::parse("linewidth_P12_MHz = 20\nmass_u = 40\n", "t.conf");
  const auto cfg = atom_config_from(kv);
  EXPECT_NEAR(cfg.linewidths.at(Level::P12), mhz(20.0), 1e-9);
  EXPECT_NEAR(cfg.mass, 40 * constants::atomic_mass_unit, 1e-35);
  EXPECT_THROW(atom_config_from(KeyValueFile::parse("linewidth_P21_MHz = 20\n")), ConfigError);
  EXPECT_THROW(atom_config_from(KeyValueFile::parse("branching_P12_S12 = 0.5\n")), ConfigError);
}

TEST(Saturation, ConversionIdentities) {
  const double g = mhz(22.3);
  EXPECT_DOUBLE_EQ(rabi_from_saturation(2.0, g), g);
  EXPECT_EQ(rabi_from_saturation(0.0, g), 0.0);
  // Independent arithmetic: 22.3 * sqrt(0.65) = 17.9785...
  EXPECT_NEAR(rabi_from_saturation(1.3, g) / constants::two_pi / 1e6, 17.98, 0.005);
  EXPECT_NEAR(rabi_from_saturation(4 * 0.7, g), 2 * rabi_from_saturation(0.7, g), 1e-6);
  EXPECT_NEAR(saturation_from_rabi(rabi_from_saturation(0.37, g), g), 0.37, 1e-12);
  double last = -1;
  for (double s = 0; s < 10; s += 0.25) {
    const double r = rabi_from_saturation(s, g);
    EXPECT_GT(r, last);
    last = r;
  }
  EXPECT_THROW(rabi_from_saturation(-1, g), InvalidArgument);
}

TEST(Hamiltonian, NoDrivesIsZero) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  EXPECT_EQ(hamiltonian(scheme, {}).norm(), 0.0);
}

TEST(Hamiltonian, SingleDriveTextbookBlock) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  const double om = mhz(10), d = mhz(-5);
  const Operator h = hamiltonian(scheme, {{Level::S12, Level::P12, om, d}});
  const auto s = index_of(Level::S12), p = index_of(Level::P12);
  EXPECT_DOUBLE_EQ(h(p, s).real(), om / 2);
  EXPECT_DOUBLE_EQ(h(s, p).real(), om / 2);
  EXPECT_DOUBLE_EQ(h(p, p).real() - h(s, s).real(), -d);
  Operator rest = h;
  rest(p, s) = rest(s, p) = rest(p, p) = rest(s, s) = 0.0;
  EXPECT_EQ(rest.norm(), 0.0);
}

TEST(Hamiltonian, ThreeDrivesHermitianWithSharedFrame) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  const Operator h = hamiltonian(scheme, {{Level::S12, Level::P12, mhz(15), mhz(-6)},
                                          {Level::D32, Level::P32, mhz(12), mhz(-10)},
                                          {Level::D52, Level::P32, mhz(30), mhz(10)}});
  EXPECT_EQ((h - h.adjoint()).norm(), 0.0);
  const auto p32 = index_of(Level::P32), d32 = index_of(Level::D32), d52 = index_of(Level::D52);
  EXPECT_NEAR(h(p32, p32).real() - h(d32, d32).real(), mhz(10), 1e-6);
  EXPECT_NEAR(h(p32, p32).real() - h(d52, d52).real(), -mhz(10), 1e-6);
  EXPECT_NE(h(p32, d32), Complex(0.0));
  EXPECT_NE(h(p32, d52), Complex(0.0));
}

TEST(Hamiltonian, RejectsDuplicateAndLoop) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  EXPECT_THROW(hamiltonian(scheme, {{Level::S12, Level::P12, 1, 0}, {Level::P12, Level::S12, 1, 0}}),
               InvalidArgument);
  EXPECT_THROW(hamiltonian(scheme, {{Level::S12, Level::P12, 1, 0},
                                    {Level::S12, Level::P32, 1, 0},
                                    {Level::D32, Level::P12, 1, 0},
                                    {Level::D32, Level::P32, 1, 0}}),
               InvalidArgument);
}

TEST(Hamiltonian, RandomDrivesStayHermitian) {
  const auto scheme = build_ca40_scheme(ca40_default_config());
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int k = 0; k < 200; ++k) {
    const Operator h = hamiltonian(scheme, {{Level::S12, Level::P12, mhz(std::abs(u(gen))), mhz(u(gen))},
                                            {Level::D32, Level::P12, mhz(std::abs(u(gen))), mhz(u(gen))},
                                            {Level::D32, Level::P32, mhz(std::abs(u(gen))), mhz(u(gen))},
                                            {Level::D52, Level::P32, mhz(std::abs(u(gen))), mhz(u(gen))}});
    ASSERT_EQ((h - h.adjoint()).norm(), 0.0);
  }
}

}  // namespace
