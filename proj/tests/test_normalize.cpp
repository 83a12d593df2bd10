#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "profilelab/normalize.hpp"
#include "profilelab/oracle.hpp"

using namespace profilelab;

TEST(Normalize, LevelIndex) {
  EXPECT_EQ(l_n({2.0}, static_cast<std::int64_t>(std::llround(std::exp(5.0))), 2), Level{9});  // 148 < e^5
  EXPECT_EQ(l_n({2.0}, 149, 2), Level{10});
  EXPECT_EQ(l_n({1.5}, 100, 2), Level{6});
  EXPECT_EQ(l_n({-0.5}, 100, 2), Level{-3});
  EXPECT_EQ(l_n({1.0, 0.5}, 1000, 3), (Level{3, 1}));
  EXPECT_THROW(l_n({1.0}, 1, 2), DomainError);
}

TEST(Normalize, LogGamma) {
  EXPECT_EQ(log_gamma(1.0), 0.0);
  EXPECT_EQ(log_gamma(2.0), 0.0);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-15);
  EXPECT_NEAR(log_gamma(11.0), std::log(3628800.0), 1e-13 * std::log(3628800.0));
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
}

TEST(Normalize, BstAtThetaZero) {
  const auto m = preset("bst");
  for (std::int64_t n : {1000, 1000000}) {
    const auto a = a_c(m, n, {2.0});
    const double ln = std::log(static_cast<double>(n));
    EXPECT_NEAR(a.log_value, ln - 0.5 * std::log(4 * std::numbers::pi * ln), 1e-10);
    EXPECT_FALSE(a.near_boundary);
  }
  EXPECT_NEAR(a_c(m, 1000000, {2.0}).log_value, 11.2371024772416233, 1e-10);
  const auto a = a_c(m, 1000000, {1.2});
  EXPECT_EQ(a.level, Level{16});
  EXPECT_NEAR(a.theta[0], -std::log(0.6), 1e-10);
  EXPECT_NEAR(a.log_value, 8.69869091301236615, 1e-9);
}

TEST(Normalize, OutsideRangeIsRejected) {
  EXPECT_THROW(a_c(preset("bst"), 1000, {4.5}), DomainError);
  EXPECT_THROW(a_c(preset("bst"), 1000, {0.2}), DomainError);
  EXPECT_THROW(a_c(preset("rrt"), 1000, {-0.1}), DomainError);
}

TEST(Normalize, RrtAtThetaZero) {
  // l / log n = 1 gives theta = 0 and det = 1.
  const auto m = preset("rrt");
  const std::int64_t l = 10;
  const auto n = static_cast<std::int64_t>(std::llround(std::exp(10.0)));
  const auto a = a_bar(m, n, {l});
  const double log_n = std::log(static_cast<double>(n));
  const double c = l / log_n;
  const double theta = -std::log(c);
  const double expect = c * log_n + theta * l - 0.5 * std::log(2 * std::numbers::pi * log_n * c) - std::lgamma(1.0 + c);
  EXPECT_NEAR(a.log_value, expect, 1e-10);
  EXPECT_NEAR(a.theta[0], 0.0, 1e-4);
}

TEST(Normalize, ABarMatchesACWhenLevelIsExact) {
  const auto m = preset("port");
  const std::int64_t n = 50000;
  const Level l{9 + m.root_level()[0]};
  const double c = 2.0 * 9.0 / std::log(static_cast<double>(n));
  const auto bar = a_bar(m, n, l);
  const auto ac = a_c(m, n, {c * (1 + 1e-12)});
  EXPECT_EQ(ac.level, l);
  EXPECT_NEAR(bar.log_value, ac.log_value, 1e-8);
}

TEST(Normalize, ABarAndACDifferByTheFloorOnly) {
  const auto m = preset("lmr");
  const std::int64_t n = 100000;
  const double c = 0.83;
  const auto ac = a_c(m, n, {c});
  const auto bar = a_bar(m, n, ac.level);
  EXPECT_LE(std::abs(bar.log_value - ac.log_value), std::abs(ac.theta[0]) + 0.5);
}

TEST(Normalize, AHatAgreesWithABar) {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    if (m.d != 1) continue;
    const auto dom = range_d1(m);
    const std::int64_t n = 200000;
    const double scale = std::log(static_cast<double>(n)) / (m.b - 1.0);
    for (double f : {0.2, 0.5, 0.8}) {
      const double c = dom.c_low + f * (dom.c_high - dom.c_low);
      const Level l{static_cast<std::int64_t>(std::round(c * scale))};
      double ah = 0.0, ab = 0.0;
      try {
        ah = a_hat_d1(m, n, l[0]);
        ab = a_bar(m, n, l).log_value;
      } catch (const DomainError&) {
        continue;
      }
      EXPECT_NEAR(ah, ab, 1e-12 * std::max(1.0, std::abs(ab)) * 50) << name << " l=" << l[0];
    }
  }
}

TEST(Normalize, AHatRrtClosedForm) {
  const auto m = preset("rrt");
  const std::int64_t n = 100000;
  EXPECT_NEAR(a_hat_d1(m, n, 13), 9.15951027805076853, 1e-10);
  for (std::int64_t l : {5, 11, 20}) {
    const double ln = std::log(static_cast<double>(n));
    const double r = l / ln;
    const double paper = r * ln - std::lgamma(1 + r) - l * std::log(r) - 0.5 * std::log(2 * std::numbers::pi * l);
    EXPECT_NEAR(a_hat_d1(m, n, l), paper, 1e-10);
  }
}

TEST(Normalize, AHatRrtApproachesStirlingForm) {
  // B_l(n) = (log n)^l (e/l)^l / (Gamma(1+l/log n) sqrt(2 pi l)) equals A-hat identically
  // after Stirling; the relative difference is exactly zero up to rounding.
  const auto m = preset("rrt");
  for (std::int64_t n : {1000, 1000000}) {
    const double ln = std::log(static_cast<double>(n));
    const std::int64_t l = static_cast<std::int64_t>(ln);
    const double logb = l * std::log(ln) + l * (1 - std::log(static_cast<double>(l))) - std::lgamma(1 + l / ln) -
                        0.5 * std::log(2 * std::numbers::pi * l);
    EXPECT_NEAR(a_hat_d1(m, n, l) - logb, 0.0, 1e-9);
  }
}

TEST(Normalize, AHatPort) {
  // beta = 1: z = 2l/log n, bEz^Z = 2 + z, E Z^2 z^Z = z/3.
  const auto m = preset("port");
  const std::int64_t n = 300000, l = 8;
  const double ln = std::log(static_cast<double>(n));
  const double z = 2.0 * l / ln;
  const double mm = 2.0 + z;
  const double expect = (mm - 1) / 2 * ln - l * std::log(z) - 0.5 * std::log(2 * std::numbers::pi * ln * 1.5 * z / 3) +
                        std::lgamma(0.5) - std::lgamma(mm / 2);
  EXPECT_NEAR(a_hat_d1(m, n, l + m.root_level()[0]), expect, 1e-10);
  EXPECT_THROW(a_hat_d1(preset("combo2d"), n, 1), DomainError);
}

TEST(Normalize, RootShiftRelabelsLevels) {
  auto shifted = preset("port");
  auto plain = shifted;
  plain.root_shift.clear();
  const std::int64_t n = 40000;
  EXPECT_EQ(a_bar(shifted, n, {8}).log_value, a_bar(plain, n, {7}).log_value);
  const auto s = a_c(shifted, n, {1.4}), p = a_c(plain, n, {1.4});
  EXPECT_EQ(s.level[0], p.level[0] + 1);
  EXPECT_EQ(s.log_value, p.log_value);
  EXPECT_EQ(a_hat_d1(shifted, n, 8), a_hat_d1(plain, n, 7));
}

TEST(Normalize, ContinuityInC) {
  const auto m = preset("bst");
  const std::int64_t n = 10000;
  double prev = a_c(m, n, {1.0}).log_value;
  Level prev_level = a_c(m, n, {1.0}).level;
  for (double c = 1.01; c < 3.5; c += 0.01) {
    const auto a = a_c(m, n, {c});
    if (a.level == prev_level) {
      EXPECT_LT(std::abs(a.log_value - prev), std::log(1.1)) << c;
    }
    prev = a.log_value;
    prev_level = a.level;
  }
}

TEST(Normalize, AlwaysPositiveAndFinite) {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    const auto c = spectral_point(m, std::vector<double>(static_cast<std::size_t>(m.d), 0.1)).gradA;
    for (std::int64_t n : {10, 10000, 10000000}) {
      const auto a = a_c(m, n, c);
      EXPECT_TRUE(std::isfinite(a.log_value)) << name;
      EXPECT_GT(a.value(), 0.0) << name;
    }
  }
}

TEST(Normalize, NearBoundaryFlag) {
  const auto m = preset("bst");
  const auto dom = range_d1(m);
  const auto a = a_c(m, 1000, {dom.c_high - 1e-9});
  EXPECT_TRUE(a.near_boundary);
}

TEST(Normalize, PoissonCoefficientsClosedForms) {
  const double t = 1.5;
  const auto bst = poisson_profile_coeffs(preset("bst"), t, 20);
  const auto rrt = poisson_profile_coeffs(preset("rrt"), t, 20);
  for (int l = 0; l <= 20; ++l) {
    EXPECT_NEAR(bst[static_cast<std::size_t>(l)] / std::pow(2 * t, l), 1.0, 1e-10) << l;
    EXPECT_NEAR(rrt[static_cast<std::size_t>(l)] / (std::exp(t) * std::pow(t, l)), 1.0, 1e-10) << l;
  }
  EXPECT_THROW(poisson_profile_coeffs(preset("lmr"), t, 3), DomainError);
  EXPECT_THROW(poisson_profile_coeffs(preset("combo2d"), t, 3), DomainError);
  EXPECT_THROW(poisson_profile_coeffs(preset("bst"), -1.0, 3), DomainError);
}

TEST(Normalize, PoissonCoefficientsMatchFourierIntegral) {
  const double t = 5.0;
  for (const auto* name : {"bst", "rrt", "port", "lopsided", "colored"}) {
    const auto m = preset(name);
    const auto coeffs = poisson_profile_coeffs(m, t, 15);
    for (double theta : {-0.3, 0.0, 0.4}) {
      const double mm = spectral_point(m, {theta}).A + 1.0;
      double fact = 1.0;
      for (int l = 0; l <= 15; ++l) {
        if (l > 0) fact *= l;
        const double predicted =
            std::exp(-theta * l + t * (1 - mm) - t) * coeffs[static_cast<std::size_t>(l)] / fact;
        const double g = numeric_fourier_profile(m, t, {theta}, {l});
        EXPECT_NEAR(g, predicted, 1e-8) << name << " theta=" << theta << " l=" << l;
      }
    }
  }
}
