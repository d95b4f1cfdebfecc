#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>

#include "vrjp/phase_diagram.hpp"

using namespace vrjp;

namespace {

// m K_0(w) / K_{1/2}(w) = 1 in extended precision.
long double reference_critical_w(long double m) {
  auto g = [m](long double w) {
    return m * boost::math::cyl_bessel_k(0.0L, w) / boost::math::cyl_bessel_k(0.5L, w) - 1.0L;
  };
  boost::math::tools::eps_tolerance<long double> tol(60);
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, 1e-8L, 50.0L, tol, iters);
  return (r.first + r.second) / 2;
}

}  // namespace

TEST(CriticalW, MatchesExtendedPrecisionOracle) {
  for (double m : {1.2, 1.5, 2.0, 3.0, 5.0, 10.0}) {
    const double want = static_cast<double>(reference_critical_w(m));
    EXPECT_NEAR(critical_w(m) / want, 1.0, 1e-11) << m;
  }
  EXPECT_NEAR(critical_w(2.0), 0.0265401597367615, 1e-14);
}

TEST(CriticalW, RejectsNonBranching) {
  EXPECT_THROW(critical_w(1.0), DomainError);
  EXPECT_THROW(critical_w(0.5), DomainError);
  EXPECT_THROW(classify(1.0, 0.1), DomainError);
  EXPECT_THROW(classify(2.0, -0.1), DomainError);
}

TEST(TStar, ValuesAndRegimes) {
  const double wc = critical_w(2.0);
  EXPECT_NEAR(t_star(2.0, wc), 0.5, 1e-8);
  EXPECT_NEAR(t_star(2.0, 0.5 * wc), 0.44998, 5e-5);
  EXPECT_NEAR(tau(2.0, 0.5 * wc), 0.40039, 5e-5);
  EXPECT_NEAR(tau(2.0, wc), 0.0, 1e-8);
  EXPECT_LT(tau(2.0, 2.0 * wc), 0.0);
  for (double rel : {0.1, 0.5, 0.9}) {
    const double t = t_star(3.0, rel * critical_w(3.0));
    EXPECT_GT(t, 0.0);
    EXPECT_LT(t, 0.5);
    EXPECT_GT(tau(3.0, rel * critical_w(3.0)), 0.0);
  }
}

TEST(TStar, ResidualSmall) {
  for (double rel : {0.3, 0.8, 1.5}) {
    const double w = rel * critical_w(2.0);
    const LaplaceTransformFn f(2.0, w);
    EXPECT_LT(std::abs(tstar_residual(f, t_star(2.0, w))), 1e-10);
  }
}

TEST(Alpha, KnownValueAndSlope) {
  EXPECT_NEAR(alpha(2.0), 19.5913, 1e-3);
  for (double m : {1.5, 2.0, 4.0}) {
    const double wc = critical_w(m);
    const double h = 1e-4 * wc;
    const double slope = (tau(m, wc - h) - tau(m, wc + h)) / (2 * h);
    EXPECT_NEAR(slope / alpha(m), 1.0, 1e-3) << m;
  }
}

TEST(CriticalExponents, KnownValuesAndRoutes) {
  const auto ce = critical_exponents(2.0);
  EXPECT_NEAR(ce.sigma2, 97.7108, 1e-3);
  EXPECT_NEAR(ce.rho_c, 5.65476, 1e-4);
  const double e = ig_log_power_moment(critical_w(2.0), 0.5, 2);
  EXPECT_NEAR(ce.sigma2 / (32.0 * e), 1.0, 1e-10);
  const LaplaceTransformFn f(2.0, critical_w(2.0));
  EXPECT_NEAR(ce.sigma2 / (16.0 * f(0.5).d2f), 1.0, 1e-8);
}

TEST(Classify, Regimes) {
  const double wc = critical_w(2.0);
  const auto c = classify(2.0, wc);
  EXPECT_EQ(c.regime, Regime::Critical);
  ASSERT_TRUE(c.sigma2.has_value());
  ASSERT_TRUE(c.rho_c.has_value());
  const auto r = classify(2.0, 0.5 * wc);
  EXPECT_EQ(r.regime, Regime::Recurrent);
  EXPECT_FALSE(r.sigma2.has_value());
  EXPECT_GT(r.tau, 0.0);
  EXPECT_EQ(classify(2.0, 2.0 * wc).regime, Regime::Transient);
}

TEST(LaplaceTransform, ConvexAndFlatAtHalf) {
  for (double w : {0.01, 0.3, 2.0}) {
    const LaplaceTransformFn f(2.0, w);
    EXPECT_NEAR(f(0.5).df, 0.0, 1e-9);
    for (int k = 1; k <= 20; ++k) EXPECT_GT(f(0.1 * k).d2f, 0.0);
  }
}

TEST(BesselRatio, InequalityOnGrid) {
  for (int k = 0; k <= 200; ++k) {
    const double w = 1e-3 * std::pow(1e5, k / 200.0);
    EXPECT_GT(1.0 + 1.0 / (2.0 * w), bessel_k(1.0, w) / bessel_k(0.0, w)) << w;
  }
}
