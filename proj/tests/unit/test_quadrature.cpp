#include <gtest/gtest.h>

#include <cmath>

#include "hapt/quadrature.hpp"
#include "hapt/special.hpp"

using namespace hapt;

TEST(Quadrature, ScalarIntegrals) {
  EXPECT_NEAR(std::exp(quad::integrate_log([](double x) { return -x; }, 0.0, 50.0)), 1.0 - std::exp(-50.0), 1e-12);
  // Beta(0.3, 2) kernel via the substitution x = s^(1/0.3).
  const double lv = quad::integrate_log([](double s) { return std::log1p(-std::pow(s, 1.0 / 0.3)) - std::log(0.3); },
                                        0.0, 1.0, {1e-12, 1000});
  EXPECT_NEAR(lv, log_beta(0.3, 2.0), 1e-10);
}

TEST(Quadrature, ExtremeScalesStayFinite) {
  const double lv = quad::integrate_log([](double x) { return -2000.0 - x * x; }, -10.0, 10.0);
  EXPECT_NEAR(lv, -2000.0 + 0.5 * std::log(M_PI), 1e-10);
}

TEST(Quadrature, VectorGroupsShareAbscissae) {
  quad::Integrator integ(2, 2);
  const std::array<double, 3> br{0.0, 0.5, 1.0};
  const auto res = integ.integrate(
      [](double x, std::span<double> ls, std::span<double> fac) {
        ls[0] = 0.0;
        fac[0] = 1.0;
        fac[1] = x;
        ls[1] = 500.0 + std::log(x + 1.0);
        fac[2] = 1.0;
        fac[3] = x * x;
      },
      br, {1e-12, 200});
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.log_value(0, 0), 0.0, 1e-13);
  EXPECT_NEAR(res.ratio(0, 1), 0.5, 1e-13);
  EXPECT_NEAR(res.log_value(1, 0), 500.0 + std::log(1.5), 1e-12);
  // int x^2 (x + 1) / int (x + 1) = (1/4 + 1/3) / 1.5
  EXPECT_NEAR(res.ratio(1, 1), (0.25 + 1.0 / 3.0) / 1.5, 1e-13);
}

TEST(Quadrature, BudgetExhaustionReportsFailure) {
  EXPECT_THROW(quad::integrate_log([](double x) { return std::sin(1000.0 * x) > 0 ? 0.0 : -1.0; }, 0.0, 1.0,
                                   {1e-14, 3}),
               QuadratureError);
}
