#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "kfp/cutoffs.hpp"
#include "kfp/kernel.hpp"

using namespace kfp;

TEST_SUITE("cutoffs") {
  TEST_CASE("construction: psi_theta(0) = 0, psi1 = C1 g_1, pure-power branch") {
    for (double s : {0.2, 0.4, 0.8}) {
      const auto fam = build_cutoff_family(s, s < 0.5 ? 1 : 2);
      CHECK(fam.psi_theta(0.3, 0.0) == 0.0);
      for (double r : {1.5, 2.0, 7.0}) CHECK(fam.psi1(r) == doctest::Approx(fam.C1 * fam.g(r - 1)));
    }
    const auto f4 = build_cutoff_family(0.4, 1);
    CHECK(f4.g(4.0) == doctest::Approx(std::pow(2.0, 0.4)).epsilon(1e-14));
    CHECK(f4.g(4.0) == doctest::Approx(1.3195).epsilon(1e-4));
    for (double r = 0; r <= 4.0; r += 0.01) CHECK(f4.psi_theta(0.25, r) == 0.0);
  }

  TEST_CASE("junction: g(0) = g'(0) = 0, monotone, below x^{s/2}, C^2 at 1") {
    for (double s : {0.1, 0.3, 0.6, 0.9}) {
      const auto fam = build_cutoff_family(s, s < 0.5 ? 1 : 2);
      CHECK(fam.g(0) == 0.0);
      CHECK(fam.g_prime(0) == 0.0);
      for (int i = 1; i <= 1000; ++i) {
        const double x = i / 1000.0;
        CHECK(fam.g_prime(x) >= -1e-14);
        CHECK(fam.g(x) <= std::pow(x, s / 2) + 1e-14);
      }
      CHECK(fam.g(1 - 1e-9) == doctest::Approx(fam.g(1 + 1e-9)).epsilon(1e-7));
      CHECK(fam.g_prime(1 - 1e-9) == doctest::Approx(fam.g_prime(1 + 1e-9)).epsilon(1e-6));
      CHECK(fam.g_second(1 - 1e-9) == doctest::Approx(fam.g_second(1 + 1e-9)).epsilon(1e-5));
    }
  }

  TEST_CASE("rejects s outside (0,1) and 2s >= n") {
    CHECK_THROWS_AS(build_cutoff_family(0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_cutoff_family(1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(build_cutoff_family(0.6, 1), std::invalid_argument);
  }

  TEST_CASE("properties (ii)-(iv) on 10^4 sampled radii, and (iv) at |v| = 2") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 1);
    for (double s : {0.2, 0.3, 0.45}) {
      const auto fam = build_cutoff_family(s, 1);
      for (int i = 0; i < 10000; ++i) {
        const double r = 200 * U(rng);
        const double a = 0.01 + 0.98 * U(rng), b = 0.01 + 0.98 * U(rng);
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (r <= 1 / lo) CHECK(fam.psi_theta(lo, r) == 0.0);
        CHECK(fam.psi_theta(lo, r) <= fam.psi_theta(hi, r));
        CHECK(fam.psi_theta(hi, r) <= fam.psi1(r));
        if (r >= 2) CHECK(1 + fam.psi_theta(lo, r) <= fam.psi1(r));
      }
      for (double th : {0.5, 0.9, 0.99}) CHECK(1 + fam.psi_theta(th, 2.0) <= fam.psi1(2.0));
    }
  }

  TEST_CASE("g_r decreasing in r with r-independent derivative bounds") {
    const auto fam = build_cutoff_family(0.3, 1);
    double prev_sup2 = -1;
    for (double r : {1.0, 2.0, 5.0}) {
      double sup2 = 0;
      for (double x = r; x < r + 10; x += 1e-3) {
        CHECK(fam.g_r(r + 0.5, x) <= fam.g_r(r, x));
        sup2 = std::max(sup2, std::abs(fam.g_second(x - r)));
      }
      if (prev_sup2 >= 0) CHECK(sup2 == doctest::Approx(prev_sup2).epsilon(1e-6));
      prev_sup2 = sup2;
    }
  }

  TEST_CASE("check_properties: all five properties and the theta^{3s/2} exponent at s = 0.3") {
    const auto fam = build_cutoff_family(0.3, 1);
    std::vector<double> radii;
    for (int i = 0; i <= 12; ++i) radii.push_back(0.25 * i);
    for (double r : {4.0, 10.0, 40.0}) radii.push_back(r);
    const auto rep = check_properties(fam, Kernel::homogeneous(1, 0.3, 2.0), {1.0 / 8, 1.0 / 16, 1.0 / 32}, radii);
    REQUIRE(rep.properties.size() == 5);
    CHECK(rep.all_passed());
    CHECK(rep.fitted_exponent >= 0.45 - 0.15);
    CHECK(rep.C_psi > 0);
  }

  TEST_CASE("epsilon0: certified, holds at half, fails just above; closed-form sufficient scale") {
    const auto fam = build_cutoff_family(0.3, 1);
    for (double th : {0.125, 0.25}) {
      const auto e = epsilon0(fam, th);
      REQUIRE(e.certified);
      CHECK(scaled_inequality_holds(fam, th, 0.5 * e.epsilon0));
      if (e.epsilon0 < 0.5) CHECK_FALSE(scaled_inequality_holds(fam, th, 1.01 * e.epsilon0));
      // at |v| = 1 the inequality holds once 1/eps >= 1/theta + 2^{2/s}
      const double eps = 1 / (1 / th + std::pow(2.0, 2 / 0.3));
      CHECK(fam.psi_theta(th, 1 / eps) >= 2 * fam.psi_theta(th, 1.0) + 2 - 1e-12);
    }
  }

  TEST_CASE("level cutoffs telescope from psi1 to psi1 + 1/2") {
    const auto fam = build_cutoff_family(0.3, 1);
    for (double r : {0.0, 1.5, 3.0, 20.0}) {
      const Vec v{r, 0};
      CHECK(level_cutoff(fam, 0)(v) == doctest::Approx(fam.psi1(r)));
      CHECK(level_cutoff(fam, 60)(v) == doctest::Approx(fam.psi1(r) + 0.5));
      for (int k = 1; k < 20; ++k)
        CHECK(level_cutoff(fam, k)(v) - level_cutoff(fam, k - 1)(v) == doctest::Approx(std::ldexp(1.0, -k - 1)));
    }
  }

  TEST_CASE("blunt cutoff F: -1 on B_2, 0 outside B_3, increasing, bounded L F") {
    const auto fam = build_cutoff_family(0.3, 1);
    double prev = -2;
    for (double r = 0; r < 4; r += 0.01) {
      if (r <= 2) CHECK(fam.F(r) == -1.0);
      if (r >= 3) CHECK(fam.F(r) == 0.0);
      CHECK(fam.F(r) >= prev);
      prev = fam.F(r);
    }
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0);
    double sup = 0;
    for (double r = 0; r < 6; r += 0.25)
      sup = std::max(sup, std::abs(apply_L_pointwise(k, [&](const Vec& w) { return fam.F(std::abs(w[0])); }, 0, {}, {r, 0}, {2.0, 3.0})));
    CHECK(std::isfinite(sup));
    CHECK(sup < 10);
  }

  TEST_CASE("indicator bound 1{f_k > 0} <= 2^{k+1} f_{k-1} on random values") {
    const auto fam = build_cutoff_family(0.3, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 3);
    for (int i = 0; i < 20000; ++i) {
      const double r = 4 * std::abs(U(rng)), f = U(rng);
      for (int k = 1; k < 30; ++k) {
        const double fk = std::max(0.0, f - fam.psi_k(k, r));
        const double fk1 = std::max(0.0, f - fam.psi_k(k - 1, r));
        CHECK((fk > 0 ? 1.0 : 0.0) <= std::ldexp(fk1, k + 1));
      }
    }
  }
}
