#include <doctest.h>

#include <stdexcept>

#include "kfp/conegeom.hpp"

using namespace kfp;

namespace {

GridSet slab(double a, double b) {
  auto S = GridSet::empty(1, 700, 60);
  S.add_slab(a, b);
  return S;
}

}  // namespace

TEST_SUITE("conegeom") {
  TEST_CASE("segment measure: empty set, full set, and a slab crossing") {
    const Vec x0{0.5, 0}, xb{1.5, 0};
    const double t0 = -4.5, tb = -1.0;
    const double speed = std::sqrt(1 + std::pow((xb[0] - x0[0]) / (tb - t0), 2));
    CHECK(segment_measure(t0, x0, tb, xb, GridSet::empty(1, 700, 60)) == 0.0);
    auto full = GridSet::empty(1, 700, 60);
    full.fill();
    CHECK(segment_measure(t0, x0, tb, xb, full) == doctest::Approx((tb - t0) * speed).epsilon(1e-9));
    CHECK(segment_measure(t0, x0, tb, xb, slab(-3.5, -3.0)) == doctest::Approx(0.5 * speed).epsilon(1e-9));
  }

  TEST_CASE("validate rejects misplaced vertices and bases") {
    auto p = slab_cone_problem(1, 0.4, 1);
    CHECK_NOTHROW(p.validate());
    auto q = p;
    q.t0 = -3;
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
    q = p;
    q.base.front().x_hi[0] = 3;
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
    q = p;
    q.mu = -1;
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  }

  TEST_CASE("mu = 0 passes trivially; small sample budgets are rejected") {
    auto p = slab_cone_problem(1, 0.4, 2);
    p.mu = 0;
    const auto r = cone_measure_check(p, 100000, 3, 1);
    CHECK(r.bound == 0.0);
    CHECK(r.verdict == ConeVerdict::Pass);
    CHECK_THROWS_AS(cone_measure_check(p, 99999, 3, 1), std::invalid_argument);
  }

  TEST_CASE("slab instances satisfy the hypothesis and the measure bound") {
    for (int n : {1, 2}) {
      const auto p = slab_cone_problem(n, 0.4, 11 + n);
      const auto r = cone_measure_check(p, 100000, 5, 1);
      CHECK(r.hypothesis.holds);
      CHECK(r.verdict == ConeVerdict::Pass);
      CHECK(r.slack > 1);
      CHECK(r.A_bound_holds);
    }
  }

  TEST_CASE("estimate is independent of the worker count") {
    const auto p = random_cone_problem(1, 21);
    const auto a = cone_measure_check(p, 100000, 9, 1);
    const auto b = cone_measure_check(p, 100000, 9, 3);
    CHECK(a.measure == b.measure);
  }

  TEST_CASE("n = 1 cross sections are affine in t") {
    const auto fit = fit_cross_section(slab_cone_problem(1, 0.4, 4));
    CHECK(fit.r2 > 0.9999);
    CHECK(fit.slope > 0);
  }

  TEST_CASE("random instances are valid and their hypothesis holds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
      for (int n : {1, 2}) {
        const auto p = random_cone_problem(n, seed);
        CHECK_NOTHROW(p.validate());
        CHECK(check_hypothesis(p, 500, seed).holds);
      }
  }
}
