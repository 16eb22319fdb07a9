#include <doctest.h>

#include "helpers.hpp"
#include "kfp/diagnostics.hpp"

using namespace kfp;
using kfp::test::kPi;

namespace {

Field constant_field(const PhaseGrid& g, double value) {
  Field f(g);
  std::fill(f.data.begin(), f.data.end(), value);
  return f;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("exponents: closed forms at (1, 1/4, 30)") {
    const auto t = exponents(1, 0.25, 30);
    CHECK(t.r0 == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(t.p1 == doctest::Approx(1.0 / (0.5 - 1.0 / 5.0)));
    CHECK(t.p2 == doctest::Approx(1.0 / (0.5 - 0.25)));
    CHECK(t.beta == doctest::Approx(0.4));
    CHECK(t.alpha_dg2 == doctest::Approx(1.0 / 1.5));
    CHECK(t.theta_residual < 1e-12);
    CHECK(t.q > 2);
    CHECK(t.theta_star > 0);
    CHECK(t.theta_star < 1);
    CHECK(t.r_crit == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(recursion_gamma(t, t.r_crit) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gamma_crossing_bisection(1, 0.25) == doctest::Approx(t.r_crit).epsilon(1e-9));
    CHECK(t.r0 >= t.r_crit);
  }

  TEST_CASE("exponents: (2, 1/2, 100) gives p2 = 4") {
    const auto t = exponents(2, 0.5, 100);
    CHECK(t.p2 == doctest::Approx(4.0));
    CHECK(t.theta_residual < 1e-12);
  }

  TEST_CASE("exponents: rejects 2s >= n, s outside (0,1) and r <= 2") {
    CHECK_THROWS_AS(exponents(1, 0.5, 10), std::invalid_argument);
    CHECK_THROWS_AS(exponents(1, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(exponents(2, 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(exponents(1, 0.3, 2.0), std::invalid_argument);
  }

  TEST_CASE("recursion gamma is increasing in r and crosses 1 once") {
    for (double s : {0.1, 0.25, 0.4}) {
      const auto t = exponents(1, s, 10);
      double prev = recursion_gamma(t, 2.0001);
      CHECK(prev < 1);
      for (double r = 2.1; r < 1e4; r *= 1.1) {
        const double g = recursion_gamma(t, r);
        CHECK(g > prev);
        prev = g;
      }
      CHECK(prev > 1);
    }
  }

  TEST_CASE("energy_report: f <= psi everywhere is vacuous") {
    const auto g = make_grid(1, 8.0, 8.0, 16, 64, -2.0, 0.0, 5);
    const Field f = constant_field(g, 0.0);
    const RadialCutoff psi{[](double) { return 0.0; }, {}};
    const auto rep = energy_report(f, Kernel::homogeneous(1, 0.3, 2.0), psi, {}, Source{}, 0.0);
    CHECK(rep.vacuous);
    CHECK(rep.lhs_B == 0.0);
    CHECK(rep.rhs_total() == 0.0);
  }

  TEST_CASE("energy_report: f above psi beyond R raises a precondition error with a witness") {
    const auto g = make_grid(1, 8.0, 8.0, 16, 64, -2.0, 0.0, 5);
    const Field f = constant_field(g, 1.0);
    const RadialCutoff psi{[](double) { return 0.0; }, {}};
    try {
      energy_report(f, Kernel::homogeneous(1, 0.3, 2.0), psi, {}, Source{}, 0.0);
      FAIL("expected a precondition error");
    } catch (const PreconditionError& e) {
      CHECK(e.witness.find("v=") != std::string::npos);
    }
  }

  TEST_CASE("degiorgi_levels: zero field has E_k = 0 from the first level") {
    const auto g = make_grid(1, 8.0, 8.0, 16, 64, -2.0, 0.0, 9);
    const auto rep = degiorgi_levels(constant_field(g, 0.0), build_cutoff_family(0.3, 1), 10);
    CHECK(rep.E.size() == 11);
    for (double e : rep.E) CHECK(e == 0.0);
    CHECK(rep.monotone);
    CHECK(rep.first_below == 0);
    CHECK(rep.indicator_violations == 0);
  }

  TEST_CASE("degiorgi_levels: E_k decreases and the indicator bound holds for positive data") {
    const auto g = make_grid(1, 8.0, 8.0, 16, 64, -2.0, 0.0, 9);
    const auto fam = build_cutoff_family(0.3, 1);
    Field f(g);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t ix = 0; ix < g.x_count(); ++ix)
        for (std::size_t iv = 0; iv < g.v_count(); ++iv)
          f.at(it, ix, iv) = 0.8 * kfp::test::bump(g.v_point(iv)[0] / 2) * (1 + 0.2 * std::cos(g.x_point(ix)[0]));
    const auto rep = degiorgi_levels(f, fam, 20);
    CHECK(rep.monotone);
    CHECK(rep.E.front() > 0);
    CHECK(rep.indicator_checked > 0);
    CHECK(rep.indicator_violations == 0);
  }

  TEST_CASE("dg2_measures: constant data never satisfies both hypotheses") {
    const auto g = make_grid(1, 8.0, 8.0, 16, 64, -6.0, 0.0, 13);
    const auto fam = build_cutoff_family(0.3, 1);
    for (double c : {-0.5, 0.0, 0.5, 0.95}) {
      const auto rep = dg2_measures(constant_field(g, c), fam, {});
      CHECK(rep.verdict == Verdict::Vacuous);
      CHECK_FALSE((rep.early_holds && rep.late_holds));
    }
    CHECK_THROWS_AS(dg2_measures(constant_field(g, 1.5), fam, {}), PreconditionError);
    UniversalConstants bad;
    bad.theta0 = 0.5;
    CHECK_THROWS_AS(dg2_measures(constant_field(g, 0.0), fam, bad), std::invalid_argument);
  }

  TEST_CASE("transport_derivative: free-streaming data has zero derivative") {
    const auto g = make_grid(1, 2 * kPi, 8.0, 32, 64, 0.0, 1.0, 161);
    Field f(g);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t ix = 0; ix < g.x_count(); ++ix)
        for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
          const double t = g.t_at(it), x = g.x_point(ix)[0], v = g.v_point(iv)[0];
          f.at(it, ix, iv) = std::sin(x - v * t) + t * t;
        }
    const auto D = transport_derivative(f);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t i = 0; i < g.slice_size(); i += 7)
        CHECK(D.tslice(it)[i] == doctest::Approx(2 * g.t_at(it)).epsilon(1e-3).scale(1));
  }

  TEST_CASE("averaging_check: f = 0 is vacuous") {
    const auto g = make_grid(1, 2 * kPi, 8.0, 16, 64, -1.0, 1.0, 17);
    const Field z(g);
    std::vector<double> eta(g.v_count(), 1.0);
    const auto rep = averaging_check(z, z, eta, 1.0, {-0.5, 0.5, {}, 1.0}, {-1.0, 1.0, {}, 2.0});
    CHECK(rep.vacuous);
    CHECK(rep.alpha == doctest::Approx(0.25));
  }
}
