#include <doctest.h>

#include "helpers.hpp"
#include "kfp/fracops.hpp"
#include "kfp/kernel.hpp"

using namespace kfp;
using kfp::test::bump;

TEST_SUITE("kernel") {
  TEST_CASE("validate_bounds: homogeneous and truncated families pass") {
    for (int n : {1, 2}) {
      for (double c : {0.5, 1.0, 2.0})
        CHECK(validate_bounds(Kernel::homogeneous(n, 0.3, 2.0, c), 5000, 1).passed());
      const auto cert = validate_bounds(Kernel::truncated(n, 0.3, 2.0, 0.5, 6.0), 5000, 2);
      CHECK(cert.passed());
      CHECK(cert.min_ratio == doctest::Approx(0.5));  // tight lower bound inside the band
    }
  }

  TEST_CASE("truncated kernel: band edge is exactly the lower bound, zero beyond") {
    const Kernel k = Kernel::truncated(1, 0.3, 2.0, 0.5, 6.0);
    const Vec v{0.1, 0}, inside{6.1, 0}, outside{6.1001, 0};
    CHECK(k(0, {}, v, inside) == doctest::Approx(0.5 * std::pow(6.0, -1.6)));
    CHECK(k(0, {}, v, outside) == 0.0);
  }

  TEST_CASE("validate_bounds: a modulation exceeding kappa is reported with its point") {
    const Kernel bad = Kernel::custom(
        1, 0.3, 2.0, 1.0, [](double, const Vec&, const Vec& v, const Vec& w) {
          const double r = std::abs(w[0] - v[0]);
          return r > 2 && r < 3 ? 2.0 * 1.01 : 1.0;
        },
        1.0, 5.0);
    const auto cert = validate_bounds(bad, 5000, 3);
    REQUIRE_FALSE(cert.passed());
    const auto& w = cert.violations.front();
    const double r = std::abs(w.w[0] - w.v[0]);
    CHECK(r > 2);
    CHECK(r < 3);
  }

  TEST_CASE("modulated presets satisfy symmetries and bounds") {
    for (const char* id : {"tx-wave", "v-twist", "mixed"})
      for (int n : {1, 2})
        CHECK(validate_bounds(Kernel::modulated(n, 0.3, 2.0, 1.0, Kernel::preset(id, n, 2.0, 1.0, 7)),
                              5000, 4)
                  .passed());
  }

  const VBox box{1, 256, 8};

  TEST_CASE("apply_L: windowed plane waves decay at the spectral rate") {
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0, 1.3);
    // the window's commutator with L is the only error left; a wide window keeps it below 1%
    const double xi = 4.0;
    const auto f = kfp::test::sample(box, [&](const Vec& v) { return std::cos(xi * v[0]) * bump(v[0] / 6.5); });
    const auto Lf = apply_L(k, f, box, 0, {});
    const double rate = k.c() / frac_laplacian_constant(1, 0.3) * std::pow(xi, 0.6);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (std::abs(box.point(i)[0]) > 1.5) continue;
      num += std::pow(Lf.values[i] + rate * f[i], 2);
      den += std::pow(rate * f[i], 2);
    }
    CHECK(std::sqrt(num / den) < 0.01);
  }

  TEST_CASE("apply_L of a constant slice is zero") {
    const VBox b{1, 64, 8};
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0);
    CollisionOperator op(k, b, BoundaryMode::Periodic);
    std::vector<double> f(b.size(), 2.0), out(b.size());
    op.apply(0, {}, f, out);
    for (double v : out) CHECK(std::abs(v) < 1e-10);
  }

  TEST_CASE("apply_L: |v|^2 near the origin with the truncated kernel matches adaptive quadrature") {
    const Kernel k = Kernel::truncated(1, 0.3, 2.0, 1.0, 6.0);
    const VBox fine{1, 1024, 8};
    auto phi = [](const Vec& v) { return v[0] * v[0] * bump(v[0] / 5); };
    const auto f = kfp::test::sample(fine, phi);
    const auto Lf = apply_L(k, f, fine, 0, {});
    for (double v0 : {0.0, 0.25, 0.5}) {
      const std::size_t i = static_cast<std::size_t>(std::lround((v0 + fine.V) / fine.h()));
      const double ref = apply_L_pointwise(k, phi, 0, {}, fine.point(i));
      CHECK(Lf.values[i] == doctest::Approx(ref).epsilon(0.01));
    }
  }

  TEST_CASE("apply_L rejects slices touching the boundary band") {
    const auto f = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 7.5); });
    CHECK_THROWS_AS(apply_L(Kernel::homogeneous(1, 0.3, 2.0), f, box, 0, {}), std::invalid_argument);
  }

  TEST_CASE("bilinear form: constants, positivity, and <g, L f> = -B(f, g)") {
    for (int fam = 0; fam < 3; ++fam) {
      Kernel k = Kernel::homogeneous(1, 0.35, 2.0);
      if (fam == 1) k = Kernel::truncated(1, 0.35, 2.0, 1.0, 6.0);
      if (fam == 2) k = Kernel::modulated(1, 0.35, 2.0, 1.0, Kernel::preset("mixed", 1, 2.0, 1.0, 3));
      const auto f = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 4) * (1 + 0.5 * v[0]); });
      const auto g = kfp::test::sample(box, [](const Vec& v) { return bump((v[0] - 1) / 3); });
      std::vector<double> one(box.size(), 0.0);
      CHECK(std::abs(bilinear_B(k, one, g, box, 0.2, {0.3, 0})) < 1e-10);
      CHECK(bilinear_B(k, f, f, box, 0.2, {0.3, 0}) >= 0);
      const auto Lf = apply_L(k, f, box, 0.2, {0.3, 0});
      const auto Lg = apply_L(k, g, box, 0.2, {0.3, 0});
      double gLf = 0, fLg = 0;
      for (std::size_t i = 0; i < box.size(); ++i) {
        gLf += g[i] * Lf.values[i] * box.cell();
        fLg += f[i] * Lg.values[i] * box.cell();
      }
      const double B = bilinear_B(k, f, g, box, 0.2, {0.3, 0});
      CHECK(gLf == doctest::Approx(-B).epsilon(0.01));
      CHECK(gLf == doctest::Approx(fLg).epsilon(1e-8));
    }
  }

  TEST_CASE("maximum principle sign at an interior maximum") {
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0);
    const auto f = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 3) + 0.3 * bump((v[0] - 3.5) / 1.5); });
    const auto Lf = apply_L(k, f, box, 0, {});
    const auto imax = std::max_element(f.begin(), f.end()) - f.begin();
    CHECK(Lf.values[imax] <= 1e-9);
  }

  TEST_CASE("cross_term: empty factor, positive bound, overlap rejected") {
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0);
    const auto fp = kfp::test::sample(box, [](const Vec& v) { return bump((v[0] + 1.5) / 1); });
    const auto fm = kfp::test::sample(box, [](const Vec& v) { return bump((v[0] - 1.5) / 1); });
    std::vector<double> zero(box.size(), 0.0);
    const auto e = cross_term(k, fp, zero, box, 0, {});
    CHECK(e.value == 0.0);
    CHECK(e.lower_bound == 0.0);
    const auto ct = cross_term(k, fp, fm, box, 0, {});
    CHECK(ct.bound_applicable);
    CHECK(ct.lower_bound > 0);
    CHECK(ct.value >= ct.lower_bound);
    const auto over = kfp::test::sample(box, [](const Vec& v) { return bump((v[0] + 1.0) / 1); });
    CHECK_THROWS_AS(cross_term(k, fp, over, box, 0, {}), std::invalid_argument);
  }
}
