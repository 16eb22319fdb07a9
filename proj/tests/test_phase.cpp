#include <doctest.h>

#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "kfp/fracops.hpp"
#include "kfp/phase.hpp"

using namespace kfp;
using kfp::test::bump;
using kfp::test::kPi;

TEST_SUITE("phase") {
  TEST_CASE("make_grid accepts valid 1-D and 2-D grids and echoes parameters") {
    const auto g = make_grid(1, 2 * kPi, 8, 128, 256, -6, 0, 64);
    CHECK(g.nx == 128);
    CHECK(g.nv == 256);
    CHECK(g.x_period == doctest::Approx(2 * kPi));
    CHECK(g.total() == 128u * 256u * 64u);
    const auto g2 = make_grid(2, 2 * kPi, 8, 64, 64, -6, 0, 48);
    CHECK(g2.slice_size() == 64u * 64u * 64u * 64u);
  }

  TEST_CASE("make_grid rejects bad sizes, small boxes and 2s >= n") {
    CHECK_THROWS_AS(make_grid(1, 2 * kPi, 8, 100, 256, -6, 0, 64), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1, 2 * kPi, 6, 128, 256, -6, 0, 64), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1, 2 * kPi, 8, 128, 256, -6, 0, 64, 0.5), std::invalid_argument);
    CHECK_NOTHROW(make_grid(2, 2 * kPi, 8, 16, 16, -6, 0, 4, 0.9));
  }

  TEST_CASE("lp_norm: zero, constants, homogeneity and a half indicator") {
    const auto g = make_grid(1, 8, 8, 32, 64, -2, 0, 21);
    const Region reg{-2, 0, {{}, 2.0}, Ball{{}, 3.0}};
    Field f(g);
    CHECK(lp_norm(f, 2, reg) == 0.0);
    std::fill(f.data.begin(), f.data.end(), -1.5);
    CHECK(lp_norm(f, INFINITY, reg) == doctest::Approx(1.5));
    const double l3 = lp_norm(f, 3, reg);
    for (double& v : f.data) v *= -2.0;
    CHECK(lp_norm(f, 3, reg) == doctest::Approx(2 * l3).epsilon(1e-14));

    std::fill(f.data.begin(), f.data.end(), 1.0);
    const double vol = lp_norm(f, 1, reg);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t ix = 0; ix < g.x_count(); ++ix)
        for (std::size_t iv = 0; iv < g.v_count(); ++iv)
          f.at(it, ix, iv) = g.t_at(it) < -1.0 - 1e-12 ? 1.0 : 0.0;
    const double slab = vol / 11.0;  // one stored time slice of the region (11 slices)
    CHECK(std::abs(lp_norm(f, 1, reg) - vol / 2) <= slab);
  }

  TEST_CASE("hs_norm_v: Plancherel at s = 0 and plane-wave eigenvalues") {
    const VBox box{1, 128, 8};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    std::vector<double> f(box.size());
    for (double& v : f) v = N(rng);
    double l2 = 0;
    for (double v : f) l2 += v * v * box.cell();
    CHECK(hs_norm_v(f, box, 0.0) == doctest::Approx(std::sqrt(l2)).epsilon(1e-12));

    const double xi = box.frequency(5);
    const auto w = kfp::test::sample(box, [&](const Vec& v) { return std::cos(xi * v[0]); });
    const double base = hs_norm_v(w, box, 0.0);
    CHECK(hs_norm_v(w, box, 0.7) == doctest::Approx(std::pow(1 + xi * xi, 0.35) * base).epsilon(1e-10));
  }

  TEST_CASE("gagliardo_seminorm: constants vanish, scaling law, ratio to the multiplier norm") {
    const VBox box{1, 512, 8};
    const double s = 0.4;
    const auto c = kfp::test::sample(box, [](const Vec&) { return 0.0; });
    CHECK(gagliardo_seminorm(c, box, s).value == 0.0);

    auto at_scale = [&](double h) {
      return gagliardo_seminorm(
                 kfp::test::sample(box, [&](const Vec& v) { return bump(v[0] / (2 * h)); }), box, s)
          .value;
    };
    // f(v/h) has seminorm h^{(n-2s)/2} times that of f
    CHECK(at_scale(2.0) / at_scale(1.0) == doctest::Approx(std::pow(2.0, (1 - 2 * s) / 2)).epsilon(0.05));

    // the multiplier side is periodic on the box, so keep the bumps small relative to it
    const VBox wide{1, 2048, 32};
    std::vector<double> ratios;
    for (double w : {1.5, 2.0, 2.5, 3.0, 3.5}) {
      const auto f = kfp::test::sample(wide, [&](const Vec& v) { return bump(v[0] / w); });
      const auto lam = apply_multiplier({MultiplierKind::LambdaPow, s}, f, wide);
      const double lam_norm = hs_norm_v(lam, wide, 0.0);
      ratios.push_back(gagliardo_seminorm(f, wide, s).value / lam_norm);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*hi / *lo < 1.02);
    // with the exact constant, [f]^2 = (2 / C_{n,s}) |Lambda^s f|^2
    CHECK(ratios[0] == doctest::Approx(std::sqrt(2 / frac_laplacian_constant(1, s))).epsilon(0.02));
  }

  TEST_CASE("level_set_measure: empty, full, monotone, and a linear crossing") {
    const auto g = make_grid(1, 8, 8, 16, 32, -1, 1, 21);
    const Region reg{-1, 1, {{}, 2.0}, Ball{{}, 2.0}};
    Field one(g);
    std::fill(one.data.begin(), one.data.end(), 1.0);
    CHECK(level_set_measure(one, {Comparator::LessEq, 0.0}, reg) == 0.0);
    const double full = level_set_measure(one, {Comparator::GreaterEq, 0.5}, reg);
    CHECK(full == doctest::Approx(lp_norm(one, 1, reg)));

    Field lin(g);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t i = 0; i < g.slice_size(); ++i) lin.tslice(it)[i] = g.t_at(it) - 0.05;
    const double half = level_set_measure(lin, {Comparator::GreaterEq, 0.0}, reg);
    CHECK(std::abs(half - full / 2) <= full / 21 + 1e-12);
    double prev = INFINITY;
    for (double a = -1.2; a <= 1.2; a += 0.1) {
      const double m = level_set_measure(lin, {Comparator::GreaterEq, a}, reg);
      CHECK(m <= prev);
      prev = m;
    }
  }

  TEST_CASE("velocity_average: normalization, parity and separable fields") {
    const auto g = make_grid(1, 8, 8, 16, 128, 0, 1, 3);
    const auto box = g.vbox();
    auto eta = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 2); });
    double mass = 0;
    for (double e : eta) mass += e * box.cell();
    for (double& e : eta) e /= mass;
    Field f(g);
    std::fill(f.data.begin(), f.data.end(), 1.0);
    for (double r : velocity_average(f, eta)) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));

    Field odd(g), sep(g);
    double eta_h = 0;
    for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
      const double v = g.v_point(iv)[0];
      eta_h += eta[iv] * std::exp(-v * v) * box.cell();
    }
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t ix = 0; ix < g.x_count(); ++ix)
        for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
          const double v = g.v_point(iv)[0], x = g.x_point(ix)[0];
          odd.at(it, ix, iv) = v * std::exp(-v * v) * std::cos(x);
          sep.at(it, ix, iv) = (1 + g.t_at(it)) * std::sin(x) * std::exp(-v * v);
        }
    for (double r : velocity_average(odd, eta)) CHECK(std::abs(r) < 1e-12);
    const auto rho = velocity_average(sep, eta);
    for (int it = 0; it < g.nt; ++it)
      for (std::size_t ix = 0; ix < g.x_count(); ++ix)
        CHECK(rho[it * g.x_count() + ix] ==
              doctest::Approx((1 + g.t_at(it)) * std::sin(g.x_point(ix)[0]) * eta_h).epsilon(1e-12));
  }

  TEST_CASE("field dump round trip preserves samples and grid") {
    const auto g = make_grid(1, 8, 8, 8, 16, 0, 1, 3);
    Field f(g);
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = std::sin(0.1 * i);
    const auto stem = (std::filesystem::temp_directory_path() / "kfp_phase_roundtrip").string();
    write_field(f, stem);
    const Field r = read_field(stem);
    CHECK(r.grid.nx == 8);
    CHECK(r.grid.t1 == 1.0);
    CHECK(r.data == f.data);
  }
}
