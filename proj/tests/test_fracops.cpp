#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "kfp/fracops.hpp"

using namespace kfp;
using kfp::test::bump;

TEST_SUITE("fracops") {
  const VBox box{1, 256, 8};

  std::vector<double> noise(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    return kfp::test::sample(box, [&](const Vec& v) { return N(rng) * bump(v[0] / 6); });
  }

  TEST_CASE("Bessel powers invert each other") {
    const auto f = noise(1);
    const auto back = apply_multiplier({MultiplierKind::BesselPow, -0.7},
                                       apply_multiplier({MultiplierKind::BesselPow, 0.7}, f, box), box);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == doctest::Approx(f[i]).epsilon(1e-10).scale(1));
  }

  TEST_CASE("plane waves are eigenfunctions of lambda_pow") {
    const double xi = box.frequency(9);
    const auto w = kfp::test::sample(box, [&](const Vec& v) { return std::sin(xi * v[0] + 0.3); });
    const auto out = apply_multiplier({MultiplierKind::LambdaPow, 0.6}, w, box);
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(out[i] == doctest::Approx(std::pow(xi, 0.6) * w[i]).scale(1).epsilon(1e-10));
  }

  TEST_CASE("multipliers commute and lambda_pow is non-negative on the quadratic form") {
    const auto f = noise(2);
    const MultiplierOp A{MultiplierKind::LambdaPow, 0.8}, B{MultiplierKind::BesselPow, -0.4};
    const auto ab = apply_multiplier(A, apply_multiplier(B, f, box), box);
    const auto ba = apply_multiplier(B, apply_multiplier(A, f, box), box);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(ab[i] == doctest::Approx(ba[i]).scale(1).epsilon(1e-10));
    for (std::uint64_t seed = 3; seed < 13; ++seed) {
      const auto g = noise(seed);
      const auto lg = apply_multiplier({MultiplierKind::LambdaPow, 0.6}, g, box);
      double q = 0;
      for (std::size_t i = 0; i < g.size(); ++i) q += g[i] * lg[i];
      CHECK(q >= -1e-10);
    }
  }

  TEST_CASE("negative lambda powers annihilate the mean") {
    const auto c = kfp::test::sample(box, [](const Vec&) { return 2.0; });
    for (double v : apply_multiplier({MultiplierKind::LambdaPow, -0.5}, c, box)) CHECK(std::abs(v) < 1e-12);
  }

  TEST_CASE("mollify: constants, mass, plane waves, monotone convergence") {
    const auto c = kfp::test::sample(box, [](const Vec&) { return 3.0; });
    for (double v : mollify(c, box, {0.2}).values) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));

    const auto f = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 3) * (1 + v[0]); });
    double m0 = 0, m1 = 0;
    const auto mf = mollify(f, box, {0.3}).values;
    for (std::size_t i = 0; i < f.size(); ++i) {
      m0 += f[i] * box.cell();
      m1 += mf[i] * box.cell();
    }
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-10));

    const double xi = box.frequency(12);
    const auto w = kfp::test::sample(box, [&](const Vec& v) { return std::cos(xi * v[0]); });
    const auto mw = mollify(w, box, {0.25}).values;
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(mw[i] == doctest::Approx(mollifier_hat(0.25 * xi, 1) * w[i]).scale(1).epsilon(1e-10));

    double prev = INFINITY;
    for (double eps : {0.8, 0.4, 0.2, 0.1, 0.05}) {
      const auto m = mollify(f, box, {eps}).values;
      std::vector<double> d(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) d[i] = f[i] - m[i];
      const double e = hs_norm_v(d, box, 0);
      CHECK(e < prev);
      prev = e;
    }
  }

  TEST_CASE("mollifier profile has unit mass in one and two dimensions") {
    for (int n : {1, 2}) {
      double m = 0;
      const int N = 4000;
      for (int i = 0; i < N; ++i) {
        const double r = (i + 0.5) / N;
        m += mollifier_profile(r, n) * (n == 1 ? 2.0 : 2 * kfp::test::kPi * r) / N;
      }
      CHECK(m == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(mollifier_hat(0, n) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("mollifier_rate: plane wave, smooth bump, critical tail, bad ladders") {
    std::vector<double> eps;
    for (int i = 0; i < 8; ++i) eps.push_back(0.5 * std::pow(0.6, i));
    const double xi = box.frequency(20);
    const auto w = kfp::test::sample(box, [&](const Vec& v) { return std::cos(xi * v[0]); });
    CHECK(mollifier_rate(w, box, 0.3, eps).rate >= 0.25);
    const auto b = kfp::test::sample(box, [](const Vec& v) { return bump(v[0] / 3); });
    CHECK(mollifier_rate(b, box, 0.3, eps).rate >= 1.0);

    const VBox big{1, 4096, 8};
    for (double s : {0.2, 0.3, 0.45}) {
      std::vector<double> g(big.size(), 0.0);
      for (int m = 1; m < big.nv / 2; ++m) {
        const double k = big.frequency(m);
        const double amp = std::pow(1 + k * k, -(s + 0.51) / 2);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += amp * std::cos(k * big.point(i)[0] + 0.37 * m * m);
      }
      const double rate = mollifier_rate(g, big, s, eps).rate;
      CHECK(rate >= s - 0.1);
      CHECK(rate <= s + 0.15);
    }
    CHECK_THROWS_AS(mollifier_rate(b, box, 0.3, {0.1, 0.05, 0.02}), std::invalid_argument);
    CHECK_THROWS_AS(mollifier_rate(b, box, 0.3, {0.1, 0.09, 0.08, 0.07}), std::invalid_argument);
  }

  TEST_CASE("fractional Laplacian constant matches the known 1-D value at s = 1/2") {
    CHECK(frac_laplacian_constant(1, 0.5) == doctest::Approx(1 / kfp::test::kPi).epsilon(1e-12));
  }
}
