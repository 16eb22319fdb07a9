#include <doctest.h>

#include "helpers.hpp"
#include "kfp/kinetic_scaling.hpp"

using namespace kfp;
using kfp::test::kPi;

namespace {

template <class F>
Field sample_field(const PhaseGrid& g, F&& f) {
  Field out(g);
  for (int it = 0; it < g.nt; ++it)
    for (std::size_t ix = 0; ix < g.x_count(); ++ix)
      for (std::size_t iv = 0; iv < g.v_count(); ++iv)
        out.at(it, ix, iv) = f(g.t_at(it), g.x_point(ix), g.v_point(iv));
  return out;
}

double smooth(double t, const Vec& x, const Vec& v) {
  return std::cos(x[0] + 0.3 * t) * std::exp(-v[0] * v[0] / 4);
}

}  // namespace

TEST_SUITE("kinetic_scaling") {
  TEST_CASE("epsilon = 1 and the zero translation are identities") {
    const auto g = make_grid(1, 2 * kPi, 8.0, 32, 64, -1.0, 0.0, 9);
    const Field f = sample_field(g, smooth);
    const auto sc = scale_field(f, {1.0, 0.3}, g);
    const auto tr = translate_field(f, {}, g);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      CHECK(sc.data[i] == doctest::Approx(f.data[i]).epsilon(1e-12).scale(1));
      CHECK(tr.data[i] == doctest::Approx(f.data[i]).epsilon(1e-12).scale(1));
    }
  }

  TEST_CASE("scaled field agrees with the formula at interior points") {
    const auto src = make_grid(1, 2 * kPi, 8.0, 64, 256, -1.0, 0.0, 41);
    const Field f = sample_field(src, smooth);
    const auto tgt = make_grid(1, 2 * kPi, 8.0, 16, 64, -1.0, 0.0, 5);
    const double eps = 0.5, s = 0.3;
    const auto sc = scale_field(f, {eps, s}, tgt);
    for (int it = 0; it < tgt.nt; ++it)
      for (std::size_t ix = 0; ix < tgt.x_count(); ix += 3)
        for (std::size_t iv = 0; iv < tgt.v_count(); iv += 5) {
          const double t = tgt.t_at(it);
          const Vec x = tgt.x_point(ix), v = tgt.v_point(iv);
          const double expect = smooth(std::pow(eps, 2 * s) * t, {std::pow(eps, 1 + 2 * s) * x[0], 0}, {eps * v[0], 0});
          CHECK(sc.at(it, ix, iv) == doctest::Approx(expect).epsilon(1e-4).scale(1));
        }
  }

  TEST_CASE("scaled kernel keeps the bounds and matches the direct formula") {
    const Kernel k = Kernel::modulated(1, 0.3, 2.0, 1.0, Kernel::preset("mixed", 1, 2.0, 1.0, 3));
    const double eps = 0.3;
    const Kernel ke = scale_kernel(k, eps);
    CHECK(validate_bounds(ke, 2000, 5).passed());
    for (double w : {0.5, 2.0, 4.0, 9.0, 15.0})
      CHECK(ke(0.2, {0.4, 0}, {0.1, 0}, {w, 0}) == doctest::Approx(scaled_kernel_value(k, eps, 0.2, {0.4, 0}, {0.1, 0}, {w, 0})).epsilon(1e-10));
  }

  TEST_CASE("compose follows the Galilean group law") {
    const PhasePoint a{0.3, {0.2, 0}, {0.5, 0}}, b{-0.1, {0.4, 0}, {-0.2, 0}};
    const auto c = compose(a, b, 1);
    CHECK(c.t == doctest::Approx(0.2));
    CHECK(c.v[0] == doctest::Approx(0.3));
    CHECK(c.x[0] == doctest::Approx(0.2 + 0.4 + 0.5 * -0.1));
  }

  TEST_CASE("kinetic cylinders are nested and contain their center") {
    const KineticCylinder big{{0.1, {0.2, 0}, {0.3, 0}}, 1.0, 0.3, 1};
    KineticCylinder small = big;
    small.rho = 0.4;
    CHECK(big.contains(big.center));
    for (int i = 0; i < 2000; ++i) {
      const double u = i / 2000.0;
      const PhasePoint p{0.1 + (u - 0.5) * 2, {0.2 + std::sin(37 * u) * 1.2, 0}, {0.3 + std::cos(91 * u), 0}};
      if (small.contains(p)) CHECK(big.contains(p));
    }
  }

  TEST_CASE("oscillation profile: |v|^{1/2} gives alpha near 1/2; constants saturate") {
    const auto g = make_grid(1, 2 * kPi, 8.0, 32, 1024, -2.0, 2.0, 81);
    OscillationOptions opt;
    opt.rho0 = 1.0;
    opt.lambda = 0.5;
    opt.J = 5;
    const Field f = sample_field(g, [](double, const Vec&, const Vec& v) { return std::sqrt(std::abs(v[0])); });
    const auto prof = oscillation_profile(f, {}, opt);
    CHECK(prof.usable >= 3);
    CHECK(prof.alpha == doctest::Approx(0.5).epsilon(0.2));
    const auto flat = oscillation_profile(sample_field(g, [](double, const Vec&, const Vec&) { return 0.4; }), {}, opt);
    CHECK(flat.saturated);
  }

  TEST_CASE("source norm ratio scales as predicted") {
    Source a;
    a.kind = "gauss";
    a.r = 4;
    a.fn = [](double t, const Vec& x, const Vec& v) { return std::exp(-t * t - x[0] * x[0] - v[0] * v[0]); };
    const auto ratio = measure_source_ratio(a, 1, {0.5, 0.3, 4});
    CHECK(ratio.relative_error < 1e-2);
    CHECK(ScalingParams{0.5, 0.3, 4}.source_norm_factor(1) == doctest::Approx(std::pow(0.5, 0.6 * (1 - (2 + 1 / 0.3) / 4))));
  }
}
