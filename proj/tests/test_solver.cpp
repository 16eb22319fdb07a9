#include <doctest.h>

#include "helpers.hpp"
#include "kfp/config.hpp"
#include "kfp/fracops.hpp"
#include "kfp/solver.hpp"

using namespace kfp;
using kfp::test::bump;
using kfp::test::kPi;

namespace {

RunConfig base_config(int nx, int nv, double t1, int nt, const Kernel& k) {
  RunConfig cfg;
  cfg.grid = make_grid(k.n(), 2 * kPi, 8.0, nx, nv, 0.0, t1, nt);
  cfg.kernel = k;
  cfg.initial.assign(cfg.grid.slice_size(), 0.0);
  return cfg;
}

template <class F>
void fill(RunConfig& cfg, F&& f) {
  const auto& g = cfg.grid;
  for (std::size_t ix = 0; ix < g.x_count(); ++ix)
    for (std::size_t iv = 0; iv < g.v_count(); ++iv)
      cfg.initial[ix * g.v_count() + iv] = f(g.x_point(ix), g.v_point(iv));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("constant data stays constant") {
    auto cfg = base_config(8, 64, 1.0, 5, Kernel::homogeneous(1, 0.3, 2.0));
    fill(cfg, [](const Vec&, const Vec&) { return 0.7; });
    const auto tr = run(cfg);
    for (double v : tr.field.tslice(4)) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  }

  TEST_CASE("zero data and zero source stay exactly zero") {
    for (const char* st : {"spectral-exponential", "imex"}) {
      auto cfg = base_config(8, 64, 1.0, 5, Kernel::homogeneous(1, 0.3, 2.0));
      cfg.stepper = parse_stepper(st);
      cfg.record_every = 8;
      const auto tr = run(cfg);
      for (double v : tr.field.data) CHECK(v == 0.0);
    }
  }

  TEST_CASE("pure transport matches f0(x - v t, v)") {
    auto cfg = base_config(32, 64, 1.3, 3, Kernel::homogeneous(1, 0.3, 2.0));
    cfg.collisions = false;
    auto f0 = [](const Vec& x, const Vec& v) { return (std::cos(x[0]) + 0.5 * std::sin(3 * x[0])) * bump(v[0] / 4); };
    fill(cfg, f0);
    const auto tr = run(cfg);
    const auto& g = cfg.grid;
    double err = 0;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix)
      for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
        const Vec x = g.x_point(ix), v = g.v_point(iv);
        err = std::max(err, std::abs(tr.field.at(2, ix, iv) - f0({x[0] - v[0] * 1.3, 0}, v)));
      }
    CHECK(err < 1e-12);
  }

  TEST_CASE("x-independent plane wave decays at the fractional Laplacian rate") {
    const Kernel k = Kernel::homogeneous(1, 0.3, 2.0, 1.0);
    auto cfg = base_config(4, 256, 1.0, 3, k);
    const double xi = 2 * kPi * 4 / 16.0;  // a resolved bin on [-8, 8)
    fill(cfg, [&](const Vec&, const Vec& v) { return std::cos(xi * v[0]); });
    const auto tr = run(cfg);
    const double rate = k.c() / frac_laplacian_constant(1, 0.3) * std::pow(xi, 0.6);
    const double expect = std::exp(-rate * 1.0);
    const auto& g = cfg.grid;
    for (std::size_t iv = 0; iv < g.v_count(); iv += 17)
      CHECK(tr.field.at(2, 0, iv) == doctest::Approx(expect * std::cos(xi * g.v_point(iv)[0])).epsilon(0.03).scale(1));
  }

  TEST_CASE("mass is conserved and the L2 norm does not grow") {
    for (const char* st : {"spectral-exponential", "imex"}) {
      const Kernel k = std::string(st) == "imex"
                           ? Kernel::modulated(1, 0.3, 2.0, 1.0, Kernel::preset("mixed", 1, 2.0, 1.0, 5))
                           : Kernel::homogeneous(1, 0.3, 2.0);
      auto cfg = base_config(16, 128, 0.5, 5, k);
      cfg.stepper = parse_stepper(st);
      cfg.record_every = 8;
      fill(cfg, [](const Vec& x, const Vec& v) { return (1 + 0.5 * std::cos(x[0])) * bump(v[0] / 3); });
      const auto tr = run(cfg);
      const double m0 = total_mass(cfg.initial, cfg.grid);
      double prev = l2_norm_slice(cfg.initial, cfg.grid);
      for (const auto& e : tr.log) {
        CHECK(std::abs(e.mass - m0) <= 1e-8 * e.time * std::abs(m0));
        CHECK(e.l2 <= prev * (1 + 1e-9));
        prev = e.l2;
      }
    }
  }

  TEST_CASE("identical configs produce bit-identical fields") {
    auto cfg = base_config(16, 64, 0.5, 3, Kernel::homogeneous(1, 0.3, 2.0));
    cfg.initial = rough_initial(cfg.grid, 17, 8, 6, 0.25, 1.0, 5);
    const auto a = run(cfg), b = run(cfg);
    CHECK(a.field.data == b.field.data);
  }

  TEST_CASE("Strang splitting converges at second order in dt") {
    const Kernel k = Kernel::modulated(1, 0.3, 2.0, 1.0, Kernel::preset("tx-wave", 1, 2.0, 1.0, 9));
    auto solve = [&](int every) {
      auto cfg = base_config(16, 128, 0.4, 2, k);
      cfg.stepper = Stepper::Imex;
      cfg.record_every = every;
      fill(cfg, [](const Vec& x, const Vec& v) { return (1 + 0.5 * std::cos(x[0])) * bump(v[0] / 4); });
      const auto tr = run(cfg);
      auto s = tr.field.tslice(1);
      return std::vector<double>(s.begin(), s.end());
    };
    const auto a = solve(16), b = solve(32), c = solve(64);
    const double e1 = max_abs_diff(a, b), e2 = max_abs_diff(b, c);
    MESSAGE("self-convergence ratio " << e1 / e2);
    CHECK(e1 / e2 > 3.0);
  }

  TEST_CASE("manufactured solution: weak residual is small and decreases with resolution") {
    Manufactured m;
    const Kernel k = Kernel::homogeneous(1, m.s, 2.0, m.c);
    double prev = 0;
    for (int level = 0; level < 2; ++level) {
      auto cfg = base_config(16, 128 << level, 1.0, 5, k);
      cfg.source = m.source();
      cfg.initial = m.initial(cfg.grid);
      cfg.record_every = 4 << level;
      const auto tr = run(cfg);
      const auto exact = m.sample(cfg.grid);
      double err = 0, scale = 0;
      for (std::size_t i = 0; i < exact.data.size(); ++i) {
        err = std::max(err, std::abs(tr.field.data[i] - exact.data[i]));
        scale = std::max(scale, std::abs(exact.data[i]));
      }
      CHECK(err / scale < 0.02);
      const auto tf = default_test_function(1, 2 * kPi, 0.1, 0.9, 3.0);
      const double res = weak_residual(tr.field, k, cfg.source, tf);
      const double ref = weak_residual(exact, k, cfg.source, tf);
      MESSAGE("level " << level << " residual " << res << " exact-sample residual " << ref);
      CHECK(res < 0.05);
      if (level > 0) CHECK(res <= prev * 1.05);
      prev = res;
    }
  }

  TEST_CASE("CFL violation and oversized c_stab are rejected") {
    const Kernel k = Kernel::modulated(1, 0.3, 2.0, 1.0, Kernel::preset("mixed", 1, 2.0, 1.0, 5));
    auto cfg = base_config(8, 256, 10.0, 2, k);
    cfg.stepper = Stepper::ExplicitRK2;
    CHECK_THROWS_AS(run(cfg), std::runtime_error);
    cfg.c_stab = 10;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg.stepper = Stepper::SpectralExponential;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);  // needs a translation-invariant kernel
  }
}
