#include "kfp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "kfp/fft.hpp"
#include "kfp/fracops.hpp"
#include "kfp/lattice.hpp"

namespace kfp {

namespace {

constexpr double kPi = std::numbers::pi;

std::string where(double t, const Vec& x, const Vec& v, int n) {
  std::ostringstream os;
  os << "(t=" << t << ", x=" << x[0];
  if (n == 2) os << "," << x[1];
  os << ", v=" << v[0];
  if (n == 2) os << "," << v[1];
  os << ")";
  return os.str();
}

/// Trapezoid weights for stored slices inside [a, b]; zero elsewhere.
std::vector<double> time_weights(const PhaseGrid& g, double a, double b) {
  std::vector<double> w(g.nt, 0.0);
  const double eps = 1e-9 * std::max(1.0, g.dt());
  std::vector<int> inside;
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    if (t >= a - eps && t <= b + eps) inside.push_back(it);
  }
  if (inside.size() < 2) return w;
  for (std::size_t i = 0; i < inside.size(); ++i) {
    const bool end = i == 0 || i + 1 == inside.size();
    w[inside[i]] = end ? 0.5 * g.dt() : g.dt();
  }
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// exponents

double recursion_gamma(const ExponentTable& t, double r) {
  return 0.5 * t.q * (1.0 - 2.0 / r + t.theta_star / r);
}

ExponentTable exponents(int n, double s, double r) {
  if (n < 1) throw std::invalid_argument("exponents: n must be positive");
  if (!(s > 0 && s < 1)) throw std::invalid_argument("exponents: s must lie in (0,1)");
  if (!(2.0 * s < n)) throw std::invalid_argument("exponents: 2s must be smaller than n");
  if (!(r > 2)) throw std::invalid_argument("exponents: r must exceed 2");
  ExponentTable t;
  t.n = n;
  t.s = s;
  t.r = r;
  const double a = 0.5 - 1.0 / (2.0 * (1.0 + s) * (n + 1.0));  // 1/p1
  const double b = 0.5 - s / n;                                // 1/p2
  t.p1 = 1.0 / a;
  t.p2 = b > 0 ? 1.0 / b : std::numeric_limits<double>::infinity();
  // theta/2 + (1 - theta) a = theta b + (1 - theta) is linear in theta.
  t.theta_star = (1.0 - a) / (1.5 - a - b);
  const double th = t.theta_star;
  t.theta_residual = std::abs(th / 2.0 + (1.0 - th) * a - th * b - (1.0 - th));
  t.q = 1.0 / (th / 2.0 + (1.0 - th) * a);
  t.beta = 1.0 / (2.0 * (1.0 + s));
  t.alpha_dg2 = 1.0 / (2.0 * (s + 0.5 * n));
  t.r0 = n * (1.0 + s) * (n + 1.0) / s * (2.0 * s / n + 0.5 + n / (2.0 * s));
  t.r_crit = t.q * (2.0 - th) / (t.q - 2.0);
  t.recursion_gamma = recursion_gamma(t, r);
  return t;
}

double gamma_crossing_bisection(int n, double s) {
  const ExponentTable t = exponents(n, s, 4.0);
  double lo = 2.0 + 1e-12, hi = 4.0;
  while (recursion_gamma(t, hi) <= 1.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (recursion_gamma(t, mid) > 1.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------------------------
// energy inequality

double sup_L_psi(const Kernel& k, const RadialCutoff& psi, const VBox& box, double R) {
  const int n = box.n;
  auto phi = [&](const Vec& w) { return psi.psi(norm(w, n)); };
  double sup = 0;
  if (k.translation_invariant() || n == 1) {
    // L psi is radial for radial psi and rotation-invariant kernels; sample along an axis.
    for (int j = 0; j < box.nv; ++j) {
      const double r = box.coord(j);
      if (std::abs(r) >= R || (n == 2 && r < 0)) continue;
      const Vec v{r, 0.0};
      sup = std::max(sup, std::abs(apply_L_pointwise(k, phi, 0.0, Vec{}, v, psi.kinks)));
    }
    return sup;
  }
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Vec v = box.point(i);
    if (norm(v, n) >= R) continue;
    sup = std::max(sup, std::abs(apply_L_pointwise(k, phi, 0.0, Vec{}, v, psi.kinks)));
  }
  return sup;
}

namespace {

/// int over w outside the box of K(t,x,v,w) psi(|w|) dw.
double exterior_psi_pairing(const Kernel& k, const RadialCutoff& psi, const VBox& box,
                            double t, const Vec& x, const Vec& v) {
  const int n = box.n;
  boost::math::quadrature::exp_sinh<double> es;
  auto radial = [&](double phi, double rb) {
    const Vec dir{std::cos(phi), std::sin(phi)};
    const double rmax = k.truncation_radius();
    if (rb >= rmax) return 0.0;
    auto integrand = [&](double u) {
      const double r = rb + u;
      if (r > rmax || !std::isfinite(r)) return 0.0;
      const Vec w{v[0] + r * dir[0], n == 2 ? v[1] + r * dir[1] : 0.0};
      return k(t, x, v, w) * psi.psi(norm(w, n)) * std::pow(r, n - 1);
    };
    if (std::isfinite(rmax)) {
      std::vector<double> gx, gw;
      gauss_legendre(64, 0.0, rmax - rb, gx, gw);
      double acc = 0;
      for (std::size_t q = 0; q < gx.size(); ++q) acc += gw[q] * integrand(gx[q]);
      return acc;
    }
    return es.integrate(integrand, 1e-10);
  };
  return exterior_integral(box, v, radial);
}

}  // namespace

EnergyReport energy_report(const Field& f, const Kernel& k, const RadialCutoff& psi,
                           const EnergySetup& st, const Source& a,
                           std::optional<double> sup_psi) {
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  const VBox box = g.vbox();
  if (!(st.T < st.S && st.S < 0)) throw std::invalid_argument("energy_report needs T < S < 0");
  if (!(st.omega_bar_radius < st.omega_radius))
    throw std::invalid_argument("energy_report needs Omega_bar compactly inside Omega");
  if (st.T < g.t0 - 1e-12 || g.t1 < -1e-12)
    throw std::invalid_argument("energy_report: time window not covered by the field");
  if (st.omega_radius > 0.5 * g.x_period)
    throw std::invalid_argument("energy_report: Omega does not fit in the spatial torus");
  if (st.R > g.v_halfwidth - 1.0)
    throw std::invalid_argument("energy_report: R must stay 1 away from the velocity box edge");

  EnergyReport rep;
  rep.delta = std::min(st.S - st.T, st.omega_radius - st.omega_bar_radius);
  const Ball omega{st.x_center, st.omega_radius}, omega_bar{st.x_center, st.omega_bar_radius};
  const auto wQ = time_weights(g, st.T, 0.0), wQbar = time_weights(g, st.S, 0.0);
  const std::size_t Nv = g.v_count();
  std::vector<double> psi_v(Nv);
  for (std::size_t iv = 0; iv < Nv; ++iv) psi_v[iv] = psi.psi(norm(g.v_point(iv), n));

  // Precondition and Q integrals.
  const double dxn = std::pow(g.dx(), n), dvn = box.cell();
  double int_f2 = 0, int_f1 = 0;
  const bool has_source = !a.is_zero();
  const double r = a.r, rstar = std::isfinite(r) ? r / (r - 1.0) : 1.0;
  double a_r = 0, a_sup = 0, fp_rstar = 0, fp_sup = 0;
  for (int it = 0; it < g.nt; ++it) {
    if (wQ[it] == 0) continue;
    const double t = g.t_at(it);
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const Vec x = g.x_point(ix);
      if (!omega.contains(x, n)) continue;
      const auto fs = f.vslice(it, ix);
      for (std::size_t iv = 0; iv < Nv; ++iv) {
        const Vec v = g.v_point(iv);
        const double fp = std::max(fs[iv] - psi_v[iv], 0.0);
        if (fp > 0 && norm(v, n) >= st.R)
          throw PreconditionError("energy_report: f exceeds psi outside B_R", where(t, x, v, n));
        const double w = wQ[it] * dxn * dvn;
        int_f2 += w * fp * fp;
        int_f1 += w * fp;
        if (has_source) {
          const double av = std::abs(a(t, x, v));
          if (std::isfinite(r)) {
            a_r += w * std::pow(av, r);
            fp_rstar += w * std::pow(fp, rstar);
          } else {
            a_sup = std::max(a_sup, av);
            fp_rstar += w * fp;
          }
          fp_sup = std::max(fp_sup, fp);
        }
      }
    }
  }
  if (int_f1 == 0) {
    rep.vacuous = true;
    return rep;
  }
  rep.sup_L_psi = sup_psi ? *sup_psi : sup_L_psi(k, psi, box, st.R);
  rep.rhs_f2 = st.R * int_f2 / rep.delta;
  rep.rhs_Lpsi = rep.sup_L_psi * int_f1 / rep.delta;
  if (has_source) {
    const double a_norm = std::isfinite(r) ? std::pow(a_r, 1.0 / r) : a_sup;
    const double fp_norm = std::isfinite(r) ? std::pow(fp_rstar, 1.0 / rstar) : fp_rstar;
    rep.rhs_source = a_norm * fp_norm / rep.delta;
  }

  // Qbar integrals of B(f+, f+) and -B(f+, f-).
  CollisionOperator op(k, box, BoundaryMode::ZeroExtension);
  std::vector<double> ext_cache(Nv, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> fp(Nv), fm(Nv);
  for (int it = 0; it < g.nt; ++it) {
    if (wQbar[it] == 0) continue;
    const double t = g.t_at(it);
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const Vec x = g.x_point(ix);
      if (!omega_bar.contains(x, n)) continue;
      const auto fs = f.vslice(it, ix);
      bool any = false;
      for (std::size_t iv = 0; iv < Nv; ++iv) {
        fp[iv] = std::max(fs[iv] - psi_v[iv], 0.0);
        fm[iv] = std::max(psi_v[iv] - fs[iv], 0.0);
        any = any || fp[iv] > 0;
      }
      if (!any) continue;
      const double w = wQbar[it] * dxn;
      rep.lhs_B += w * op.bilinear(t, x, fp, fp);
      double cross = -op.bilinear(t, x, fp, fm);
      for (std::size_t iv = 0; iv < Nv; ++iv) {
        if (fp[iv] == 0) continue;
        double e;
        if (k.translation_invariant()) {
          if (std::isnan(ext_cache[iv]))
            ext_cache[iv] = exterior_psi_pairing(k, psi, box, 0.0, Vec{}, g.v_point(iv));
          e = ext_cache[iv];
        } else {
          e = exterior_psi_pairing(k, psi, box, t, x, g.v_point(iv));
        }
        cross += fp[iv] * e * dvn;
      }
      rep.lhs_cross += w * cross;
    }
  }
  const double rhs = rep.rhs_total();
  rep.fitted_C = rhs > 0 ? (rep.lhs_B + rep.lhs_cross) / rhs : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// De Giorgi levels

LevelReport degiorgi_levels(const Field& f, const CutoffFamily& fam, int k_max) {
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  if (k_max < 0) throw std::invalid_argument("degiorgi_levels: k_max must be non-negative");
  if (g.t0 > -2.0 + 1e-12 || g.t1 < -1e-12 || 0.5 * g.x_period < 2.0 || g.v_halfwidth < 2.0)
    throw std::invalid_argument("degiorgi_levels: field must cover [-2,0] x B_2 x B_2");
  LevelReport rep;
  const std::size_t Nv = g.v_count();
  std::vector<double> radius(Nv);
  for (std::size_t iv = 0; iv < Nv; ++iv) radius[iv] = norm(g.v_point(iv), n);
  const double cell = g.cell_volume();
  const double eps = 1e-9 * g.dt();
  for (int k = 0; k <= k_max; ++k) {
    const double Tk = -1.0 - std::ldexp(1.0, -k);
    const Ball Bk{Vec{}, 1.0 + std::ldexp(1.0, -k)};
    double E = 0;
    for (int it = 0; it < g.nt; ++it) {
      const double t = g.t_at(it);
      if (t < Tk - eps || t > eps) continue;
      for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
        if (!Bk.contains(g.x_point(ix), n)) continue;
        const auto fs = f.vslice(it, ix);
        for (std::size_t iv = 0; iv < Nv; ++iv) {
          const double fk = fs[iv] - fam.psi_k(k, radius[iv]);
          if (fk > 0) E += fk * fk;
          if (k >= 1) {
            ++rep.indicator_checked;
            const double prev = std::max(fs[iv] - fam.psi_k(k - 1, radius[iv]), 0.0);
            if (fk > 0 && 1.0 > std::ldexp(prev, k + 1)) ++rep.indicator_violations;
          }
        }
      }
    }
    rep.E.push_back(E * cell);
    if (k > 0 && rep.E[k] > rep.E[k - 1]) rep.monotone = false;
    if (rep.first_below < 0 && rep.E[k] < 1e-12) rep.first_below = k;
  }
  // log E_k = k log C + gamma log E_{k-3}, least squares without intercept.
  double sxx = 0, sxy = 0, syy = 0, sxz = 0, syz = 0;
  int used = 0;
  for (int k = 3; k <= k_max; ++k) {
    if (!(rep.E[k] > 0 && rep.E[k - 3] > 0)) continue;
    const double x1 = k, x2 = std::log(rep.E[k - 3]), z = std::log(rep.E[k]);
    sxx += x1 * x1;
    sxy += x1 * x2;
    syy += x2 * x2;
    sxz += x1 * z;
    syz += x2 * z;
    ++used;
  }
  const double det = sxx * syy - sxy * sxy;
  if (used >= 2 && std::abs(det) > 1e-12 * (sxx * syy + 1e-300)) {
    rep.fit_available = true;
    rep.fit_C = std::exp((sxz * syy - syz * sxy) / det);
    rep.fit_gamma = (sxx * syz - sxy * sxz) / det;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------
// second De Giorgi lemma

void UniversalConstants::validate() const {
  for (double v : {delta0, gamma0, theta0, lambda})
    if (!(v > 0 && v < 1)) throw std::invalid_argument("universal constants must lie in (0,1)");
  if (!(theta0 < 1.0 / 3.0)) throw std::invalid_argument("theta0 must be below 1/3");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Vacuous: return "vacuous";
  }
  return "?";
}

DG2Report dg2_measures(const Field& f, const CutoffFamily& fam, const UniversalConstants& uc) {
  uc.validate();
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  if (g.t0 > -6.0 + 1e-12 || g.t1 < -1e-12 || 0.5 * g.x_period < 3.0 || g.v_halfwidth < 3.0)
    throw std::invalid_argument("dg2_measures: field must cover Q_ext x B_3");
  const double eps = 1e-9 * g.dt();
  const double cell = g.cell_volume();
  const Ball B2{Vec{}, 2.0}, B3{Vec{}, 3.0};
  const double level = 1.0 - uc.theta0;
  DG2Report rep;
  int early_slices = 0;
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    if (t < -6.0 - eps || t > eps) continue;
    const bool early = t >= -5.0 - eps && t <= -4.0 + eps;
    const bool late = t >= -2.0 - eps;
    const bool inner = t >= -5.0 - eps;
    if (early) ++early_slices;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const Vec x = g.x_point(ix);
      if (!B3.contains(x, n)) continue;
      const bool in_b2 = B2.contains(x, n);
      const auto fs = f.vslice(it, ix);
      for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
        const Vec v = g.v_point(iv);
        const double fv = fs[iv];
        if (std::abs(fv) > 1.0 + fam.psi_theta(uc.theta0, v))
          throw PreconditionError("dg2_measures: |f| exceeds 1 + psi_theta0", where(t, x, v, n));
        if (!in_b2) continue;
        const double r = norm(v, n);
        if (early && r <= 2.0 && fv <= 0) rep.early_measure += cell;
        if (late && r <= 2.0 && fv >= level) rep.late_measure += cell;
        if (inner && r <= 3.0 && fv > 0 && fv < level) rep.between_measure += cell;
      }
    }
  }
  // |Q_early| |B_2| measured with the same cell counting as the level sets.
  double b2x = 0, b2v = 0;
  for (std::size_t ix = 0; ix < g.x_count(); ++ix)
    if (B2.contains(g.x_point(ix), n)) b2x += std::pow(g.dx(), n);
  for (std::size_t iv = 0; iv < g.v_count(); ++iv)
    if (norm(g.v_point(iv), n) <= 2.0) b2v += g.vbox().cell();
  rep.early_threshold = 0.5 * early_slices * g.dt() * b2x * b2v;
  rep.early_holds = rep.early_measure >= rep.early_threshold;
  rep.late_holds = rep.late_measure >= uc.delta0;
  rep.conclusion_holds = rep.between_measure >= uc.gamma0;
  if (rep.early_holds && rep.late_holds)
    rep.verdict = rep.conclusion_holds ? Verdict::Pass : Verdict::Fail;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// averaging

namespace {

/// d_t f and v.grad_x f separately.
std::pair<Field, Field> transport_parts(const Field& f) {
  const PhaseGrid& g = f.grid;
  if (g.nt < 5) throw std::invalid_argument("transport_derivative needs at least 5 slices");
  Field out(g), adv(g);
  const std::size_t Nx = g.x_count(), Nv = g.v_count();
  const double dt = g.dt();
  // time derivative, fourth order in the interior and at the ends
  for (int it = 0; it < g.nt; ++it) {
    for (std::size_t i = 0; i < g.slice_size(); ++i) {
      auto F = [&](int k) { return f.data[static_cast<std::size_t>(k) * g.slice_size() + i]; };
      double d;
      if (it >= 2 && it + 2 < g.nt) {
        d = (F(it - 2) - 8 * F(it - 1) + 8 * F(it + 1) - F(it + 2)) / (12 * dt);
      } else if (it < 2) {
        const int b = it;
        // one-sided fourth-order stencils
        if (b == 0)
          d = (-25 * F(0) + 48 * F(1) - 36 * F(2) + 16 * F(3) - 3 * F(4)) / (12 * dt);
        else
          d = (-3 * F(0) - 10 * F(1) + 18 * F(2) - 6 * F(3) + F(4)) / (12 * dt);
      } else {
        const int e = g.nt - 1;
        if (it == e)
          d = (25 * F(e) - 48 * F(e - 1) + 36 * F(e - 2) - 16 * F(e - 3) + 3 * F(e - 4)) / (12 * dt);
        else
          d = (3 * F(e) + 10 * F(e - 1) - 18 * F(e - 2) + 6 * F(e - 3) - F(e - 4)) / (12 * dt);
      }
      out.data[static_cast<std::size_t>(it) * g.slice_size() + i] = d;
    }
  }
  // v . grad_x spectrally
  const std::vector<int> xdims(g.n, g.nx);
  const fft::Batch batch{xdims, static_cast<int>(Nv), static_cast<int>(Nv), 1};
  std::vector<fft::cplx> buf(g.slice_size());
  for (int it = 0; it < g.nt; ++it) {
    const auto src = f.tslice(it);
    for (int axis = 0; axis < g.n; ++axis) {
      std::copy(src.begin(), src.end(), buf.begin());
      fft::transform(buf.data(), batch, fft::Direction::Forward);
      for (std::size_t q = 0; q < Nx; ++q) {
        const int j = g.n == 1 ? static_cast<int>(q)
                               : (axis == 0 ? static_cast<int>(q / g.nx) : static_cast<int>(q % g.nx));
        const int m = (2 * j == g.nx) ? 0 : (j < g.nx / 2 ? j : j - g.nx);
        const fft::cplx ik(0.0, 2.0 * kPi * m / g.x_period);
        for (std::size_t iv = 0; iv < Nv; ++iv) buf[q * Nv + iv] *= ik;
      }
      fft::transform(buf.data(), batch, fft::Direction::Backward);
      auto dst = adv.tslice(it);
      for (std::size_t ix = 0; ix < Nx; ++ix)
        for (std::size_t iv = 0; iv < Nv; ++iv)
          dst[ix * Nv + iv] += g.v_point(iv)[axis] * buf[ix * Nv + iv].real() / Nx;
    }
  }
  return {std::move(out), std::move(adv)};
}

}  // namespace

Field transport_derivative(const Field& f) {
  auto [dt, adv] = transport_parts(f);
  for (std::size_t i = 0; i < dt.data.size(); ++i) dt.data[i] += adv.data[i];
  return dt;
}

namespace {

/// C-infinity step: 0 for u <= 0, 1 for u >= 1.
double smooth_step(double u) {
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

/// 1 on [ia, ib], 0 outside [oa, ob].
double plateau(double t, double ia, double ib, double oa, double ob) {
  if (t < ia) return smooth_step((t - oa) / (ia - oa));
  if (t > ib) return smooth_step((ob - t) / (ob - ib));
  return 1.0;
}

}  // namespace

AveragingReport averaging_check(const Field& f, const Field& gsrc, std::span<const double> eta,
                                double m, const SpaceTimeBox& inner, const SpaceTimeBox& outer,
                                double tolerance) {
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  if (gsrc.data.size() != f.data.size()) throw std::invalid_argument("averaging_check: g shape");
  if (!(outer.t_a < inner.t_a && inner.t_b < outer.t_b && inner.x_radius < outer.x_radius))
    throw std::invalid_argument("averaging_check: inner region must sit inside the outer one");
  if (outer.t_a < g.t0 || outer.t_b > g.t1 || outer.x_radius > 0.5 * g.x_period)
    throw std::invalid_argument("averaging_check: outer region leaves the grid");
  AveragingReport rep;
  rep.alpha = 1.0 / (2.0 * (1.0 + m));

  // transport identity on the outer region, away from the two end slices on each side
  const auto [Df, Af] = transport_parts(f);
  auto in_outer = [&](const Vec& x) {
    for (int a = 0; a < n; ++a)
      if (std::abs(x[a] - outer.x_center[a]) > outer.x_radius) return false;
    return true;
  };
  double num = 0, den = 0;
  const double cell = g.cell_volume();
  double f2 = 0;
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    if (t < outer.t_a || t > outer.t_b) continue;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      if (!in_outer(g.x_point(ix))) continue;
      for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
        const std::size_t i = f.index(it, ix, iv);
        f2 += cell * f.data[i] * f.data[i];
        if (it < 2 || it + 2 >= g.nt) continue;
        const double res = Df.data[i] + Af.data[i] - gsrc.data[i];
        num += res * res;
        den += Df.data[i] * Df.data[i] + Af.data[i] * Af.data[i] + gsrc.data[i] * gsrc.data[i];
      }
    }
  }
  rep.transport_residual = den > 0 ? std::sqrt(num / den) : 0.0;
  if (rep.transport_residual > tolerance) {
    std::ostringstream os;
    os << "averaging_check: transport identity residual " << rep.transport_residual
       << " exceeds tolerance " << tolerance;
    throw std::runtime_error(os.str());
  }

  // ||(1 - Delta_v)^{-m/2} g|| on the outer region
  double g2 = 0;
  const MultiplierOp bessel{MultiplierKind::BesselPow, -m};
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    if (t < outer.t_a || t > outer.t_b) continue;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      if (!in_outer(g.x_point(ix))) continue;
      const auto gs = gsrc.vslice(it, ix);
      bool any = false;
      for (double v : gs) any = any || v != 0;
      if (!any) continue;
      const auto bg = apply_multiplier(bessel, gs, g.vbox());
      for (double v : bg) g2 += cell * v * v;
    }
  }
  rep.rhs = std::sqrt(f2) + std::sqrt(g2);

  // windowed H^alpha norm of rho, zero padded in t
  const auto rho = velocity_average(f, eta);
  const std::size_t Nx = g.x_count();
  const int Tpad = 2 * g.nt;
  std::vector<int> dims{Tpad};
  for (int a = 0; a < n; ++a) dims.push_back(g.nx);
  std::vector<fft::cplx> buf(static_cast<std::size_t>(Tpad) * Nx, 0.0);
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    const double wt = plateau(t, inner.t_a, inner.t_b, outer.t_a, outer.t_b);
    if (wt == 0) continue;
    for (std::size_t ix = 0; ix < Nx; ++ix) {
      const Vec x = g.x_point(ix);
      double wx = 1;
      for (int a = 0; a < n; ++a) {
        const double d = x[a] - inner.x_center[a];
        wx *= plateau(d, -inner.x_radius, inner.x_radius, -outer.x_radius, outer.x_radius);
      }
      buf[static_cast<std::size_t>(it) * Nx + ix] = wt * wx * rho[it * Nx + ix];
    }
  }
  fft::transform(buf.data(), {dims, 1, 1, 0}, fft::Direction::Forward);
  const double Lt = Tpad * g.dt();
  double acc = 0;
  for (std::size_t q = 0; q < buf.size(); ++q) {
    const int jt = static_cast<int>(q / Nx);
    const std::size_t qx = q % Nx;
    const int mt = jt <= Tpad / 2 ? jt : jt - Tpad;
    double z2 = std::pow(2.0 * kPi * mt / Lt, 2);
    const int j0 = n == 1 ? static_cast<int>(qx) : static_cast<int>(qx / g.nx);
    const int j1 = n == 1 ? 0 : static_cast<int>(qx % g.nx);
    for (int j : n == 1 ? std::vector<int>{j0} : std::vector<int>{j0, j1}) {
      const int mx = j <= g.nx / 2 ? j : j - g.nx;
      z2 += std::pow(2.0 * kPi * mx / g.x_period, 2);
    }
    acc += std::pow(1.0 + z2, rep.alpha) * std::norm(buf[q]);
  }
  const double cell_tx = g.dt() * std::pow(g.dx(), n);
  rep.lhs = std::sqrt(acc * cell_tx / static_cast<double>(buf.size()));
  if (rep.rhs == 0) {
    rep.vacuous = true;
    return rep;
  }
  rep.ratio = rep.lhs / rep.rhs;
  return rep;
}

}  // namespace kfp
