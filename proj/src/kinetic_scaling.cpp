#include "kfp/kinetic_scaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kfp/fracops.hpp"
#include "kfp/lattice.hpp"

namespace kfp {

void ScalingParams::validate() const {
  if (!(epsilon > 0 && epsilon <= 1)) throw std::invalid_argument("epsilon must lie in (0,1]");
  if (!(s > 0 && s < 1)) throw std::invalid_argument("s must lie in (0,1)");
  if (!(r >= 1)) throw std::invalid_argument("r must be at least 1");
}

double ScalingParams::source_norm_factor(int n) const {
  const double tail = std::isfinite(r) ? (n + 1.0 + n / s) / r : 0.0;
  return std::pow(epsilon, 2.0 * s * (1.0 - tail));
}

namespace {

struct Stencil {
  int idx[4];
  double w[4];
  int m = 0;
};

/// Lagrange weights at fractional position u for nodes base..base+m-1.
Stencil lagrange(double u, int base, int m) {
  Stencil st;
  st.m = m;
  for (int a = 0; a < m; ++a) {
    double w = 1;
    for (int b = 0; b < m; ++b)
      if (b != a) w *= (u - (base + b)) / static_cast<double>(a - b);
    st.idx[a] = base + a;
    st.w[a] = w;
  }
  return st;
}

Stencil clamped(double u, int count, const char* axis, double value) {
  const double tol = 1e-9;
  if (!(u >= -tol && u <= count - 1 + tol)) {
    std::ostringstream os;
    os << "sample " << axis << "=" << value << " lies outside the sampled range";
    throw std::out_of_range(os.str());
  }
  const int m = std::min(4, count);
  int base = static_cast<int>(std::floor(u)) - 1;
  base = std::clamp(base, 0, count - m);
  return lagrange(u, base, m);
}

Stencil periodic(double u, int count) {
  const int base = static_cast<int>(std::floor(u)) - 1;
  Stencil st = lagrange(u, base, 4);
  for (int a = 0; a < 4; ++a) st.idx[a] = ((st.idx[a] % count) + count) % count;
  return st;
}

double wrap(double x, double period) {
  return x - period * std::floor((x + 0.5 * period) / period);
}

}  // namespace

double interpolate(const Field& f, double t, const Vec& x, const Vec& v) {
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  Stencil st_t;
  if (g.nt == 1) {
    if (std::abs(t - g.t0) > 1e-12) throw std::out_of_range("sample time outside the single slice");
    st_t.m = 1;
    st_t.idx[0] = 0;
    st_t.w[0] = 1;
  } else {
    st_t = clamped((t - g.t0) / g.dt(), g.nt, "t", t);
  }
  Stencil st_x[2], st_v[2];
  for (int a = 0; a < n; ++a) {
    st_x[a] = periodic((wrap(x[a], g.x_period) + 0.5 * g.x_period) / g.dx(), g.nx);
    st_v[a] = clamped((v[a] + g.v_halfwidth) / g.dv(), g.nv, "v", v[a]);
  }
  auto v_sum = [&](int it, std::size_t ix) {
    double acc = 0;
    if (n == 1) {
      for (int c = 0; c < st_v[0].m; ++c) acc += st_v[0].w[c] * f.at(it, ix, st_v[0].idx[c]);
      return acc;
    }
    for (int c = 0; c < st_v[0].m; ++c)
      for (int d = 0; d < st_v[1].m; ++d)
        acc += st_v[0].w[c] * st_v[1].w[d] *
               f.at(it, ix, static_cast<std::size_t>(st_v[0].idx[c]) * g.nv + st_v[1].idx[d]);
    return acc;
  };
  double acc = 0;
  for (int a = 0; a < st_t.m; ++a) {
    const int it = st_t.idx[a];
    double xs = 0;
    if (n == 1) {
      for (int b = 0; b < 4; ++b) xs += st_x[0].w[b] * v_sum(it, st_x[0].idx[b]);
    } else {
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          xs += st_x[0].w[b] * st_x[1].w[c] *
                v_sum(it, static_cast<std::size_t>(st_x[0].idx[b]) * g.nx + st_x[1].idx[c]);
    }
    acc += st_t.w[a] * xs;
  }
  return acc;
}

namespace {

template <class Map>
Field resample(const Field& f, const PhaseGrid& target, Map map) {
  if (target.n != f.grid.n) throw std::invalid_argument("target grid dimension differs");
  Field out(target);
  for (int it = 0; it < target.nt; ++it) {
    const double t = target.t_at(it);
    for (std::size_t ix = 0; ix < target.x_count(); ++ix) {
      const Vec x = target.x_point(ix);
      for (std::size_t iv = 0; iv < target.v_count(); ++iv) {
        const PhasePoint p = map(t, x, target.v_point(iv));
        out.at(it, ix, iv) = interpolate(f, p.t, p.x, p.v);
      }
    }
  }
  out.metadata = f.metadata;
  return out;
}

}  // namespace

Field scale_field(const Field& f, const ScalingParams& p, const PhaseGrid& target) {
  p.validate();
  const double et = std::pow(p.epsilon, 2 * p.s), ex = std::pow(p.epsilon, 1 + 2 * p.s);
  const int n = f.grid.n;
  return resample(f, target, [&](double t, const Vec& x, const Vec& v) {
    PhasePoint q{et * t, {}, {}};
    for (int a = 0; a < n; ++a) {
      q.x[a] = ex * x[a];
      q.v[a] = p.epsilon * v[a];
    }
    return q;
  });
}

double scaled_kernel_value(const Kernel& k, double eps, double t, const Vec& x, const Vec& v,
                           const Vec& w) {
  const int n = k.n();
  const double s = k.s();
  Vec xs{}, vs{}, ws{};
  for (int a = 0; a < n; ++a) {
    xs[a] = std::pow(eps, 1 + 2 * s) * x[a];
    vs[a] = eps * v[a];
    ws[a] = eps * w[a];
  }
  return std::pow(eps, n + 2 * s) * k(std::pow(eps, 2 * s) * t, xs, vs, ws);
}

Kernel scale_kernel(const Kernel& k, double eps) {
  if (!(eps > 0 && eps <= 1)) throw std::invalid_argument("epsilon must lie in (0,1]");
  switch (k.family()) {
    case KernelFamily::Homogeneous: return k;
    case KernelFamily::Truncated:
      return Kernel::truncated(k.n(), k.s(), k.kappa(), k.c(), k.truncation_radius() / eps);
    default: break;
  }
  const double s = k.s();
  const int n = k.n();
  auto m = [k, eps, s, n](double t, const Vec& x, const Vec& v, const Vec& w) {
    Vec xs{}, vs{}, ws{};
    for (int a = 0; a < n; ++a) {
      xs[a] = std::pow(eps, 1 + 2 * s) * x[a];
      vs[a] = eps * v[a];
      ws[a] = eps * w[a];
    }
    return k.modulation(std::pow(eps, 2 * s) * t, xs, vs, ws);
  };
  return Kernel::custom(n, s, k.kappa(), k.c(), m, k.spec().r_lo / eps, k.spec().r_hi / eps);
}

Source scale_source(const Source& a, const ScalingParams& p) {
  p.validate();
  if (a.is_zero()) return a;
  Source out = a;
  out.kind = a.kind + "-scaled";
  const double e = p.epsilon, s = p.s;
  out.fn = [fn = a.fn, e, s](double t, const Vec& x, const Vec& v) {
    Vec xs{}, vs{};
    for (int q = 0; q < kMaxDim; ++q) {
      xs[q] = std::pow(e, 1 + 2 * s) * x[q];
      vs[q] = e * v[q];
    }
    return std::pow(e, 2 * s) * fn(std::pow(e, 2 * s) * t, xs, vs);
  };
  return out;
}

double source_norm_box(const Source& a, int n, double r, double t_a, double t_b, double xr,
                       double vr, int nodes, int panels) {
  auto axis = [&](double lo, double hi, std::vector<double>& x, std::vector<double>& w) {
    x.clear();
    w.clear();
    const double step = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      std::vector<double> px, pw;
      gauss_legendre(nodes, lo + p * step, lo + (p + 1) * step, px, pw);
      x.insert(x.end(), px.begin(), px.end());
      w.insert(w.end(), pw.begin(), pw.end());
    }
  };
  std::vector<double> tx, tw, xx, xw, vx, vw;
  axis(t_a, t_b, tx, tw);
  axis(-xr, xr, xx, xw);
  axis(-vr, vr, vx, vw);
  const std::size_t m = xx.size();
  const std::size_t cnt = n == 1 ? m : m * m;
  double acc = 0;
  for (std::size_t i = 0; i < tx.size(); ++i)
    for (std::size_t jx = 0; jx < cnt; ++jx) {
      const Vec x = n == 1 ? Vec{xx[jx], 0} : Vec{xx[jx / m], xx[jx % m]};
      const double wx = n == 1 ? xw[jx] : xw[jx / m] * xw[jx % m];
      for (std::size_t jv = 0; jv < cnt; ++jv) {
        const Vec v = n == 1 ? Vec{vx[jv], 0} : Vec{vx[jv / m], vx[jv % m]};
        const double wv = n == 1 ? vw[jv] : vw[jv / m] * vw[jv % m];
        const double val = std::abs(a(tx[i], x, v));
        if (std::isfinite(r))
          acc += tw[i] * wx * wv * std::pow(val, r);
        else
          acc = std::max(acc, val);
      }
    }
  return std::isfinite(r) ? std::pow(acc, 1.0 / r) : acc;
}

SourceRatio measure_source_ratio(const Source& a, int n, const ScalingParams& p) {
  p.validate();
  const Source abar = scale_source(a, p);
  const double e = p.epsilon, s = p.s;
  const int nodes = n == 1 ? 12 : 8, panels = n == 1 ? 4 : 2;
  const double bar = source_norm_box(abar, n, p.r, -1.0, 0.0, 1.0, 1.0, nodes, panels);
  const double orig = source_norm_box(a, n, p.r, -std::pow(e, 2 * s), 0.0, std::pow(e, 1 + 2 * s),
                                      e, nodes + 3, panels);
  SourceRatio out;
  out.predicted = p.source_norm_factor(n);
  out.measured = orig > 0 ? bar / orig : 0.0;
  out.relative_error = std::abs(out.measured - out.predicted) / out.predicted;
  return out;
}

Field translate_field(const Field& f, const PhasePoint& z0, const PhaseGrid& target) {
  const int n = f.grid.n;
  return resample(f, target, [&](double t, const Vec& x, const Vec& v) {
    PhasePoint q{z0.t + t, {}, {}};
    for (int a = 0; a < n; ++a) {
      q.x[a] = z0.x[a] + x[a] + z0.v[a] * t;
      q.v[a] = z0.v[a] + v[a];
    }
    return q;
  });
}

PhasePoint compose(const PhasePoint& a, const PhasePoint& b, int n) {
  PhasePoint c{a.t + b.t, {}, {}};
  for (int q = 0; q < n; ++q) {
    c.x[q] = a.x[q] + b.x[q] + a.v[q] * b.t;
    c.v[q] = a.v[q] + b.v[q];
  }
  return c;
}

bool KineticCylinder::contains(const PhasePoint& p, double x_period) const {
  const double dt = p.t - center.t;
  if (std::abs(dt) > std::pow(rho, 2 * s) * (1 + 1e-12)) return false;
  double dx2 = 0, dv2 = 0;
  for (int a = 0; a < n; ++a) {
    double d = p.x[a] - center.x[a] - dt * center.v[a];
    if (x_period > 0) d = wrap(d, x_period);
    dx2 += d * d;
    dv2 += (p.v[a] - center.v[a]) * (p.v[a] - center.v[a]);
  }
  const double rx = std::pow(rho, 1 + 2 * s);
  return dx2 <= rx * rx * (1 + 1e-12) && dv2 <= rho * rho * (1 + 1e-12);
}

OscillationProfile oscillation_profile(const Field& f, const PhasePoint& z0,
                                       const OscillationOptions& opt) {
  const PhaseGrid& g = f.grid;
  const int n = g.n;
  if (!(opt.lambda > 0 && opt.lambda < 1)) throw std::invalid_argument("lambda must lie in (0,1)");
  if (!(opt.rho0 > 0) || opt.J < 0) throw std::invalid_argument("rho0 and J must be positive");
  const double ht = std::pow(opt.rho0, 2 * opt.s);
  const double m = opt.margin_cells;
  double vmax = 0;
  for (int a = 0; a < n; ++a) vmax = std::max(vmax, std::abs(z0.v[a]));
  if (z0.t - ht < g.t0 + m * g.dt() - 1e-12 || z0.t + ht > g.t1 - m * g.dt() + 1e-12 ||
      vmax + opt.rho0 > g.v_halfwidth - m * g.dv() ||
      std::pow(opt.rho0, 1 + 2 * opt.s) + ht * vmax > 0.5 * g.x_period - m * g.dx())
    throw std::invalid_argument("oscillation_profile: outer cylinder leaves the interior");

  OscillationProfile prof;
  prof.center = z0;
  for (int j = 0; j <= opt.J; ++j) {
    const double rho = opt.rho0 * std::pow(opt.lambda, j);
    if (rho < g.dv() || (g.nt > 1 && std::pow(rho, 2 * opt.s) < g.dt())) break;
    KineticCylinder cyl{z0, rho, opt.s, n};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t count = 0;
    for (int it = 0; it < g.nt; ++it) {
      const double t = g.t_at(it);
      if (std::abs(t - z0.t) > std::pow(rho, 2 * opt.s) * (1 + 1e-12)) continue;
      for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
        const PhasePoint px{t, g.x_point(ix), z0.v};
        if (!cyl.contains(px, g.x_period)) continue;
        const auto fs = f.vslice(it, ix);
        for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
          if (!cyl.contains({t, px.x, g.v_point(iv)}, g.x_period)) continue;
          lo = std::min(lo, fs[iv]);
          hi = std::max(hi, fs[iv]);
          ++count;
        }
      }
    }
    if (count == 0) break;
    prof.rho.push_back(rho);
    prof.osc.push_back(hi - lo);
    prof.samples.push_back(count);
  }
  prof.usable = static_cast<int>(prof.osc.size());
  if (prof.usable < 4) {
    std::ostringstream os;
    os << "oscillation_profile: only " << prof.usable << " usable scales (need 4)";
    throw std::runtime_error(os.str());
  }
  const double top = *std::max_element(prof.osc.begin(), prof.osc.end());
  if (top <= 1e-14) {
    prof.saturated = true;
    prof.alpha = std::numeric_limits<double>::infinity();
    prof.alpha_r2 = 1;
    prof.lambda_eff = 2;
    prof.decay_holds = true;
    return prof;
  }
  std::vector<double> xs, ys;
  for (int j = 0; j < prof.usable; ++j) {
    if (prof.osc[j] <= 1e-14 * top) break;
    xs.push_back(std::log(prof.rho[j]));
    ys.push_back(std::log(prof.osc[j]));
  }
  if (xs.size() >= 2) {
    const auto [slope, intercept] = fit_line(xs, ys);
    prof.alpha = slope;
    double ss_res = 0, ss_tot = 0, mean = 0;
    for (double y : ys) mean += y / ys.size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ss_res += std::pow(ys[i] - (slope * xs[i] + intercept), 2);
      ss_tot += std::pow(ys[i] - mean, 2);
    }
    prof.alpha_r2 = ss_tot > 0 ? 1 - ss_res / ss_tot : 1;
  }
  double lam = 2;
  for (int j = 0; j + 1 < prof.usable; ++j) {
    if (prof.osc[j] <= 0) continue;
    lam = std::min(lam, 2 * (1 - prof.osc[j + 1] / prof.osc[j]));
  }
  prof.lambda_eff = lam;
  prof.decay_holds = lam > 0;
  return prof;
}

std::vector<OscillationProfile> oscillation_profiles(const Field& f,
                                                     const std::vector<PhasePoint>& centers,
                                                     const OscillationOptions& opt,
                                                     int workers) {
  std::vector<OscillationProfile> out(centers.size());
  std::vector<std::exception_ptr> errors(centers.size());
  const int w = workers > 0 ? workers : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int id = 0; id < w; ++id)
    pool.emplace_back([&, id] {
      for (std::size_t i = id; i < centers.size(); i += w) {
        try {
          out[i] = oscillation_profile(f, centers[i], opt);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_profile_csv(const std::vector<OscillationProfile>& profiles, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "center,t0,x0,v0,j,rho,osc,samples,alpha,alpha_r2,lambda_eff\n";
  os.precision(17);
  for (std::size_t c = 0; c < profiles.size(); ++c) {
    const auto& p = profiles[c];
    for (std::size_t j = 0; j < p.osc.size(); ++j)
      os << c << ',' << p.center.t << ',' << p.center.x[0] << ',' << p.center.v[0] << ',' << j
         << ',' << p.rho[j] << ',' << p.osc[j] << ',' << p.samples[j] << ',' << p.alpha << ','
         << p.alpha_r2 << ',' << p.lambda_eff << '\n';
  }
}

}  // namespace kfp
