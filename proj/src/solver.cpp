#include "kfp/solver.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include "kfp/fft.hpp"
#include "kfp/fracops.hpp"

namespace kfp {

namespace {

constexpr double kPi = std::numbers::pi;

double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

double phi2(double z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0;
  return (std::expm1(z) - z) / (z * z);
}

}  // namespace

Field sample_source(const Source& a, const PhaseGrid& g) {
  Field out(g);
  if (a.is_zero()) return out;
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const Vec x = g.x_point(ix);
      for (std::size_t iv = 0; iv < g.v_count(); ++iv) out.at(it, ix, iv) = a(t, x, g.v_point(iv));
    }
  }
  return out;
}

Stepper parse_stepper(const std::string& name) {
  if (name == "spectral-exponential") return Stepper::SpectralExponential;
  if (name == "imex") return Stepper::Imex;
  if (name == "explicit-rk2") return Stepper::ExplicitRK2;
  throw std::invalid_argument("unknown stepper '" + name +
                              "' (expected spectral-exponential, imex, explicit-rk2)");
}

std::string to_string(Stepper s) {
  switch (s) {
    case Stepper::SpectralExponential: return "spectral-exponential";
    case Stepper::Imex: return "imex";
    case Stepper::ExplicitRK2: return "explicit-rk2";
  }
  return "?";
}

double RunConfig::dt() const {
  if (grid.nt < 2) throw std::invalid_argument("run needs at least two stored time slices");
  if (record_every < 1) throw std::invalid_argument("record_every must be positive");
  return (grid.t1 - grid.t0) / (static_cast<double>(grid.nt - 1) * record_every);
}

Integrator::Integrator(const RunConfig& cfg)
    : cfg_(cfg), full_(cfg.kernel, cfg.grid.vbox(), BoundaryMode::Periodic) {
  const PhaseGrid& g = cfg_.grid;
  if (cfg_.initial.size() != g.slice_size())
    throw std::invalid_argument("initial slice does not match the grid");
  if (cfg_.kernel.n() != g.n) throw std::invalid_argument("kernel and grid dimensions differ");
  dt_ = cfg_.dt();
  xdims_.assign(g.n, g.nx);
  kx_.resize(g.x_count() * 2, 0.0);
  for (std::size_t q = 0; q < g.x_count(); ++q) {
    const int j0 = g.n == 1 ? static_cast<int>(q) : static_cast<int>(q / g.nx);
    const int j1 = g.n == 1 ? 0 : static_cast<int>(q % g.nx);
    auto wave = [&](int j) {
      const int m = j <= g.nx / 2 ? j : j - g.nx;
      return 2.0 * kPi * m / g.x_period;
    };
    kx_[2 * q] = wave(j0);
    kx_[2 * q + 1] = g.n == 2 ? wave(j1) : 0.0;
  }
  if (!cfg_.collisions) return;

  const double h2s = std::pow(g.vbox().h(), 2.0 * cfg_.kernel.s());
  double stiffness = 0;  // coefficient of the explicitly treated singular part
  switch (cfg_.stepper) {
    case Stepper::SpectralExponential:
      if (!cfg_.kernel.translation_invariant())
        throw std::invalid_argument("spectral-exponential needs a translation-invariant kernel");
      implicit_symbol_ = full_.symbol();
      break;
    case Stepper::Imex: {
      const double c_low =
          std::isnan(cfg_.imex_c_low) ? 1.0 / cfg_.kernel.kappa() : cfg_.imex_c_low;
      low_ = std::make_unique<CollisionOperator>(
          Kernel::homogeneous(g.n, cfg_.kernel.s(), cfg_.kernel.kappa(), c_low), g.vbox(),
          BoundaryMode::Periodic);
      implicit_symbol_ = low_->symbol();
      stiffness = cfg_.kernel.kappa() - c_low;
      break;
    }
    case Stepper::ExplicitRK2: stiffness = cfg_.kernel.kappa(); break;
  }
  if (stiffness > 0) {
    const double limit = explicit_stability_limit(g.n, cfg_.kernel.s());
    if (!(cfg_.c_stab > 0) || cfg_.c_stab > limit) {
      std::ostringstream os;
      os << "c_stab " << cfg_.c_stab << " exceeds the explicit stability limit " << limit;
      throw std::invalid_argument(os.str());
    }
    const double dt_max = cfg_.c_stab * h2s / stiffness;
    cfl_margin_ = 1.0 - dt_ / dt_max;
    if (dt_ > dt_max) {
      std::ostringstream os;
      os << "CFL violation: dt " << dt_ << " exceeds c_stab dv^{2s}/kappa = " << dt_max;
      throw std::runtime_error(os.str());
    }
  }
}

void Integrator::transport(std::vector<double>& state, double tau) const {
  const PhaseGrid& g = cfg_.grid;
  const std::size_t Nx = g.x_count(), Nv = g.v_count();
  std::vector<fft::cplx> buf(state.begin(), state.end());
  const fft::Batch batch{xdims_, static_cast<int>(Nv), static_cast<int>(Nv), 1};
  fft::transform(buf.data(), batch, fft::Direction::Forward);
  for (std::size_t q = 0; q < Nx; ++q) {
    const double k0 = kx_[2 * q], k1 = kx_[2 * q + 1];
    for (std::size_t iv = 0; iv < Nv; ++iv) {
      const Vec v = g.v_point(iv);
      const double phase = -(k0 * v[0] + k1 * v[1]) * tau;
      buf[q * Nv + iv] *= std::polar(1.0, phase);
    }
  }
  fft::transform(buf.data(), batch, fft::Direction::Backward);
  const double scale = 1.0 / static_cast<double>(Nx);
  for (std::size_t i = 0; i < state.size(); ++i) state[i] = buf[i].real() * scale;
}

void Integrator::apply_explicit(std::span<const double> f, std::span<double> out, double t,
                                const Vec& x) const {
  full_.apply(t, x, f, out);
  if (low_) {
    std::vector<double> tmp(f.size());
    low_->apply(t, x, f, tmp);
    for (std::size_t i = 0; i < f.size(); ++i) out[i] -= tmp[i];
  }
}

void Integrator::collide_slice(std::span<double> f, double t, const Vec& x, std::size_t) const {
  const PhaseGrid& g = cfg_.grid;
  const std::size_t Nv = g.v_count();
  const double dt = dt_;
  const Source& a = cfg_.source;
  auto source_at = [&](double tt, std::vector<double>& out) {
    out.assign(Nv, 0.0);
    if (a.is_zero()) return;
    for (std::size_t iv = 0; iv < Nv; ++iv) out[iv] = a(tt, x, g.v_point(iv));
  };
  const std::vector<int> vdims(g.n, g.nv);
  const double inv = 1.0 / static_cast<double>(Nv);
  auto to_hat = [&](std::span<const double> u) {
    std::vector<fft::cplx> h(u.begin(), u.end());
    fft::transform(h.data(), {vdims, 1, 1, 0}, fft::Direction::Forward);
    return h;
  };
  auto from_hat = [&](std::vector<fft::cplx>& h, std::span<double> u) {
    fft::transform(h.data(), {vdims, 1, 1, 0}, fft::Direction::Backward);
    for (std::size_t i = 0; i < Nv; ++i) u[i] = h[i].real() * inv;
  };

  if (!cfg_.collisions) {
    std::vector<double> src;
    source_at(t + 0.5 * dt, src);
    for (std::size_t i = 0; i < Nv; ++i) f[i] += dt * src[i];
    return;
  }
  switch (cfg_.stepper) {
    case Stepper::SpectralExponential: {
      std::vector<double> src;
      source_at(t + 0.5 * dt, src);
      auto fh = to_hat(f);
      auto sh = to_hat(src);
      for (std::size_t q = 0; q < Nv; ++q) {
        const double z = implicit_symbol_[q] * dt;
        fh[q] = std::exp(z) * fh[q] + dt * phi1(z) * sh[q];
      }
      from_hat(fh, f);
      return;
    }
    case Stepper::Imex: {
      // ETD2RK: exponential in the spectral part, explicit remainder plus source.
      std::vector<double> n0(Nv), n1(Nv), src;
      apply_explicit(f, n0, t, x);
      source_at(t, src);
      for (std::size_t i = 0; i < Nv; ++i) n0[i] += src[i];
      auto fh = to_hat(f);
      auto n0h = to_hat(n0);
      std::vector<fft::cplx> ah(Nv);
      for (std::size_t q = 0; q < Nv; ++q) {
        const double z = implicit_symbol_[q] * dt;
        ah[q] = std::exp(z) * fh[q] + dt * phi1(z) * n0h[q];
      }
      std::vector<double> a_stage(Nv);
      auto ah_copy = ah;
      from_hat(ah_copy, a_stage);
      apply_explicit(a_stage, n1, t + dt, x);
      source_at(t + dt, src);
      for (std::size_t i = 0; i < Nv; ++i) n1[i] += src[i] - n0[i];
      auto dh = to_hat(n1);
      for (std::size_t q = 0; q < Nv; ++q) {
        const double z = implicit_symbol_[q] * dt;
        ah[q] += dt * phi2(z) * dh[q];
      }
      from_hat(ah, f);
      return;
    }
    case Stepper::ExplicitRK2: {
      std::vector<double> k1(Nv), k2(Nv), stage(Nv), src;
      apply_explicit(f, k1, t, x);
      source_at(t, src);
      for (std::size_t i = 0; i < Nv; ++i) {
        k1[i] += src[i];
        stage[i] = f[i] + dt * k1[i];
      }
      apply_explicit(stage, k2, t + dt, x);
      source_at(t + dt, src);
      for (std::size_t i = 0; i < Nv; ++i) f[i] += 0.5 * dt * (k1[i] + k2[i] + src[i]);
      return;
    }
  }
}

void Integrator::collide(std::vector<double>& state, double t) const {
  const PhaseGrid& g = cfg_.grid;
  const std::size_t Nv = g.v_count();
  for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
    collide_slice(std::span<double>(state.data() + ix * Nv, Nv), t, g.x_point(ix), ix);
  }
}

void Integrator::step(std::vector<double>& state, double t) const {
  transport(state, 0.5 * dt_);
  collide(state, t);
  transport(state, 0.5 * dt_);
}

double total_mass(std::span<const double> slice, const PhaseGrid& g) {
  double acc = 0;
  for (double v : slice) acc += v;
  return acc * g.slice_cell();
}

double l2_norm_slice(std::span<const double> slice, const PhaseGrid& g) {
  double acc = 0;
  for (double v : slice) acc += v * v;
  return std::sqrt(acc * g.slice_cell());
}

Trajectory run(const RunConfig& cfg) {
  Integrator integ(cfg);
  const PhaseGrid& g = cfg.grid;
  Trajectory traj{Field(g), {}};
  std::vector<double> state = cfg.initial;
  std::copy(state.begin(), state.end(), traj.field.tslice(0).begin());
  traj.field.metadata["s"] = cfg.kernel.s();
  traj.field.metadata["kappa"] = cfg.kernel.kappa();
  const int steps = (g.nt - 1) * cfg.record_every;
  const double dt = integ.dt();
  const double V = g.v_halfwidth;
  for (int k = 0; k < steps; ++k) {
    const double t = g.t0 + k * dt;
    integ.step(state, t);
    double sup = 0;
    for (double v : state) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite value after the step starting at t = " << t;
        throw std::runtime_error(os.str());
      }
      sup = std::max(sup, std::abs(v));
    }
    StepLog entry;
    entry.step = k + 1;
    entry.time = g.t0 + (k + 1) * dt;
    entry.cfl_margin = integ.cfl_margin();
    entry.tail_error = cfg.collisions ? cfg.kernel.tail_bound(V, sup) : 0.0;
    entry.mass = total_mass(state, g);
    entry.l2 = l2_norm_slice(state, g);
    traj.log.push_back(entry);
    if ((k + 1) % cfg.record_every == 0) {
      const int it = (k + 1) / cfg.record_every;
      std::copy(state.begin(), state.end(), traj.field.tslice(it).begin());
    }
  }
  return traj;
}

void write_step_log(const std::vector<StepLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "step,time,cfl_margin,tail_error,mass,l2\n";
  for (const auto& e : log)
    out << e.step << ',' << e.time << ',' << e.cfl_margin << ',' << e.tail_error << ','
        << e.mass << ',' << e.l2 << '\n';
}

// ---------------------------------------------------------------------------------------------

namespace {

double bump(double u) { return std::abs(u) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0; }

double bump_derivative(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double d = 1.0 - u * u;
  return bump(u) * (-2.0 * u / (d * d));
}

}  // namespace

TestFunction default_test_function(int n, double x_period, double ta, double tb,
                                   double v_radius) {
  if (!(tb > ta)) throw std::invalid_argument("test function needs ta < tb");
  const double mid = 0.5 * (ta + tb), half = 0.5 * (tb - ta);
  const double kx = 2.0 * kPi / x_period;
  TestFunction tf;
  tf.phi = [=](double t, const Vec& x, const Vec& v) {
    return bump((t - mid) / half) * (1.0 + std::cos(kx * x[0])) * bump(norm(v, n) / v_radius);
  };
  tf.dt_phi = [=](double t, const Vec& x, const Vec& v) {
    return bump_derivative((t - mid) / half) / half * (1.0 + std::cos(kx * x[0])) *
           bump(norm(v, n) / v_radius);
  };
  tf.grad_x_phi = [=](double t, const Vec& x, const Vec& v) {
    return Vec{-kx * std::sin(kx * x[0]) * bump((t - mid) / half) * bump(norm(v, n) / v_radius),
               0.0};
  };
  return tf;
}

double weak_residual(const Field& f, const Kernel& k, const Source& a, const TestFunction& tf) {
  const PhaseGrid& g = f.grid;
  if (g.nt < 2) throw std::invalid_argument("weak_residual needs at least two time slices");
  const VBox box = g.vbox();
  CollisionOperator op(k, box, BoundaryMode::ZeroExtension);
  const std::size_t Nv = g.v_count();
  const double cell = g.slice_cell();
  std::vector<double> phi(Nv), lphi(Nv);
  double total = 0;
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    const double wt = (it == 0 || it == g.nt - 1) ? 0.5 * g.dt() : g.dt();
    double acc = 0;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const Vec x = g.x_point(ix);
      bool any = false;
      for (std::size_t iv = 0; iv < Nv; ++iv) {
        phi[iv] = tf.phi(t, x, g.v_point(iv));
        any = any || phi[iv] != 0;
      }
      if (!any) continue;
      op.apply(t, x, phi, lphi);
      const auto fs = f.vslice(it, ix);
      for (std::size_t iv = 0; iv < Nv; ++iv) {
        const Vec v = g.v_point(iv);
        const Vec gx = tf.grad_x_phi(t, x, v);
        const double transport = tf.dt_phi(t, x, v) + dot(v, gx, g.n);
        acc += -fs[iv] * transport - fs[iv] * lphi[iv] - a(t, x, v) * phi[iv];
      }
    }
    total += wt * acc * cell;
  }
  return std::abs(total);
}

double spectral_profile(int n, double sigma, double r) {
  const double b = 0.5 * n;
  const double pref = std::pow(2.0, sigma) * boost::math::tgamma(sigma + b) / boost::math::tgamma(b);
  return pref * boost::math::hypergeometric_1F1(sigma + b, b, -0.5 * r * r);
}

double Manufactured::f(double t, const Vec& x, const Vec& v) const {
  return (1.0 + A * std::cos(k * x[0] - w * t)) * spectral_profile(n, 2.0, norm(v, n));
}

double Manufactured::L_f(double t, const Vec& x, const Vec& v) const {
  const double coef = c / frac_laplacian_constant(n, s);
  return -coef * (1.0 + A * std::cos(k * x[0] - w * t)) * spectral_profile(n, 2.0 + s, norm(v, n));
}

Source Manufactured::source() const {
  Source src;
  src.kind = "manufactured";
  src.r = 2.0;
  const Manufactured m = *this;
  // The velocity profiles are evaluated on a fixed set of radii over and over; memoize them.
  struct Memo {
    std::mutex mu;
    std::unordered_map<double, std::pair<double, double>> table;
  };
  auto memo = std::make_shared<Memo>();
  const double coef = c / frac_laplacian_constant(n, s);
  src.fn = [m, memo, coef](double t, const Vec& x, const Vec& v) {
    const double r = norm(v, m.n);
    std::pair<double, double> prof;
    {
      std::lock_guard lock(memo->mu);
      auto it = memo->table.find(r);
      if (it == memo->table.end()) {
        it = memo->table
                 .emplace(r, std::make_pair(spectral_profile(m.n, 2.0, r),
                                            spectral_profile(m.n, 2.0 + m.s, r)))
                 .first;
      }
      prof = it->second;
    }
    const double ph = m.k * x[0] - m.w * t;
    const double transport = m.A * std::sin(ph) * prof.first * (m.w - m.k * v[0]);
    return transport + coef * (1.0 + m.A * std::cos(ph)) * prof.second;
  };
  return src;
}

std::vector<double> Manufactured::initial(const PhaseGrid& g) const {
  std::vector<double> out(g.slice_size());
  for (std::size_t ix = 0; ix < g.x_count(); ++ix)
    for (std::size_t iv = 0; iv < g.v_count(); ++iv)
      out[ix * g.v_count() + iv] = f(g.t0, g.x_point(ix), g.v_point(iv));
  return out;
}

Field Manufactured::sample(const PhaseGrid& g) const {
  Field out(g);
  for (int it = 0; it < g.nt; ++it)
    for (std::size_t ix = 0; ix < g.x_count(); ++ix)
      for (std::size_t iv = 0; iv < g.v_count(); ++iv)
        out.at(it, ix, iv) = f(g.t_at(it), g.x_point(ix), g.v_point(iv));
  return out;
}

}  // namespace kfp
