#include "kfp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "kfp/lattice.hpp"

namespace kfp {

namespace {

constexpr double kPi = std::numbers::pi;

double sphere_area(int n) { return n == 1 ? 2.0 : 2.0 * kPi; }

void check_order(int n, double s, double kappa) {
  if (n != 1 && n != 2) throw std::invalid_argument("kernel: n must be 1 or 2");
  if (!(s > 0 && s < 1)) throw std::invalid_argument("kernel: s must lie in (0,1)");
  if (!(2.0 * s < n)) throw std::invalid_argument("kernel: 2s must be smaller than n");
  if (!(kappa > 1)) throw std::invalid_argument("kernel: kappa must exceed 1");
}

Vec sub(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1]}; }

}  // namespace

Kernel Kernel::homogeneous(int n, double s, double kappa, double c) {
  check_order(n, s, kappa);
  if (!(c >= 1.0 / kappa && c <= kappa))
    throw std::invalid_argument("kernel: c must lie in [1/kappa, kappa]");
  Kernel k;
  k.n_ = n;
  k.s_ = s;
  k.kappa_ = kappa;
  k.c_ = c;
  return k;
}

Kernel Kernel::truncated(int n, double s, double kappa, double c, double radius) {
  Kernel k = homogeneous(n, s, kappa, c);
  if (!(radius >= 6.0)) throw std::invalid_argument("kernel: truncation radius below 6");
  k.family_ = KernelFamily::Truncated;
  k.radius_ = radius;
  return k;
}

Kernel Kernel::modulated(int n, double s, double kappa, double c, const ModulationSpec& m) {
  Kernel k = homogeneous(n, s, kappa, c);
  if (!(m.r_lo > 0 && m.r_hi > m.r_lo)) throw std::invalid_argument("kernel: bad shell radii");
  const double amp = std::abs(m.a_tx) + std::abs(m.a_v);
  if (c * (1.0 - amp) < 1.0 / kappa * (1 - 1e-12) || c * (1.0 + amp) > kappa * (1 + 1e-12))
    throw std::invalid_argument("kernel: modulation amplitudes break the kappa bounds");
  k.family_ = KernelFamily::Modulated;
  k.mod_ = m;
  return k;
}

Kernel Kernel::custom(int n, double s, double kappa, double c, CustomModulation m, double r_lo,
                      double r_hi) {
  check_order(n, s, kappa);
  if (!(c > 0)) throw std::invalid_argument("kernel: c must be positive");
  Kernel k;
  k.n_ = n;
  k.s_ = s;
  k.kappa_ = kappa;
  k.c_ = c;
  k.family_ = KernelFamily::Custom;
  k.mod_.id = "custom";
  k.mod_.r_lo = r_lo;
  k.mod_.r_hi = r_hi;
  k.custom_ = std::make_shared<const CustomModulation>(std::move(m));
  return k;
}

ModulationSpec Kernel::preset(const std::string& id, int n, double kappa, double c,
                              std::uint64_t seed) {
  ModulationSpec m;
  m.id = id;
  const double budget = 0.9 * std::min(1.0 - 1.0 / (kappa * c), kappa / c - 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  m.omega = 0.5 + 1.5 * u(rng);
  m.phase = 2.0 * kPi * u(rng);
  m.k = {std::floor(1.0 + 2.0 * u(rng)), n == 2 ? std::floor(3.0 * u(rng)) - 1.0 : 0.0};
  if (id == "none") return m;
  if (budget <= 0) throw std::invalid_argument("kernel: c leaves no room for modulation");
  if (id == "tx-wave") {
    m.a_tx = budget;
  } else if (id == "v-twist") {
    m.a_v = budget;
  } else if (id == "mixed") {
    m.a_tx = 0.5 * budget;
    m.a_v = 0.5 * budget;
  } else {
    throw std::invalid_argument("kernel: unknown modulation-id '" + id +
                                "' (expected none, tx-wave, v-twist, mixed)");
  }
  return m;
}

double Kernel::shell(double r) const {
  if (r <= mod_.r_lo || r >= mod_.r_hi) return 0.0;
  const double u = (2.0 * r - mod_.r_lo - mod_.r_hi) / (mod_.r_hi - mod_.r_lo);
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double Kernel::tx_factor(double t, const Vec& x) const {
  return std::cos(mod_.omega * t + dot(mod_.k, x, n_) + mod_.phase);
}

double Kernel::modulation(double t, const Vec& x, const Vec& v, const Vec& w) const {
  const Vec h = sub(w, v);
  const double r = norm(h, n_);
  switch (family_) {
    case KernelFamily::Homogeneous: return 1.0;
    case KernelFamily::Truncated: return r <= radius_ * (1 + 1e-12) ? 1.0 : 0.0;  // closed band, robust to rounding in w - v
    case KernelFamily::Modulated: {
      const double rho = shell(r);
      if (rho == 0) return 1.0;
      const double twist = std::cos(2.0 * kPi * dot(v, h, n_) / (r * r));
      return 1.0 + (mod_.a_tx * tx_factor(t, x) + mod_.a_v * twist) * rho;
    }
    case KernelFamily::Custom: return (*custom_)(t, x, v, w);
  }
  return 1.0;
}

double Kernel::operator()(double t, const Vec& x, const Vec& v, const Vec& w) const {
  const double r = norm(sub(w, v), n_);
  if (r == 0) return std::numeric_limits<double>::infinity();
  return c_ * std::pow(r, -n_ - 2.0 * s_) * modulation(t, x, v, w);
}

double Kernel::exterior_mass(double t, const Vec& x, const Vec& v, const VBox& box) const {
  const double base = c_ * exterior_power_integral(box, v, s_, radius_);
  if (translation_invariant()) return base;
  std::vector<double> gx, gw;
  gauss_legendre(24, mod_.r_lo, mod_.r_hi, gx, gw);
  auto radial = [&](double phi, double rb) {
    if (rb >= mod_.r_hi) return 0.0;
    const Vec dir{std::cos(phi), std::sin(phi)};
    const double a = std::max(rb, mod_.r_lo);
    std::vector<double> qx, qw;
    gauss_legendre(24, a, mod_.r_hi, qx, qw);
    double acc = 0;
    for (std::size_t q = 0; q < qx.size(); ++q) {
      const Vec w{v[0] + qx[q] * dir[0], n_ == 2 ? v[1] + qx[q] * dir[1] : 0.0};
      acc += qw[q] * (modulation(t, x, v, w) - 1.0) * std::pow(qx[q], -1.0 - 2.0 * s_);
    }
    return acc;
  };
  return base + c_ * exterior_integral(box, v, radial, {mod_.r_lo, mod_.r_hi});
}

double Kernel::tail_bound(double d, double sup_f) const {
  if (!(d > 0)) return std::numeric_limits<double>::infinity();
  return 2.0 * kappa_ * sup_f * sphere_area(n_) * std::pow(d, -2.0 * s_) / (2.0 * s_);
}

BoundCertificate validate_bounds(const Kernel& k, std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 1000) throw std::invalid_argument("validate_bounds needs >= 1000 samples");
  const int n = k.n();
  const double p = n + 2.0 * k.s();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BoundCertificate cert;
  const double tol = 1e-9;
  for (std::size_t i = 0; i < sample_count; ++i) {
    const double t = -6.0 * u(rng);
    Vec x{}, v{}, dir{};
    for (int a = 0; a < n; ++a) {
      x[a] = kPi * (2.0 * u(rng) - 1.0);
      v[a] = 8.0 * (2.0 * u(rng) - 1.0);
    }
    if (n == 1) {
      dir = {u(rng) < 0.5 ? -1.0 : 1.0, 0.0};
    } else {
      const double ang = 2.0 * kPi * u(rng);
      dir = {std::cos(ang), std::sin(ang)};
    }
    double r;
    if (i % 10 == 0) {
      r = 6.0;  // band edge of the lower bound
    } else if (i % 10 == 1) {
      r = 6.0 * (1.0 - 1e-6 * u(rng));
    } else {
      r = std::exp(std::log(1e-3) + (std::log(20.0) - std::log(1e-3)) * u(rng));
    }
    const Vec h{r * dir[0], r * dir[1]};
    const Vec w{v[0] + h[0], v[1] + h[1]};
    const Vec wm{v[0] - h[0], v[1] - h[1]};
    const double kvw = k(t, x, v, w);
    const double kwv = k(t, x, w, v);
    const double kvm = k(t, x, v, wm);
    const double scale = std::pow(r, -p);
    auto flag = [&](const char* which) { cert.violations.push_back({t, x, v, w, which}); };
    if (std::abs(kvw - kwv) > tol * std::max(std::abs(kvw), std::abs(kwv)))
      flag("symmetry K(v,w)=K(w,v)");
    if (std::abs(kvw - kvm) > tol * std::max(std::abs(kvw), std::abs(kvm)))
      flag("symmetry K(v,v+h)=K(v,v-h)");
    if (kvw > k.kappa() * scale * (1 + tol)) flag("upper bound");
    if (r <= 6.0 && kvw < scale / k.kappa() * (1 - tol)) flag("lower bound");
    const double ratio = kvw / scale;
    if (r <= 6.0) cert.min_ratio = std::min(cert.min_ratio, ratio);
    cert.max_ratio = std::max(cert.max_ratio, ratio);
    ++cert.samples_checked;
  }
  return cert;
}

// ---------------------------------------------------------------------------------------------
// CollisionOperator

double periodic_image_sum(int n, double s, double L, const Vec& h, double r_max) {
  const double p = n + 2.0 * s;
  double acc = 0;
  if (n == 1) {
    const int M = std::isfinite(r_max) ? static_cast<int>(std::ceil(r_max / L)) + 1 : 64;
    for (int m = 1; m <= M; ++m) {
      for (double r : {std::abs(h[0] + L * m), std::abs(h[0] - L * m)})
        if (r <= r_max) acc += std::pow(r, -p);
    }
    if (!std::isfinite(r_max)) {
      // Midpoint-rule tail of both branches beyond M.
      const double a = L * (M + 0.5);
      acc += (std::pow(a + h[0], 1.0 - p) + std::pow(a - h[0], 1.0 - p)) / (L * (p - 1.0));
    }
    return acc;
  }
  const int M = std::isfinite(r_max) ? static_cast<int>(std::ceil(r_max / L)) + 1 : 24;
  for (int a = -M; a <= M; ++a) {
    for (int b = -M; b <= M; ++b) {
      if (a == 0 && b == 0) continue;
      const double x = h[0] + L * a, y = h[1] + L * b;
      const double r = std::sqrt(x * x + y * y);
      if (r <= r_max) acc += std::pow(r, -p);
    }
  }
  if (!std::isfinite(r_max)) {
    // Integral of |x|^{-p} outside the square of half-width L (M + 1/2).
    static thread_local std::vector<double> gx, gw;
    gauss_legendre(32, 0.0, kPi / 4.0, gx, gw);
    const double half = L * (M + 0.5);
    double tail = 0;
    for (std::size_t q = 0; q < gx.size(); ++q)
      tail += gw[q] * std::pow(half / std::cos(gx[q]), 2.0 - p) / (p - 2.0);
    acc += 8.0 * tail / (L * L);
  }
  return acc;
}

CollisionOperator::CollisionOperator(const Kernel& kernel, const VBox& box, BoundaryMode mode)
    : kernel_(kernel), box_(box), mode_(mode) {
  if (kernel.n() != box.n) throw std::invalid_argument("kernel and box dimensions differ");
  const int n = box.n, nv = box.nv;
  const double h = box.h();
  const double sp = kernel.s();
  diag_coef_ = diagonal_weight(n, sp) * kernel.c() * std::pow(h, 2.0 - 2.0 * sp) / (h * h);
  const std::size_t N = box.size();

  if (mode == BoundaryMode::ZeroExtension) {
    ext_power_.resize(N);
    for (std::size_t i = 0; i < N; ++i)
      ext_power_[i] = kernel.c() * exterior_power_integral(box, box.point(i), sp,
                                                           kernel.truncation_radius());
    if (kernel.family() == KernelFamily::Modulated) {
      ext_shell_.resize(N);
      ext_twist_.resize(N);
      const auto& m = kernel.spec();
      for (std::size_t i = 0; i < N; ++i) {
        const Vec v = box.point(i);
        auto radial = [&](bool twist) {
          return [&, twist](double phi, double rb) {
            if (rb >= m.r_hi) return 0.0;
            std::vector<double> qx, qw;
            gauss_legendre(24, std::max(rb, m.r_lo), m.r_hi, qx, qw);
            const Vec dir{std::cos(phi), std::sin(phi)};
            double acc = 0;
            for (std::size_t q = 0; q < qx.size(); ++q) {
              const double r = qx[q];
              double val = kernel.shell(r) * std::pow(r, -1.0 - 2.0 * sp);
              if (twist) val *= std::cos(2.0 * kPi * dot(v, dir, n) / r);
              acc += qw[q] * val;
            }
            return acc;
          };
        };
        ext_shell_[i] = kernel.c() * exterior_integral(box, v, radial(false), {m.r_lo, m.r_hi});
        ext_twist_[i] = kernel.c() * exterior_integral(box, v, radial(true), {m.r_lo, m.r_hi});
      }
    }
  }

  if (mode == BoundaryMode::Periodic) {
    if (!kernel.translation_invariant() && kernel.spec().r_hi >= box.V)
      throw std::invalid_argument("modulation shell must lie inside the velocity half-width");
    // Images sit at distance >= V from the box, where every family is c|h|^{-n-2s}
    // (or zero beyond a truncation radius).
    images_.assign(N, 0.0);
    for (std::size_t q = 0; q < N; ++q) {
      const auto j = box.split(q);
      Vec hq{};
      for (int a = 0; a < n; ++a) hq[a] = (j[a] <= nv / 2 ? j[a] : j[a] - nv) * h;
      images_[q] = kernel.c() * box.cell() *
                   periodic_image_sum(n, sp, 2.0 * box.V, hq, kernel.truncation_radius());
    }
  }

  if (!kernel.translation_invariant()) return;
  const int L = mode == BoundaryMode::Periodic ? nv : 2 * nv;
  conv_dims_.assign(n, L);
  std::size_t M = 1;
  for (int a = 0; a < n; ++a) M *= static_cast<std::size_t>(L);
  weight_hat_.assign(M, 0.0);
  auto signed_offset = [&](int q) {
    if (mode == BoundaryMode::Periodic) return q <= nv / 2 ? q : q - nv;
    return q < nv ? q : q - L;  // q in [nv, L) maps to negative offsets; q == nv unused
  };
  const double R = kernel.truncation_radius();
  for (std::size_t q = 0; q < M; ++q) {
    const int q0 = n == 1 ? static_cast<int>(q) : static_cast<int>(q / L);
    const int q1 = n == 1 ? 0 : static_cast<int>(q % L);
    if (mode == BoundaryMode::ZeroExtension && (q0 == nv || q1 == nv)) continue;
    const int k0 = signed_offset(q0), k1 = n == 1 ? 0 : signed_offset(q1);
    const double r = h * std::sqrt(double(k0) * k0 + double(k1) * k1);
    if (mode == BoundaryMode::Periodic) weight_hat_[q] = images_[q];
    if (r == 0 || r > R) continue;
    weight_hat_[q] += kernel.c() * std::pow(r, -n - 2.0 * sp) * box.cell();
  }
  fft::transform(weight_hat_.data(), {conv_dims_, 1, 1, 0}, fft::Direction::Forward);

  // Row sums are the same convolution applied to the indicator of the box.
  std::vector<double> ones(N, 1.0), wf, unused;
  pair_apply(0.0, Vec{}, ones, wf, unused);
  rowsum_ = std::move(wf);
}

std::vector<double> CollisionOperator::symbol() const {
  if (mode_ != BoundaryMode::Periodic || !kernel_.translation_invariant())
    throw std::logic_error("symbol() needs a periodic translation-invariant operator");
  const std::size_t N = box_.size();
  std::vector<double> lam(N);
  const double rowsum = rowsum_.empty() ? 0.0 : rowsum_[0];
  for (std::size_t q = 0; q < N; ++q) {
    const auto j = box_.split(q);
    double lap = 0;
    for (int a = 0; a < box_.n; ++a) lap += 2.0 * std::cos(2.0 * kPi * j[a] / box_.nv) - 2.0;
    lam[q] = weight_hat_[q].real() - rowsum + diag_coef_ * lap;
  }
  return lam;
}

Vec CollisionOperator::offset(std::size_t i, std::size_t j) const {
  const auto ji = box_.split(i), jj = box_.split(j);
  Vec h{};
  for (int a = 0; a < box_.n; ++a) {
    int k = jj[a] - ji[a];
    if (mode_ == BoundaryMode::Periodic) {
      if (k > box_.nv / 2) k -= box_.nv;
      if (k < -box_.nv / 2) k += box_.nv;
    }
    h[a] = k * box_.h();
  }
  return h;
}

std::size_t CollisionOperator::neighbor(std::size_t i, int axis, int dir) const {
  auto j = box_.split(i);
  j[axis] += dir;
  if (j[axis] < 0 || j[axis] >= box_.nv) {
    if (mode_ == BoundaryMode::ZeroExtension) return static_cast<std::size_t>(-1);
    j[axis] = (j[axis] + box_.nv) % box_.nv;
  }
  return box_.n == 1 ? static_cast<std::size_t>(j[0])
                     : static_cast<std::size_t>(j[0]) * box_.nv + j[1];
}

void CollisionOperator::pair_apply(double t, const Vec& x, std::span<const double> f,
                                   std::vector<double>& wf, std::vector<double>& rowsum) const {
  const std::size_t N = box_.size();
  wf.assign(N, 0.0);
  if (kernel_.translation_invariant()) {
    const int n = box_.n;
    const int L = conv_dims_[0];
    std::size_t M = weight_hat_.size();
    std::vector<fft::cplx> buf(M, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      const auto j = box_.split(i);
      const std::size_t q = n == 1 ? j[0] : static_cast<std::size_t>(j[0]) * L + j[1];
      buf[q] = f[i];
    }
    fft::transform(buf.data(), {conv_dims_, 1, 1, 0}, fft::Direction::Forward);
    for (std::size_t q = 0; q < M; ++q) buf[q] *= weight_hat_[q];
    fft::transform(buf.data(), {conv_dims_, 1, 1, 0}, fft::Direction::Backward);
    const double scale = 1.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < N; ++i) {
      const auto j = box_.split(i);
      const std::size_t q = n == 1 ? j[0] : static_cast<std::size_t>(j[0]) * L + j[1];
      wf[i] = buf[q].real() * scale;
    }
    rowsum = rowsum_;
    return;
  }
  rowsum.assign(N, 0.0);
  const double cell = box_.cell();
  const int n = box_.n;
  const double p = -n - 2.0 * kernel_.s();
  const bool modulated = kernel_.family() == KernelFamily::Modulated;
  const double txf = modulated ? kernel_.tx_factor(t, x) : 0.0;
  const auto& m = kernel_.spec();
  for (std::size_t i = 0; i < N; ++i) {
    const Vec vi = box_.point(i);
    for (std::size_t j = i + 1; j < N; ++j) {
      const Vec h = offset(i, j);
      const double r = norm(h, n);
      double w;
      if (modulated) {
        const double base = kernel_.c() * std::pow(r, p) * cell;
        const double rho = kernel_.shell(r);
        if (rho == 0) {
          w = base;
        } else {
          const Vec vj = box_.point(j);
          const double ci = std::cos(2.0 * kPi * dot(vi, h, n) / (r * r));
          const double cj = std::cos(2.0 * kPi * dot(vj, h, n) / (r * r));
          w = base * (1.0 + (m.a_tx * txf + 0.5 * m.a_v * (ci + cj)) * rho);
        }
      } else {
        const Vec vj = box_.point(j);
        const Vec wi{vi[0] + h[0], vi[1] + h[1]};
        const Vec wj{vj[0] - h[0], vj[1] - h[1]};
        w = 0.5 * (kernel_(t, x, vi, wi) + kernel_(t, x, vj, wj)) * cell;
      }
      if (!images_.empty()) {
        const auto ji = box_.split(i), jj = box_.split(j);
        std::size_t q = 0;
        for (int a = 0; a < n; ++a) q = q * box_.nv + ((jj[a] - ji[a] + box_.nv) % box_.nv);
        w += images_[q];
      }
      wf[i] += w * f[j];
      wf[j] += w * f[i];
      rowsum[i] += w;
      rowsum[j] += w;
    }
  }
}

void CollisionOperator::diag_term(std::span<const double> f, std::span<double> out,
                                  double scale) const {
  const std::size_t N = box_.size();
  for (std::size_t i = 0; i < N; ++i) {
    double lap = 0;
    for (int a = 0; a < box_.n; ++a) {
      for (int d : {-1, 1}) {
        const std::size_t j = neighbor(i, a, d);
        const double fj = j == static_cast<std::size_t>(-1) ? 0.0 : f[j];
        lap += fj - f[i];
      }
    }
    out[i] += scale * diag_coef_ * lap;
  }
}

void CollisionOperator::apply(double t, const Vec& x, std::span<const double> f,
                              std::span<double> out) const {
  const std::size_t N = box_.size();
  if (f.size() != N || out.size() != N) throw std::invalid_argument("slice size mismatch");
  std::vector<double> wf, rowsum;
  pair_apply(t, x, f, wf, rowsum);
  const bool modulated_ext = mode_ == BoundaryMode::ZeroExtension &&
                             kernel_.family() == KernelFamily::Modulated;
  const double txf = modulated_ext ? kernel_.tx_factor(t, x) : 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double ext = 0;
    if (mode_ == BoundaryMode::ZeroExtension && f[i] != 0) {
      if (kernel_.family() == KernelFamily::Custom) {
        ext = kernel_.exterior_mass(t, x, box_.point(i), box_);
      } else {
        ext = ext_power_[i];
        if (modulated_ext)
          ext += kernel_.spec().a_tx * txf * ext_shell_[i] + kernel_.spec().a_v * ext_twist_[i];
      }
    }
    out[i] = wf[i] - (rowsum[i] + ext) * f[i];
  }
  diag_term(f, out, 1.0);
}

double CollisionOperator::bilinear(double t, const Vec& x, std::span<const double> f,
                                   std::span<const double> g) const {
  const std::size_t N = box_.size();
  // With W symmetric, (1/2) sum W (df)(dg) = sum rowsum f g - sum g (W f).
  std::vector<double> wf, rowsum;
  pair_apply(t, x, f, wf, rowsum);
  double pairs = 0, ext = 0;
  const bool modulated_ext = mode_ == BoundaryMode::ZeroExtension &&
                             kernel_.family() == KernelFamily::Modulated;
  const double txf = modulated_ext ? kernel_.tx_factor(t, x) : 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    pairs += rowsum[i] * f[i] * g[i] - g[i] * wf[i];
    if (mode_ == BoundaryMode::ZeroExtension && f[i] * g[i] != 0) {
      double e;
      if (kernel_.family() == KernelFamily::Custom) {
        e = kernel_.exterior_mass(t, x, box_.point(i), box_);
      } else {
        e = ext_power_[i];
        if (modulated_ext)
          e += kernel_.spec().a_tx * txf * ext_shell_[i] + kernel_.spec().a_v * ext_twist_[i];
      }
      ext += e * f[i] * g[i];
    }
  }
  double edges = 0;
  for (std::size_t i = 0; i < N; ++i) {
    for (int a = 0; a < box_.n; ++a) {
      const std::size_t j = neighbor(i, a, +1);
      const double fj = j == static_cast<std::size_t>(-1) ? 0.0 : f[j];
      const double gj = j == static_cast<std::size_t>(-1) ? 0.0 : g[j];
      edges += (fj - f[i]) * (gj - g[i]);
      if (mode_ == BoundaryMode::ZeroExtension && box_.split(i)[a] == 0)
        edges += f[i] * g[i];  // edge to the zero exterior on the low side
    }
  }
  return box_.cell() * (pairs + ext + diag_coef_ * edges);
}

double CollisionOperator::pair_product(double t, const Vec& x, std::span<const double> a,
                                       std::span<const double> b) const {
  std::vector<double> wb, rowsum;
  pair_apply(t, x, b, wb, rowsum);
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * wb[i];
  return acc * box_.cell();
}

// ---------------------------------------------------------------------------------------------

namespace {

double support_distance(std::span<const double> f, const VBox& box, double& sup_f) {
  sup_f = 0;
  for (double v : f) sup_f = std::max(sup_f, std::abs(v));
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (std::abs(f[i]) > 1e-12 * sup_f && sup_f > 0)
      d = std::min(d, distance_to_exterior(box, box.point(i)));
  }
  return d;
}

void require_support(std::span<const double> f, const VBox& box, const char* what) {
  double sup_f;
  const double d = support_distance(f, box, sup_f);
  if (d < 1.0)
    throw std::invalid_argument(std::string(what) +
                                ": slice must vanish within distance 1 of the velocity box edge");
}

}  // namespace

LResult apply_L(const Kernel& k, std::span<const double> vslice, const VBox& box, double t,
                const Vec& x) {
  if (vslice.size() != box.size()) throw std::invalid_argument("apply_L: slice size mismatch");
  require_support(vslice, box, "apply_L");
  CollisionOperator op(k, box, BoundaryMode::ZeroExtension);
  LResult res;
  res.values.resize(vslice.size());
  op.apply(t, x, vslice, res.values);
  double sup_f;
  const double d = support_distance(vslice, box, sup_f);
  res.tail_bound = sup_f > 0 ? k.tail_bound(d, sup_f) : 0.0;
  return res;
}

double bilinear_B(const Kernel& k, std::span<const double> f, std::span<const double> g,
                  const VBox& box, double t, const Vec& x) {
  require_support(f, box, "bilinear_B");
  require_support(g, box, "bilinear_B");
  CollisionOperator op(k, box, BoundaryMode::ZeroExtension);
  return op.bilinear(t, x, f, g);
}

CrossTerm cross_term(const Kernel& k, std::span<const double> fplus,
                     std::span<const double> fminus, const VBox& box, double t, const Vec& x) {
  if (fplus.size() != box.size() || fminus.size() != box.size())
    throw std::invalid_argument("cross_term: slice size mismatch");
  for (std::size_t i = 0; i < fplus.size(); ++i) {
    if (fplus[i] < 0 || fminus[i] < 0)
      throw std::invalid_argument("cross_term: slices must be non-negative");
    if (fplus[i] * fminus[i] > 1e-14)
      throw std::invalid_argument("cross_term: supports overlap");
  }
  CrossTerm ct;
  CollisionOperator op(k, box, BoundaryMode::ZeroExtension);
  ct.value = -op.bilinear(t, x, fplus, fminus);
  bool inside = true;
  double ip = 0, im = 0;
  for (std::size_t i = 0; i < fplus.size(); ++i) {
    const bool in_b3 = norm(box.point(i), box.n) <= 3.0;
    if (!in_b3 && (fplus[i] > 0 || fminus[i] > 0)) inside = false;
    if (in_b3) {
      ip += fplus[i];
      im += fminus[i];
    }
  }
  ct.bound_applicable = inside;
  ct.lower_bound = std::pow(6.0, -(box.n + 2.0 * k.s())) / k.kappa() * ip * im * box.cell() *
                   box.cell();
  ct.bound_holds = !inside || ct.value >= ct.lower_bound - 1e-9;
  return ct;
}

// ---------------------------------------------------------------------------------------------

namespace {

/// Integral over r in (0, inf) of g(r) with kinks at the listed radii; g ~ r^{1-2s} at 0.
double radial_integral(const std::function<double(double)>& g, std::vector<double> kinks,
                       double near_cut, const std::function<double()>& near_part) {
  boost::math::quadrature::tanh_sinh<double> ts;
  kinks.push_back(near_cut);
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::remove_if(kinks.begin(), kinks.end(),
                             [&](double r) { return !(r >= near_cut) || !std::isfinite(r); }),
              kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              kinks.end());
  double total = near_part();
  for (std::size_t i = 0; i + 1 < kinks.size(); ++i) {
    total += ts.integrate(g, kinks[i], kinks[i + 1], 1e-10);
  }
  const double b = kinks.back();
  // r = b / u maps (b, inf) onto (0, 1).
  auto tail = [&](double u) {
    const double r = b / u;
    if (!(r < 1e100)) return 0.0;
    return g(r) * b / (u * u);
  };
  total += ts.integrate(tail, 0.0, 1.0, 1e-10);
  return total;
}

}  // namespace

double apply_L_pointwise(const Kernel& k, const std::function<double(const Vec&)>& phi,
                         double t, const Vec& x, const Vec& v,
                         const std::vector<double>& kink_radii) {
  const int n = k.n();
  const double s = k.s();
  const double phi0 = phi(v);
  std::vector<double> kernel_kinks;
  if (std::isfinite(k.truncation_radius())) kernel_kinks.push_back(k.truncation_radius());
  if (!k.translation_invariant()) {
    kernel_kinks.push_back(k.spec().r_lo);
    kernel_kinks.push_back(k.spec().r_hi);
  }

  auto along = [&](const Vec& dir) {
    auto at = [&](double r) {
      return Vec{v[0] + r * dir[0], n == 2 ? v[1] + r * dir[1] : 0.0};
    };
    auto integrand = [&](double r) {
      const Vec wp = at(r), wm = at(-r);
      const double d2 = phi(wp) + phi(wm) - 2.0 * phi0;
      return k(t, x, v, wp) * d2 * std::pow(r, n - 1);
    };
    std::vector<double> kinks = kernel_kinks;
    const double vd = dot(v, dir, n), vv = dot(v, v, n);
    for (double R : kink_radii) {
      const double disc = vd * vd - vv + R * R;
      if (disc < 0) continue;
      for (double r : {-vd - std::sqrt(disc), -vd + std::sqrt(disc), vd - std::sqrt(disc),
                       vd + std::sqrt(disc)}) {
        if (r > 0) kinks.push_back(r);
      }
    }
    double first = 1.0;
    for (double r : kinks) first = std::min(first, r);
    const double cut = 1e-2 * first;
    // Below the cut the kernel is c|h|^{-n-2s} and the second difference is quadratic.
    auto near = [&]() {
      const double d2 = (phi(at(cut)) + phi(at(-cut)) - 2.0 * phi0) / (cut * cut);
      return k.c() * d2 * std::pow(cut, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    };
    return radial_integral(integrand, kinks, cut, near);
  };

  if (n == 1) return along(Vec{1.0, 0.0});
  // Half the directions suffice because the integrand is symmetrized in h.
  std::vector<double> gx, gw;
  gauss_legendre(96, 0.0, kPi, gx, gw);
  double acc = 0;
  for (std::size_t q = 0; q < gx.size(); ++q) acc += gw[q] * along(Vec{std::cos(gx[q]), std::sin(gx[q])});
  return acc;
}

double explicit_stability_limit(int n, double s) {
  double lambda;
  if (n == 1) {
    lambda = 4.0 * (1.0 - std::pow(2.0, -1.0 - 2.0 * s)) * boost::math::zeta(1.0 + 2.0 * s);
  } else {
    const int M = 400;
    lambda = 0;
    for (int a = -M; a <= M; ++a) {
      for (int b = -M; b <= M; ++b) {
        if ((a + b) % 2 == 0) continue;
        lambda += 2.0 * std::pow(double(a) * a + double(b) * b, -0.5 * (n + 2.0 * s));
      }
    }
    lambda += 2.0 * kPi * std::pow(double(M), -2.0 * s) / (2.0 * s);
  }
  lambda += 4.0 * n * diagonal_weight(n, s);
  return 2.0 / lambda;
}

}  // namespace kfp
