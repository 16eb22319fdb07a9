#include "kfp/fracops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kfp/fft.hpp"

namespace kfp {

double MultiplierOp::symbol(double xi) const {
  if (kind == MultiplierKind::BesselPow) return std::pow(1.0 + xi * xi, 0.5 * sigma);
  if (xi == 0) return sigma == 0 ? 1.0 : 0.0;
  return std::pow(xi, sigma);
}

std::vector<double> apply_multiplier(const MultiplierOp& op, std::span<const double> vslice,
                                     const VBox& box) {
  if (std::abs(op.sigma) > 4) throw std::invalid_argument("multiplier exponent exceeds 4");
  if (vslice.size() != box.size()) throw std::invalid_argument("slice size mismatch");
  std::vector<fft::cplx> buf(vslice.begin(), vslice.end());
  const std::vector<int> dims(box.n, box.nv);
  fft::forward(buf, dims);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= op.symbol(box.freq_norm(k));
  fft::backward(buf, dims);
  std::vector<double> out(buf.size());
  const double scale = 1.0 / static_cast<double>(buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) out[k] = buf[k].real() * scale;
  return out;
}

double frac_laplacian_constant(int n, double s) {
  return std::pow(4.0, s) * std::tgamma(0.5 * n + s) /
         (std::pow(std::numbers::pi, 0.5 * n) * std::abs(std::tgamma(-s)));
}

namespace {
constexpr double kProfilePower = 4.0;

double profile_mass(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(kProfilePower + 1.0) /
         std::tgamma(kProfilePower + 1.0 + 0.5 * n);
}
}  // namespace

double mollifier_profile(double r, int n) {
  if (r >= 1.0) return 0.0;
  return std::pow(1.0 - r * r, kProfilePower) / profile_mass(n);
}

double mollifier_hat(double xi, int n) {
  const double nu = kProfilePower + 0.5 * n;
  const double r = std::abs(xi);
  if (r < 1e-3) {
    const double q = 0.25 * r * r;
    return 1.0 - q / (nu + 1.0) + q * q / (2.0 * (nu + 1.0) * (nu + 2.0));
  }
  return std::tgamma(nu + 1.0) * std::pow(2.0 / r, nu) * std::cyl_bessel_j(nu, r);
}

MollifyResult mollify(std::span<const double> vslice, const VBox& box, const Mollifier& m) {
  if (!(m.epsilon > 0)) throw std::invalid_argument("mollifier epsilon must be positive");
  MollifyResult res;
  const double lo = -box.V + m.epsilon, hi = box.V - box.h() - m.epsilon;
  for (std::size_t i = 0; i < vslice.size(); ++i) {
    if (vslice[i] == 0) continue;
    const Vec p = box.point(i);
    for (int a = 0; a < box.n; ++a) {
      if (p[a] < lo || p[a] > hi) res.boundary_contact = true;
    }
  }
  std::vector<fft::cplx> buf(vslice.begin(), vslice.end());
  const std::vector<int> dims(box.n, box.nv);
  fft::forward(buf, dims);
  for (std::size_t k = 0; k < buf.size(); ++k)
    buf[k] *= mollifier_hat(m.epsilon * box.freq_norm(k), box.n);
  fft::backward(buf, dims);
  res.values.resize(buf.size());
  const double scale = 1.0 / static_cast<double>(buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) res.values[k] = buf[k].real() * scale;
  return res;
}

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line needs two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

RateReport mollifier_rate(std::span<const double> g, const VBox& box, double s,
                          const std::vector<double>& eps_list) {
  if (eps_list.size() < 4) throw std::invalid_argument("eps_list needs at least 4 points");
  const auto [emin, emax] = std::minmax_element(eps_list.begin(), eps_list.end());
  if (!(*emin > 0) || *emax / *emin < 10.0 - 1e-9)
    throw std::invalid_argument("eps_list must be positive and span a decade");
  RateReport rep;
  const double hs = hs_norm_v(g, box, s);
  std::vector<double> lx, ly;
  for (double eps : eps_list) {
    const auto mol = mollify(g, box, {eps});
    std::vector<double> diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - mol.values[i];
    const double err = hs_norm_v(diff, box, 0.0);
    rep.eps.push_back(eps);
    rep.errors.push_back(err);
    rep.max_ratio = std::max(rep.max_ratio, err / (std::pow(eps, s) * hs));
    lx.push_back(std::log(eps));
    ly.push_back(std::log(err));
  }
  rep.rate = fit_line(lx, ly).first;
  return rep;
}

}  // namespace kfp
