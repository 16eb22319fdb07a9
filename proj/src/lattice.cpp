#include "kfp/lattice.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kfp {

double dirichlet_beta(double z) {
  if (!(z > 0)) throw std::domain_error("dirichlet_beta: z must be positive");
  // Cohen-Rodriguez Villegas-Zagier acceleration; terms (2k+1)^{-z} are totally monotone.
  const int m = 40;
  double d = std::pow(3.0 + std::sqrt(8.0), m);
  d = 0.5 * (d + 1.0 / d);
  double b = -1.0;
  double c = -d;
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    c = b - c;
    sum += c * std::pow(2.0 * k + 1.0, -z);
    b = (static_cast<double>(k) + m) * (static_cast<double>(k) - m) * b /
        ((k + 0.5) * (k + 1.0));
  }
  return sum / d;
}

double lattice_zeta(int n, double sigma) {
  if (n == 1) return 2.0 * boost::math::zeta(sigma);
  if (n == 2) {
    const double z = 0.5 * sigma;
    return 4.0 * boost::math::zeta(z) * dirichlet_beta(z);
  }
  throw std::invalid_argument("lattice_zeta: n must be 1 or 2");
}

double diagonal_weight(int n, double s) {
  // Lattice minus integral of (1/2) h^T H h |h|^{-n-2s} is h^{2-2s} tr(H) Z_n(n+2s-2) / (2n).
  return -lattice_zeta(n, n + 2.0 * s - 2.0) / (2.0 * n);
}

double box_lo(const VBox& box) { return -box.V - 0.5 * box.h(); }
double box_hi(const VBox& box) { return box.V - 0.5 * box.h(); }

void gauss_legendre(int order, double a, double b, std::vector<double>& x,
                    std::vector<double>& w) {
  x.assign(order, 0.0);
  w.assign(order, 0.0);
  for (int i = 0; i < order; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = 0.5 * (a + b) - 0.5 * (b - a) * z;
    w[i] = (b - a) / ((1.0 - z * z) * dp * dp);
  }
}

double distance_to_exterior(const VBox& box, const Vec& v) {
  const double lo = box_lo(box), hi = box_hi(box);
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < box.n; ++a) d = std::min({d, hi - v[a], v[a] - lo});
  return d;
}

double exterior_integral(const VBox& box, const Vec& v,
                         const std::function<double(double phi, double rb)>& radial,
                         const std::vector<double>& kink_radii) {
  const double lo = box_lo(box), hi = box_hi(box);
  if (box.n == 1) {
    return radial(0.0, hi - v[0]) + radial(std::numbers::pi, v[0] - lo);
  }
  struct Side {
    double alpha, d, t_minus, t_plus;
  };
  const Side sides[4] = {
      {0.0, hi - v[0], v[1] - lo, hi - v[1]},
      {0.5 * std::numbers::pi, hi - v[1], hi - v[0], v[0] - lo},
      {std::numbers::pi, v[0] - lo, hi - v[1], v[1] - lo},
      {1.5 * std::numbers::pi, v[1] - lo, v[0] - lo, hi - v[0]},
  };
  std::vector<double> gx, gw;
  double total = 0.0;
  for (const auto& sd : sides) {
    const double pa = -std::atan(sd.t_minus / sd.d);
    const double pb = std::atan(sd.t_plus / sd.d);
    std::vector<double> cuts{pa, pb};
    for (double R : kink_radii) {
      if (R > sd.d) {
        const double c = std::acos(sd.d / R);
        if (c > pa && c < pb) cuts.push_back(c);
        if (-c > pa && -c < pb) cuts.push_back(-c);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (cuts[k + 1] - cuts[k] < 1e-15) continue;
      gauss_legendre(48, cuts[k], cuts[k + 1], gx, gw);
      for (std::size_t q = 0; q < gx.size(); ++q) {
        total += gw[q] * radial(sd.alpha + gx[q], sd.d / std::cos(gx[q]));
      }
    }
  }
  return total;
}

double exterior_power_integral(const VBox& box, const Vec& v, double s, double r_max) {
  const double cap = std::isfinite(r_max) ? std::pow(r_max, -2.0 * s) : 0.0;
  auto radial = [&](double, double rb) {
    if (rb >= r_max) return 0.0;
    return (std::pow(rb, -2.0 * s) - cap) / (2.0 * s);
  };
  std::vector<double> kinks;
  if (std::isfinite(r_max)) kinks.push_back(r_max);
  return exterior_integral(box, v, radial, kinks);
}

}  // namespace kfp
