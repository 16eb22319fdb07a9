#include "kfp/cutoffs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kfp/fracops.hpp"

namespace kfp {

double CutoffFamily::g(double x) const {
  if (x <= 0) return 0.0;
  if (x > 1) return std::pow(x, 0.5 * s);
  const auto& c = junction;
  return x * x * x * (c[0] + x * (c[1] + x * c[2]));
}

double CutoffFamily::g_prime(double x) const {
  if (x <= 0) return 0.0;
  if (x > 1) return 0.5 * s * std::pow(x, 0.5 * s - 1.0);
  const auto& c = junction;
  return x * x * (3 * c[0] + x * (4 * c[1] + x * 5 * c[2]));
}

double CutoffFamily::g_second(double x) const {
  if (x <= 0) return 0.0;
  const double a = 0.5 * s;
  if (x > 1) return a * (a - 1.0) * std::pow(x, a - 2.0);
  const auto& c = junction;
  return x * (6 * c[0] + x * (12 * c[1] + x * 20 * c[2]));
}

double CutoffFamily::psi_k(int k, double radius) const {
  return psi1(radius) + 0.5 - std::ldexp(1.0, -k - 1);
}

double CutoffFamily::F(double radius) const {
  const double u = std::clamp(radius - 2.0, 0.0, 1.0);
  return -1.0 + u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

CutoffFamily build_cutoff_family(double s, int n) {
  if (!(s > 0 && s < 1)) throw std::invalid_argument("cutoffs: s must lie in (0,1)");
  if (!(2.0 * s < n)) throw std::invalid_argument("cutoffs: 2s must be smaller than n");
  CutoffFamily fam;
  fam.s = s;
  fam.n = n;
  // p = c3 x^3 + c4 x^4 + c5 x^5 has p(0) = p'(0) = p''(0) = 0; match value, slope and
  // curvature of x^{s/2} at 1.
  const double a = 0.5 * s;
  const double r1 = 1.0, r2 = a, r3 = a * (a - 1.0);
  // Eliminate c3: c4 + 2 c5 = r2 - 3 r1 and 6 c4 + 14 c5 = r3 - 6 r1.
  const double e1 = r2 - 3.0 * r1, e2 = r3 - 6.0 * r1;
  const double c5 = (e2 - 6.0 * e1) / 2.0;
  const double c4 = e1 - 2.0 * c5;
  const double c3 = r1 - c4 - c5;
  fam.junction = {c3, c4, c5};
  for (int i = 0; i <= 4000; ++i) {
    const double x = i / 4000.0;
    if (fam.g_prime(x) < -1e-14 || fam.g(x) > std::pow(x, a) + 1e-14)
      throw std::logic_error("cutoffs: junction is not monotone or exceeds x^{s/2}");
  }
  // (1 + g(r-1)) / g(r-1) over r >= 2; g(r-1) >= 1 there so the ratio is at most 2.
  double worst = 0;
  for (int i = 0; i <= 20000; ++i) {
    const double r = 2.0 * std::pow(1e6, i / 20000.0);
    const double gr = fam.g(r - 1.0);
    worst = std::max(worst, (1.0 + gr) / gr);
  }
  fam.C1 = 1.05 * worst;
  return fam;
}

namespace {

const std::vector<double>& eps_sample_radii() {
  static const std::vector<double> radii = [] {
    std::vector<double> r;
    const int count = 20000;
    for (int i = 0; i <= count; ++i) r.push_back(std::pow(1e8, double(i) / count));
    return r;
  }();
  return radii;
}

std::string point_text(double theta, double r) {
  std::ostringstream os;
  os << "theta=" << theta << " |v|=" << r;
  return os.str();
}

}  // namespace

bool scaled_inequality_holds(const CutoffFamily& fam, double theta, double eps,
                             double* witness) {
  double worst = std::numeric_limits<double>::infinity();
  double at = 0;
  for (double r : eps_sample_radii()) {
    const double margin = fam.psi_theta(theta, r / eps) - 2.0 * fam.psi_theta(theta, r) - 2.0;
    if (margin < worst) {
      worst = margin;
      at = r;
    }
  }
  if (witness) *witness = at;
  return worst >= 0;
}

Epsilon0Result epsilon0(const CutoffFamily& fam, double theta) {
  if (!(theta > 0 && theta < 1)) throw std::invalid_argument("epsilon0: theta must lie in (0,1)");
  Epsilon0Result res;
  res.sample_count = eps_sample_radii().size();
  double hi = 0.5;
  if (scaled_inequality_holds(fam, theta, hi)) {
    res.epsilon0 = hi;
  } else {
    double lo = hi;
    int guard = 0;
    while (!scaled_inequality_holds(fam, theta, lo)) {
      hi = lo;
      lo *= 0.5;
      if (++guard > 200) return res;
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = std::sqrt(lo * hi);
      (scaled_inequality_holds(fam, theta, mid) ? lo : hi) = mid;
    }
    res.epsilon0 = lo;
  }
  res.certified = scaled_inequality_holds(fam, theta, res.epsilon0, &res.binding_radius) &&
                  scaled_inequality_holds(fam, theta, 0.5 * res.epsilon0);
  return res;
}

bool CutoffReport::all_passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed; });
}

CutoffReport check_properties(const CutoffFamily& fam, const Kernel& k,
                              const std::vector<double>& thetas_in,
                              const std::vector<double>& radii) {
  if (thetas_in.size() < 2) throw std::invalid_argument("check_properties needs two thetas");
  CutoffReport rep;
  rep.thetas = thetas_in;
  std::sort(rep.thetas.begin(), rep.thetas.end());
  rep.target_exponent = 1.5 * fam.s;
  const int n = fam.n;
  auto vec_at = [](double r) { return Vec{r, 0.0}; };

  // (i)
  PropertyResult p1;
  p1.name = "(i) bounded L psi, theta^{3s/2} decay on B_3";
  double cpsi = 0;
  auto L_of = [&](const std::function<double(double)>& radial, std::vector<double> kinks,
                  double r) {
    return apply_L_pointwise(
        k, [&](const Vec& w) { return radial(norm(w, n)); }, 0.0, Vec{}, vec_at(r), kinks);
  };
  for (double r : radii) {
    const double v = L_of([&](double q) { return fam.psi1(q); }, {1.0, 2.0}, r);
    ++p1.checked;
    if (!std::isfinite(v)) {
      p1.passed = false;
      ++p1.violations;
      if (p1.witness.empty()) p1.witness = "psi1 " + point_text(1.0, r);
    }
    cpsi = std::max(cpsi, std::abs(v));
  }
  std::vector<double> log_t, log_sup;
  for (double th : rep.thetas) {
    const double R = 1.0 / th;
    double sup_core = 0;
    for (double r : radii) {
      const double v = L_of([&](double q) { return fam.psi_theta(th, q); }, {R, R + 1.0}, r);
      ++p1.checked;
      if (!std::isfinite(v)) {
        p1.passed = false;
        ++p1.violations;
        if (p1.witness.empty()) p1.witness = point_text(th, r);
        continue;
      }
      cpsi = std::max(cpsi, std::abs(v));
      if (r <= 3.0) sup_core = std::max(sup_core, std::abs(v));
    }
    rep.sup_L_core.push_back(sup_core);
    log_t.push_back(std::log(th));
    log_sup.push_back(std::log(sup_core));
  }
  rep.fitted_exponent = fit_line(log_t, log_sup).first;
  if (!(rep.fitted_exponent >= rep.target_exponent - 0.15)) {
    p1.passed = false;
    if (p1.witness.empty()) p1.witness = "fitted exponent below 3s/2 - 0.15";
  }
  rep.C_psi = cpsi;
  rep.properties.push_back(p1);

  // (ii)
  PropertyResult p2;
  p2.name = "(ii) vanishing on balls";
  auto flag = [](PropertyResult& p, const std::string& w) {
    p.passed = false;
    ++p.violations;
    if (p.witness.empty()) p.witness = w;
  };
  for (double r : radii) {
    ++p2.checked;
    if (r <= 1.0 && fam.psi1(r) != 0) flag(p2, "psi1 " + point_text(1.0, r));
    for (double th : rep.thetas) {
      ++p2.checked;
      if (r <= 1.0 / th && fam.psi_theta(th, r) != 0) flag(p2, point_text(th, r));
    }
  }
  for (double th : rep.thetas) {
    ++p2.checked;
    if (fam.psi_theta(th, 1.0 / th) != 0) flag(p2, point_text(th, 1.0 / th));
  }
  rep.properties.push_back(p2);

  // (iii)
  PropertyResult p3;
  p3.name = "(iii) ordering in theta";
  for (double r : radii) {
    for (std::size_t a = 0; a < rep.thetas.size(); ++a) {
      const double pa = fam.psi_theta(rep.thetas[a], r);
      ++p3.checked;
      if (pa > fam.psi1(r)) flag(p3, point_text(rep.thetas[a], r));
      for (std::size_t b = a + 1; b < rep.thetas.size(); ++b) {
        ++p3.checked;
        if (pa > fam.psi_theta(rep.thetas[b], r)) flag(p3, point_text(rep.thetas[a], r));
      }
    }
  }
  rep.properties.push_back(p3);

  // (iv)
  PropertyResult p4;
  p4.name = "(iv) 1 + psi_theta <= psi1 for |v| >= 2";
  for (double r : radii) {
    if (r < 2.0) continue;
    for (double th : rep.thetas) {
      ++p4.checked;
      if (1.0 + fam.psi_theta(th, r) > fam.psi1(r)) flag(p4, point_text(th, r));
    }
  }
  for (double th : rep.thetas) {
    ++p4.checked;
    if (1.0 + fam.psi_theta(th, 2.0) > fam.psi1(2.0)) flag(p4, point_text(th, 2.0));
  }
  rep.properties.push_back(p4);

  // (v)
  PropertyResult p5;
  p5.name = "(v) scaled inequality";
  for (double th : rep.thetas) {
    rep.eps0.push_back(epsilon0(fam, th));
    ++p5.checked;
    if (!rep.eps0.back().certified) flag(p5, point_text(th, 0.0));
  }
  rep.properties.push_back(p5);
  return rep;
}

std::function<double(const Vec&)> level_cutoff(const CutoffFamily& fam, int k) {
  if (k < 0) throw std::invalid_argument("level_cutoff: k must be non-negative");
  return [fam, k](const Vec& v) { return fam.psi_k(k, norm(v, fam.n)); };
}

nlohmann::json to_json(const CutoffFamily& fam) {
  nlohmann::json j;
  j["s"] = fam.s;
  j["n"] = fam.n;
  j["C1"] = fam.C1;
  j["junction"] = {fam.junction[0], fam.junction[1], fam.junction[2]};
  if (std::isfinite(fam.C_psi)) j["C_psi"] = fam.C_psi;
  return j;
}

}  // namespace kfp
