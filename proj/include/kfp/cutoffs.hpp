#pragma once

#include <array>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/kernel.hpp"
#include "kfp/phase.hpp"

namespace kfp {

/// Soft cutoffs built from g(x) = x^{s/2} (x > 1) joined to 0 by a quintic on [0,1].
struct CutoffFamily {
  double s = 0.3;
  int n = 1;
  std::array<double, 3> junction{};  // coefficients of x^3, x^4, x^5
  double C1 = 0;
  double C_psi = std::numeric_limits<double>::quiet_NaN();  // set by check_properties

  double g(double x) const;
  double g_prime(double x) const;
  double g_second(double x) const;
  /// g(x - r) for x >= r, else 0.
  double g_r(double r, double x) const { return x < r ? 0.0 : g(x - r); }
  double psi_theta(double theta, double radius) const { return g_r(1.0 / theta, radius); }
  double psi1(double radius) const { return C1 * g_r(1.0, radius); }
  /// psi^1 + 1/2 - 2^{-k-1}
  double psi_k(int k, double radius) const;
  /// -1 on B_2, 0 outside B_3, C^2 and radially increasing in between.
  double F(double radius) const;

  double psi_theta(double theta, const Vec& v) const { return psi_theta(theta, norm(v, n)); }
  double psi1(const Vec& v) const { return psi1(norm(v, n)); }
  double F(const Vec& v) const { return F(norm(v, n)); }
};

CutoffFamily build_cutoff_family(double s, int n);

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::string witness;  // first violating point, human readable
};

struct Epsilon0Result {
  double epsilon0 = 0;
  bool certified = false;
  double binding_radius = 0;  // sample radius where the margin is smallest at epsilon0
  std::size_t sample_count = 0;
};

/// Largest eps0 <= 1/2 with psi_theta(r/eps) >= 2 psi_theta(r) + 2 for all sampled r >= 1 and
/// every eps <= eps0. The inequality is monotone in eps, so bisection on log eps suffices.
Epsilon0Result epsilon0(const CutoffFamily& fam, double theta);

/// Whether the scaled inequality holds at every sample radius for this eps.
bool scaled_inequality_holds(const CutoffFamily& fam, double theta, double eps,
                             double* witness = nullptr);

struct CutoffReport {
  std::vector<PropertyResult> properties;  // (i) through (v)
  std::vector<double> thetas;
  std::vector<double> sup_L_core;  // sup_{|v|<=3} |L psi_theta| per theta
  double fitted_exponent = 0;      // slope of log sup_L_core against log theta
  double target_exponent = 0;      // 3s/2
  double C_psi = 0;                // max of every sampled |L psi|
  std::vector<Epsilon0Result> eps0;
  bool all_passed() const;
};

/// Evaluates L psi by quadrature and checks properties (i)-(v) at the given radii.
/// Radii are taken along the first axis; the kernel is assumed radially invariant in v for
/// the homogeneous and truncated families.
CutoffReport check_properties(const CutoffFamily& fam, const Kernel& k,
                              const std::vector<double>& thetas,
                              const std::vector<double>& radii);

/// psi_k as a function of v.
std::function<double(const Vec&)> level_cutoff(const CutoffFamily& fam, int k);

nlohmann::json to_json(const CutoffFamily& fam);

}  // namespace kfp
