#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kfp/fft.hpp"
#include "kfp/phase.hpp"

namespace kfp {

enum class KernelFamily { Homogeneous, Truncated, Modulated, Custom };

/// m(t,x,v,w) = 1 + a_tx cos(omega t + k.x + phase) rho(|h|) + a_v cos(2 pi v.h/|h|^2) rho(|h|),
/// h = w - v, rho a smooth bump supported on r_lo < |h| < r_hi. Both terms are invariant
/// under v <-> w and under h -> -h.
struct ModulationSpec {
  std::string id = "none";
  double a_tx = 0;
  double a_v = 0;
  double omega = 1;
  double phase = 0;
  Vec k{1.0, 0.0};
  double r_lo = 1;
  double r_hi = 5;
};

/// Multiplicative modulation for the Custom family; must equal 1 off the shell [r_lo, r_hi].
using CustomModulation =
    std::function<double(double t, const Vec& x, const Vec& v, const Vec& w)>;

class Kernel {
 public:
  static Kernel homogeneous(int n, double s, double kappa, double c = 1.0);
  static Kernel truncated(int n, double s, double kappa, double c = 1.0, double radius = 6.0);
  static Kernel modulated(int n, double s, double kappa, double c, const ModulationSpec& m);
  static Kernel custom(int n, double s, double kappa, double c, CustomModulation m,
                       double r_lo = 1.0, double r_hi = 5.0);

  /// Named modulation with amplitudes sized to keep c*m inside [1/kappa, kappa].
  static ModulationSpec preset(const std::string& id, int n, double kappa, double c,
                               std::uint64_t seed);

  int n() const { return n_; }
  double s() const { return s_; }
  double kappa() const { return kappa_; }
  double c() const { return c_; }
  KernelFamily family() const { return family_; }
  const ModulationSpec& spec() const { return mod_; }
  double truncation_radius() const { return radius_; }
  bool translation_invariant() const {
    return family_ == KernelFamily::Homogeneous || family_ == KernelFamily::Truncated;
  }

  double operator()(double t, const Vec& x, const Vec& v, const Vec& w) const;
  /// K / (c |w-v|^{-n-2s}); zero beyond the truncation radius.
  double modulation(double t, const Vec& x, const Vec& v, const Vec& w) const;
  /// Shell bump used by the modulated family.
  double shell(double r) const;
  /// Time-space factor of the modulated family.
  double tx_factor(double t, const Vec& x) const;

  /// Integral of K(t,x,v,w) over w outside the cell-aligned box.
  double exterior_mass(double t, const Vec& x, const Vec& v, const VBox& box) const;

  /// 2 kappa sup|f| times the integral of |w|^{-n-2s} over |w| > d.
  double tail_bound(double d, double sup_f) const;

 private:
  Kernel() = default;
  int n_ = 1;
  double s_ = 0.3;
  double kappa_ = 2;
  double c_ = 1;
  KernelFamily family_ = KernelFamily::Homogeneous;
  double radius_ = std::numeric_limits<double>::infinity();
  ModulationSpec mod_;
  std::shared_ptr<const CustomModulation> custom_;
};

struct BoundViolation {
  double t;
  Vec x, v, w;
  std::string which;
};

struct BoundCertificate {
  std::size_t samples_checked = 0;
  std::vector<BoundViolation> violations;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0;
  bool passed() const { return violations.empty(); }
};

/// Seeded sampling of (t,x,v,w); checks both symmetries and both bounds to 1e-9 relative.
BoundCertificate validate_bounds(const Kernel& k, std::size_t sample_count, std::uint64_t seed);

enum class BoundaryMode {
  ZeroExtension,  // field vanishes outside the box; exterior pairs integrated analytically
  Periodic,       // pairs on the periodic box with the periodized kernel sum_m K(h + 2Vm)
};

/// sum over m != 0 of |h + L m|^{-n-2s}, restricted to |h + L m| <= r_max.
double periodic_image_sum(int n, double s, double L, const Vec& h,
                          double r_max = std::numeric_limits<double>::infinity());

/// Discrete collision operator on a velocity box. Pairs use the kernel directly; the
/// excluded diagonal is restored by the lattice zeta term.
class CollisionOperator {
 public:
  CollisionOperator(const Kernel& kernel, const VBox& box, BoundaryMode mode);

  void apply(double t, const Vec& x, std::span<const double> f, std::span<double> out) const;
  /// (1/2) sum K [f(w)-f(v)][g(w)-g(v)] plus exterior and diagonal terms.
  double bilinear(double t, const Vec& x, std::span<const double> f,
                  std::span<const double> g) const;
  /// sum_{i != j} W_ij a_i b_j, the pair part of the cross term.
  double pair_product(double t, const Vec& x, std::span<const double> a,
                      std::span<const double> b) const;
  /// Eigenvalues of the periodic translation-invariant operator, one per FFT bin.
  std::vector<double> symbol() const;
  const Kernel& kernel() const { return kernel_; }
  const VBox& box() const { return box_; }
  BoundaryMode mode() const { return mode_; }

 private:
  void pair_apply(double t, const Vec& x, std::span<const double> f, std::vector<double>& wf,
                  std::vector<double>& rowsum) const;
  void diag_term(std::span<const double> f, std::span<double> out, double scale) const;
  std::size_t neighbor(std::size_t i, int axis, int dir) const;  // npos when outside
  Vec offset(std::size_t i, std::size_t j) const;

  Kernel kernel_;
  VBox box_;
  BoundaryMode mode_;
  double diag_coef_ = 0;  // w c h^{2-2s} / h^2
  // translation-invariant fast path
  std::vector<int> conv_dims_;
  std::vector<fft::cplx> weight_hat_;
  std::vector<double> rowsum_;
  // direct path tables
  std::vector<double> ext_power_, ext_shell_, ext_twist_;
  std::vector<double> images_;  // periodic mode: c * image sum * cell per wrapped offset
};

struct LResult {
  std::vector<double> values;
  double tail_bound = 0;
};

/// L f for a zero-extended slice; rejects slices that are nonzero within distance 1
/// of the box boundary.
LResult apply_L(const Kernel& k, std::span<const double> vslice, const VBox& box, double t,
                const Vec& x);

double bilinear_B(const Kernel& k, std::span<const double> f, std::span<const double> g,
                  const VBox& box, double t, const Vec& x);

struct CrossTerm {
  double value = 0;
  double lower_bound = 0;
  bool bound_applicable = false;
  bool bound_holds = true;
};

/// -B(f+, f-) for non-negative slices with disjoint supports, and the B_3 product bound.
CrossTerm cross_term(const Kernel& k, std::span<const double> fplus,
                     std::span<const double> fminus, const VBox& box, double t, const Vec& x);

/// L phi(v) for a function on all of R^n by adaptive quadrature of the symmetrized
/// integrand. `kink_radii` lists radii |w| where phi is not smooth.
double apply_L_pointwise(const Kernel& k, const std::function<double(const Vec&)>& phi,
                         double t, const Vec& x, const Vec& v,
                         const std::vector<double>& kink_radii = {});

/// Constant c_max such that dt <= c_max h^{2s} / kappa keeps explicit RK2 stable for the
/// corrected lattice operator.
double explicit_stability_limit(int n, double s);

}  // namespace kfp
