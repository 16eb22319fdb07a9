#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kfp/cutoffs.hpp"
#include "kfp/kernel.hpp"
#include "kfp/phase.hpp"
#include "kfp/solver.hpp"

namespace kfp {

struct ExponentTable {
  int n = 1;
  double s = 0;
  double r = 0;
  double r0 = 0;      // n(1+s)(n+1)/s * (2s/n + 1/2 + n/(2s))
  double r_crit = 0;  // where recursion_gamma equals 1: q(2 - theta*)/(q - 2)
  double p1 = 0;
  double p2 = 0;  // infinite when 2s/n = 1/2
  double theta_star = 0;
  double theta_residual = 0;  // |theta/2 + (1-theta)/p1 - theta/p2 - (1-theta)|
  double q = 0;
  double beta = 0;
  double alpha_dg2 = 0;
  double recursion_gamma = 0;  // (q/2)(1 - 2/r + theta*/r)
};

/// Throws std::invalid_argument unless 0 < s < 1, 2s < n and r > 2.
ExponentTable exponents(int n, double s, double r);
double recursion_gamma(const ExponentTable& t, double r);
/// Root of recursion_gamma(r) = 1 on (2, inf) by bisection.
double gamma_crossing_bisection(int n, double s);

/// Raised when a diagnostic's hypothesis fails; `witness` names the offending point.
struct PreconditionError : std::runtime_error {
  PreconditionError(const std::string& what, std::string w)
      : std::runtime_error(what + " at " + w), witness(std::move(w)) {}
  std::string witness;
};

struct EnergySetup {
  double T = -2;  // Q = (T, 0] x Omega
  double S = -1;  // Qbar = [S, 0] x Omega_bar
  Vec x_center{};
  double omega_radius = 2;
  double omega_bar_radius = 1;
  double R = 3;  // f <= psi is required for |v| >= R on Q
};

struct EnergyReport {
  double lhs_B = 0;
  double lhs_cross = 0;
  double rhs_f2 = 0;      // R int_Q f+^2 / delta
  double rhs_Lpsi = 0;    // sup_{|v|<R} |L psi| int_Q f+ / delta
  double rhs_source = 0;  // ||a||_r ||f+||_{r*} / delta
  double delta = 0;
  double sup_L_psi = 0;
  double fitted_C = 0;  // (lhs_B + lhs_cross) / sum of rhs terms; 0 when everything vanishes
  bool vacuous = false;  // f+ vanishes identically
  double rhs_total() const { return rhs_f2 + rhs_Lpsi + rhs_source; }
};

struct RadialCutoff {
  std::function<double(double)> psi;  // as a function of |v|
  std::vector<double> kinks;           // radii where psi is not smooth
};

/// Energy inequality terms for f on the regions of `setup`. f- outside the velocity box is
/// taken to be psi (f is negligible there) and its pairing with f+ is integrated along rays.
/// `sup_L_psi` may be supplied to reuse an earlier quadrature.
EnergyReport energy_report(const Field& f, const Kernel& k, const RadialCutoff& psi,
                           const EnergySetup& setup, const Source& a,
                           std::optional<double> sup_L_psi = std::nullopt);

/// sup over grid velocities with |v| < R of |L psi|.
double sup_L_psi(const Kernel& k, const RadialCutoff& psi, const VBox& box, double R);

struct LevelReport {
  std::vector<double> E;  // E_k for k = 0..k_max
  bool monotone = true;
  std::size_t indicator_checked = 0;
  std::size_t indicator_violations = 0;
  bool fit_available = false;
  double fit_C = 0;
  double fit_gamma = 0;
  int first_below = -1;  // first k with E_k < 1e-12, -1 if none
};

/// E_k over Q_k = [-1 - 2^{-k}, 0] x B_{1 + 2^{-k}} and all velocities, with psi_k from `fam`.
LevelReport degiorgi_levels(const Field& f, const CutoffFamily& fam, int k_max);

struct UniversalConstants {
  double delta0 = 0.05;
  double gamma0 = 0.002;
  double theta0 = 0.1;
  double lambda = 0.5;
  void validate() const;
};

enum class Verdict { Pass, Fail, Vacuous };
std::string to_string(Verdict v);

struct DG2Report {
  double early_measure = 0;    // |{f <= 0} in Q_early x B_2|
  double early_threshold = 0;  // |Q_early| |B_2| / 2
  double late_measure = 0;     // |{f >= 1 - theta0} in Q_late x B_2|
  double between_measure = 0;  // |{0 < f < 1 - theta0} in Q_int x B_3|
  bool early_holds = false;
  bool late_holds = false;
  bool conclusion_holds = false;
  Verdict verdict = Verdict::Vacuous;
};

/// Requires t0 <= -6, t1 >= 0, B_3 inside the spatial torus and the velocity box, and
/// |f| <= 1 + psi_theta0 on Q_ext (else PreconditionError).
DG2Report dg2_measures(const Field& f, const CutoffFamily& fam, const UniversalConstants& uc);

struct AveragingReport {
  double alpha = 0;
  double lhs = 0;  // windowed H^alpha norm of rho on the inner region
  double rhs = 0;  // ||f||_2 + ||(1 - Delta_v)^{-m/2} g||_2 on the outer region
  double ratio = 0;
  double transport_residual = 0;  // relative
  bool vacuous = false;
};

struct SpaceTimeBox {
  double t_a = 0, t_b = 0;
  Vec x_center{};
  double x_radius = 0;  // half-width of the cube in x
};

/// Checks (d_t + v.grad_x) f = g with transport_derivative on the outer region,
/// then compares the windowed H^alpha norm of rho = int eta f with the outer norms of f, g.
AveragingReport averaging_check(const Field& f, const Field& g, std::span<const double> eta,
                                double m, const SpaceTimeBox& inner, const SpaceTimeBox& outer,
                                double tolerance = 1e-2);

/// (d_t + v.grad_x) f on the grid: fourth-order differences in t, spectral in x.
Field transport_derivative(const Field& f);

}  // namespace kfp
