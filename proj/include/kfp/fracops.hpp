#pragma once

#include <span>
#include <vector>

#include "kfp/phase.hpp"

namespace kfp {

enum class MultiplierKind { LambdaPow, BesselPow };

/// |xi|^sigma (LambdaPow) or (1+|xi|^2)^{sigma/2} (BesselPow) on the periodic v-box.
/// LambdaPow with sigma < 0 annihilates the zero mode.
struct MultiplierOp {
  MultiplierKind kind = MultiplierKind::BesselPow;
  double sigma = 0;
  double symbol(double xi) const;
};

std::vector<double> apply_multiplier(const MultiplierOp& op, std::span<const double> vslice,
                                     const VBox& box);

/// C_{n,s} with (-Delta)^s f = C_{n,s} PV int (f(v) - f(w)) |v-w|^{-n-2s} dw.
double frac_laplacian_constant(int n, double s);

/// Profile eta(v) = A (1 - |v|^2)^4 on the unit ball, normalized to unit mass.
double mollifier_profile(double r, int n);
/// Fourier transform of the profile as a function of |xi|; equals 1 at 0.
double mollifier_hat(double xi, int n);

struct Mollifier {
  double epsilon = 0.1;
};

struct MollifyResult {
  std::vector<double> values;
  bool boundary_contact = false;
};

/// Convolution with eta_eps, realized exactly on the periodic box as the multiplier
/// eta_hat(eps xi). Mass is preserved because eta_hat(0) = 1.
MollifyResult mollify(std::span<const double> vslice, const VBox& box, const Mollifier& m);

struct RateReport {
  double rate = 0;       // least-squares slope of log error against log eps
  double max_ratio = 0;  // max of error / (eps^s ||g||_{H^s})
  std::vector<double> eps;
  std::vector<double> errors;
};

RateReport mollifier_rate(std::span<const double> g, const VBox& box, double s,
                          const std::vector<double>& eps_list);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace kfp
