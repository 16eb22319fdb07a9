#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kfp/kernel.hpp"
#include "kfp/phase.hpp"
#include "kfp/solver.hpp"

namespace kfp {

struct ScalingParams {
  double epsilon = 1;
  double s = 0.3;
  double r = std::numeric_limits<double>::infinity();

  void validate() const;
  /// eps^{2s(1 - (n+1+n/s)/r)}
  double source_norm_factor(int n) const;
};

/// 4-point Lagrange interpolation per axis; periodic in x. Throws std::out_of_range when
/// t or v leave the sampled range.
double interpolate(const Field& f, double t, const Vec& x, const Vec& v);

/// f_eps(t,x,v) = f(eps^{2s} t, eps^{1+2s} x, eps v) sampled on `target`.
Field scale_field(const Field& f, const ScalingParams& p, const PhaseGrid& target);

/// eps^{n+2s} K(eps^{2s} t, eps^{1+2s} x, eps v, eps w) by direct evaluation.
double scaled_kernel_value(const Kernel& k, double eps, double t, const Vec& x, const Vec& v,
                           const Vec& w);

/// The rescaled kernel as a Kernel; the modulation shell moves out by 1/eps.
Kernel scale_kernel(const Kernel& k, double eps);

/// eps^{2s} a(eps^{2s} t, eps^{1+2s} x, eps v).
Source scale_source(const Source& a, const ScalingParams& p);

/// L^r norm of a over [t_a, t_b] x [-xr, xr]^n x [-vr, vr]^n by tensor Gauss-Legendre
/// quadrature with `nodes` points per axis and per panel; r = inf takes the max over nodes.
double source_norm_box(const Source& a, int n, double r, double t_a, double t_b, double xr,
                       double vr, int nodes, int panels = 4);

struct SourceRatio {
  double measured = 0;
  double predicted = 0;
  double relative_error = 0;
};

/// Measures ||a_eps|| on [-1,0] x B x B (unit cubes) against ||a|| on the image domain, with
/// different quadrature resolutions on the two sides.
SourceRatio measure_source_ratio(const Source& a, int n, const ScalingParams& p);

struct PhasePoint {
  double t = 0;
  Vec x{};
  Vec v{};
};

/// f_z0(t,x,v) = f(t0 + t, x0 + x + v0 t, v0 + v) sampled on `target`.
Field translate_field(const Field& f, const PhasePoint& z0, const PhaseGrid& target);

/// Group law of the Galilean translations: applying a then b equals applying compose(a, b).
PhasePoint compose(const PhasePoint& a, const PhasePoint& b, int n);

struct KineticCylinder {
  PhasePoint center;
  double rho = 1;
  double s = 0.3;
  int n = 1;
  /// |t-t0| <= rho^{2s}, |x - x0 - (t-t0) v0| <= rho^{1+2s}, |v - v0| <= rho; `x_period`
  /// makes the x distance periodic when positive.
  bool contains(const PhasePoint& p, double x_period = 0) const;
};

struct OscillationProfile {
  PhasePoint center;
  std::vector<double> rho;
  std::vector<double> osc;
  std::vector<std::size_t> samples;
  int usable = 0;
  bool saturated = false;  // all oscillations vanish
  double alpha = 0;
  double alpha_r2 = 0;
  double lambda_eff = 0;  // largest l with osc_{j+1} <= (1 - l/2) osc_j for all j
  bool decay_holds = false;
};

struct OscillationOptions {
  double rho0 = 2;
  double lambda = 0.5;
  int J = 6;
  double s = 0.3;
  int margin_cells = 4;
};

/// Oscillation of f over nested kinetic cylinders of radius rho0 lambda^j. A scale is usable
/// when its velocity radius is at least one cell and its time half-height at least one slice.
OscillationProfile oscillation_profile(const Field& f, const PhasePoint& z0,
                                       const OscillationOptions& opt);

/// Profiles at several centers, computed in parallel over the shared field.
std::vector<OscillationProfile> oscillation_profiles(const Field& f,
                                                     const std::vector<PhasePoint>& centers,
                                                     const OscillationOptions& opt,
                                                     int workers = 0);

void write_profile_csv(const std::vector<OscillationProfile>& profiles, const std::string& path);

}  // namespace kfp
