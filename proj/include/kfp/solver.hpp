#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kfp/kernel.hpp"
#include "kfp/phase.hpp"

namespace kfp {

using SourceFn = std::function<double(double t, const Vec& x, const Vec& v)>;

struct Source {
  std::string kind = "zero";
  SourceFn fn;  // empty means a == 0
  double r = std::numeric_limits<double>::infinity();  // declared integrability exponent
  bool is_zero() const { return !fn; }
  double operator()(double t, const Vec& x, const Vec& v) const { return fn ? fn(t, x, v) : 0.0; }
};

/// Samples the source on every stored slice of the grid.
Field sample_source(const Source& a, const PhaseGrid& g);

enum class Stepper { SpectralExponential, Imex, ExplicitRK2 };

Stepper parse_stepper(const std::string& name);
std::string to_string(Stepper s);

struct RunConfig {
  PhaseGrid grid;
  Kernel kernel = Kernel::homogeneous(1, 0.3, 2.0);
  Source source;
  std::vector<double> initial;  // one slice, layout [x][v]
  Stepper stepper = Stepper::SpectralExponential;
  int record_every = 1;
  double c_stab = 0.2;
  bool collisions = true;
  /// Coefficient of the homogeneous part treated implicitly by the IMEX stepper; NaN
  /// selects 1/kappa.
  double imex_c_low = std::numeric_limits<double>::quiet_NaN();

  /// Internal step: (t1 - t0) / ((nt - 1) record_every).
  double dt() const;
};

struct StepLog {
  int step = 0;
  double time = 0;
  double cfl_margin = 0;  // 1 - dt / dt_max; 1 for unconditionally stable steppers
  double tail_error = 0;  // 2 kappa sup|f| times the kernel mass beyond the box half-width
  double mass = 0;
  double l2 = 0;
};

struct Trajectory {
  Field field;
  std::vector<StepLog> log;
};

/// Advances one slice of the state by dt starting at time t with Strang splitting.
class Integrator {
 public:
  explicit Integrator(const RunConfig& cfg);
  void step(std::vector<double>& state, double t) const;
  double dt() const { return dt_; }
  double cfl_margin() const { return cfl_margin_; }

 private:
  void transport(std::vector<double>& state, double tau) const;
  void collide(std::vector<double>& state, double t) const;
  void collide_slice(std::span<double> f, double t, const Vec& x, std::size_t ix) const;
  void apply_explicit(std::span<const double> f, std::span<double> out, double t,
                      const Vec& x) const;

  RunConfig cfg_;
  double dt_ = 0;
  double cfl_margin_ = 1;
  std::vector<int> xdims_;
  std::vector<double> kx_;  // wave vector components per flattened x bin, n per bin
  CollisionOperator full_;
  std::vector<double> implicit_symbol_;  // spectral part, per v bin
  std::unique_ptr<CollisionOperator> low_;
};

/// Throws std::runtime_error naming the failing time on CFL violation or non-finite values.
Trajectory run(const RunConfig& cfg);

double total_mass(std::span<const double> slice, const PhaseGrid& g);
double l2_norm_slice(std::span<const double> slice, const PhaseGrid& g);

void write_step_log(const std::vector<StepLog>& log, const std::string& path);

struct TestFunction {
  std::function<double(double, const Vec&, const Vec&)> phi;
  std::function<double(double, const Vec&, const Vec&)> dt_phi;
  std::function<Vec(double, const Vec&, const Vec&)> grad_x_phi;
};

/// Smooth test function: time bump on (ta, tb), 1 + cos(2 pi x_1 / period) in space, velocity
/// bump of the given radius.
TestFunction default_test_function(int n, double x_period, double ta, double tb,
                                   double v_radius);

/// | -int f (d_t + v.grad_x) phi + int B(f, phi) - int a phi | with B(f,phi) = -<f, L phi>.
double weak_residual(const Field& f, const Kernel& k, const Source& a, const TestFunction& tf);

/// Profile H_sigma(v) with Fourier transform proportional to |xi|^{2 sigma} e^{-|xi|^2/2},
/// normalized so H_0 = e^{-|v|^2/2}. (-Delta)^s H_sigma = H_{sigma+s}.
double spectral_profile(int n, double sigma, double r);

/// Manufactured solution f = (1 + A cos(k x_1 - w t)) H_2(v) for the homogeneous kernel.
struct Manufactured {
  int n = 1;
  double s = 0.3;
  double c = 1.0;  // kernel normalization
  double A = 0.5;
  double k = 1.0;
  double w = 1.0;
  double f(double t, const Vec& x, const Vec& v) const;
  double L_f(double t, const Vec& x, const Vec& v) const;
  Source source() const;
  std::vector<double> initial(const PhaseGrid& g) const;
  Field sample(const PhaseGrid& g) const;
};

}  // namespace kfp
