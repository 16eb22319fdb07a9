#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/phase.hpp"

namespace kfp {

/// Axis-aligned space-time box [t_lo, t_hi] x prod [x_lo, x_hi].
struct StBox {
  double t_lo = 0, t_hi = 0;
  Vec x_lo{}, x_hi{};
  double volume(int n) const;
  bool contains(double t, const Vec& x, int n) const;
};

/// Indicator of a set on a uniform space-time grid over [t_lo, t_hi] x [-x_half, x_half]^n;
/// points off the grid are outside the set.
struct GridSet {
  int n = 1;
  double t_lo = -6, t_hi = 1, x_half = 3;
  int nt = 0, nx = 0;
  std::vector<std::uint8_t> mask;

  static GridSet empty(int n, int nt, int nx, double t_lo = -6, double t_hi = 1,
                       double x_half = 3);
  double dt() const { return (t_hi - t_lo) / nt; }
  double dx() const { return 2 * x_half / nx; }
  bool contains(double t, const Vec& x) const;
  /// Marks every cell whose center lies in the box.
  void add_box(const StBox& b);
  /// Marks the whole time band [a, b] (cell aligned where possible).
  void add_slab(double a, double b);
  void fill();
};

struct ConeProblem {
  int n = 1;
  double t0 = -4.5;
  Vec x0{};
  std::vector<StBox> base;
  GridSet S;
  double mu = 0;

  /// Throws std::invalid_argument when the vertex or a base box is out of place.
  void validate() const;
  double base_measure() const;
  /// p is in the cone iff the ray from the vertex through p meets the base at parameter >= 1.
  bool in_cone(double t, const Vec& x) const;
};

/// H^1 measure of the segment from the vertex to b inside S, with arc-length weight.
double segment_measure(double t0, const Vec& x0, double tb, const Vec& xb, const GridSet& S);

struct HypothesisCheck {
  bool holds = true;
  std::size_t checked = 0;
  double min_measure = 0;
};

/// Evaluates the per-segment hypothesis at `samples` random base points plus box corners.
HypothesisCheck check_hypothesis(const ConeProblem& p, std::size_t samples, std::uint64_t seed);

enum class ConeVerdict { Pass, Fail, Vacuous };
std::string to_string(ConeVerdict v);

struct ConeResult {
  double measure = 0;
  double standard_error = 0;
  double bound = 0;      // |B| mu^2 / 80
  double slack = 0;      // measure / bound
  double base_measure = 0;
  HypothesisCheck hypothesis;
  double A_minus2 = 0;
  bool A_bound_holds = false;  // A(-2) >= |B| / 4
  ConeVerdict verdict = ConeVerdict::Vacuous;
};

/// Monte Carlo estimate of |C n S|, sharded over a fixed number of counter-seeded streams so
/// the result is independent of the worker count.
ConeResult cone_measure_check(const ConeProblem& p, std::size_t samples, std::uint64_t seed,
                              int workers = 0);

/// Cross-sectional area of the cone at time t, by midpoint quadrature over the bounding box.
double cross_section_area(const ConeProblem& p, double t, int resolution = 0);

struct AffineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

/// Least-squares line through A(t) at `points` times in (t0, -2).
AffineFit fit_cross_section(const ConeProblem& p, int points = 12);

/// Random instance: vertex, one to three base boxes, S a union of time slabs and boxes, and
/// mu set just below the sampled minimum segment measure.
ConeProblem random_cone_problem(int n, std::uint64_t seed);

/// Slab instance: S is the band [-3.5, -3.5 + mu]; every segment meets it in at least mu.
ConeProblem slab_cone_problem(int n, double mu, std::uint64_t seed);

nlohmann::json to_json(const ConeProblem& p);
nlohmann::json to_json(const ConeResult& r);

}  // namespace kfp
