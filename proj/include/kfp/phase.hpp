#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kfp {

constexpr int kMaxDim = 2;

/// Point in R^n for n <= 2; unused components stay zero.
using Vec = std::array<double, kMaxDim>;

double norm(const Vec& a, int n);
double dot(const Vec& a, const Vec& b, int n);

/// Velocity box [-V, V)^n with nv samples per axis, periodic for transforms.
struct VBox {
  int n = 1;
  int nv = 0;
  double V = 8.0;

  double h() const { return 2.0 * V / nv; }
  double cell() const;
  std::size_t size() const;
  double coord(int j) const { return -V + j * h(); }
  Vec point(std::size_t idx) const;
  /// Angular frequency of FFT bin k on this box.
  double frequency(int k) const;
  /// |xi| of flattened FFT bin idx.
  double freq_norm(std::size_t idx) const;
  /// Axis indices of a flattened index.
  std::array<int, kMaxDim> split(std::size_t idx) const;
};

struct PhaseGrid {
  int n = 1;
  double x_period = 0;
  double v_halfwidth = 0;
  int nx = 0;
  int nv = 0;
  double t0 = 0;
  double t1 = 0;
  int nt = 1;

  VBox vbox() const { return {n, nv, v_halfwidth}; }
  double dx() const { return x_period / nx; }
  double dv() const { return 2.0 * v_halfwidth / nv; }
  /// Spacing of stored time slices (1 when a single slice is stored).
  double dt() const { return nt > 1 ? (t1 - t0) / (nt - 1) : 1.0; }
  double t_at(int k) const { return nt > 1 ? t0 + k * dt() : t0; }
  std::size_t x_count() const;
  std::size_t v_count() const;
  std::size_t slice_size() const { return x_count() * v_count(); }
  std::size_t total() const { return slice_size() * static_cast<std::size_t>(nt); }
  double x_coord(int i) const { return -0.5 * x_period + i * dx(); }
  Vec x_point(std::size_t idx) const;
  Vec v_point(std::size_t idx) const { return vbox().point(idx); }
  /// dt dx^n dv^n
  double cell_volume() const;
  /// dx^n dv^n
  double slice_cell() const;
};

/// Validates and returns a grid; throws std::invalid_argument naming the offending parameter.
PhaseGrid make_grid(int n, double x_period, double v_halfwidth, int nx, int nv, double t0,
                    double t1, int nt, std::optional<double> s = std::nullopt);

bool is_power_of_two(long v);

struct Field {
  PhaseGrid grid;
  std::vector<double> data;
  std::map<std::string, double> metadata;

  Field() = default;
  explicit Field(const PhaseGrid& g) : grid(g), data(g.total(), 0.0) {}

  std::size_t index(int it, std::size_t ix, std::size_t iv) const {
    return (static_cast<std::size_t>(it) * grid.x_count() + ix) * grid.v_count() + iv;
  }
  double& at(int it, std::size_t ix, std::size_t iv) { return data[index(it, ix, iv)]; }
  double at(int it, std::size_t ix, std::size_t iv) const { return data[index(it, ix, iv)]; }
  std::span<double> vslice(int it, std::size_t ix) {
    return {data.data() + index(it, ix, 0), grid.v_count()};
  }
  std::span<const double> vslice(int it, std::size_t ix) const {
    return {data.data() + index(it, ix, 0), grid.v_count()};
  }
  std::span<double> tslice(int it) {
    return {data.data() + index(it, 0, 0), grid.slice_size()};
  }
  std::span<const double> tslice(int it) const {
    return {data.data() + index(it, 0, 0), grid.slice_size()};
  }
  bool all_finite() const;
};

struct Ball {
  Vec center{};
  double radius = 0;
  bool contains(const Vec& p, int n) const;
};

struct Region {
  double t_a = 0;
  double t_b = 0;
  Ball x;
  std::optional<Ball> v;
};

/// Throws std::invalid_argument when the region is malformed or leaves the grid.
void check_region(const PhaseGrid& g, const Region& r);

double lp_norm(const Field& f, double p, const Region& region);

/// Bessel-weighted norm of a periodic v-slice; s = 0 reproduces the discrete L2 norm.
double hs_norm_v(std::span<const double> vslice, const VBox& box, double s);

struct SeminormResult {
  double value = 0;
  bool boundary_contact = false;
};

/// Pair-sum Gagliardo seminorm of a zero-extended slice. Pairs with the exterior are
/// integrated analytically and the excluded diagonal is restored by a lattice zeta term.
SeminormResult gagliardo_seminorm(std::span<const double> vslice, const VBox& box, double s);

enum class Comparator { LessEq, GreaterEq, StrictlyBetween };

struct LevelPredicate {
  Comparator cmp = Comparator::LessEq;
  double a = 0;
  double b = 0;  // upper threshold for StrictlyBetween
  bool operator()(double f) const;
};

double level_set_measure(const Field& f, const LevelPredicate& pred, const Region& region);

/// rho(t,x) = sum_v weight(v) f(t,x,v) dv^n, laid out [t][x].
std::vector<double> velocity_average(const Field& f, std::span<const double> weight);

/// Little-endian f64 payload at `stem`.bin with a JSON sidecar at `stem`.json.
void write_field(const Field& f, const std::string& stem);
Field read_field(const std::string& stem);

}  // namespace kfp
