#include "kfp/phase.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "kfp/fft.hpp"
#include "kfp/lattice.hpp"

namespace kfp {

double norm(const Vec& a, int n) { return std::sqrt(dot(a, a, n)); }

double dot(const Vec& a, const Vec& b, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double VBox::cell() const { return std::pow(h(), n); }

std::size_t VBox::size() const {
  std::size_t s = 1;
  for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(nv);
  return s;
}

std::array<int, kMaxDim> VBox::split(std::size_t idx) const {
  if (n == 1) return {static_cast<int>(idx), 0};
  return {static_cast<int>(idx / nv), static_cast<int>(idx % nv)};
}

Vec VBox::point(std::size_t idx) const {
  const auto j = split(idx);
  Vec p{};
  for (int a = 0; a < n; ++a) p[a] = coord(j[a]);
  return p;
}

double VBox::frequency(int k) const {
  const int ks = k <= nv / 2 ? k : k - nv;
  return 2.0 * M_PI * ks / (2.0 * V);
}

double VBox::freq_norm(std::size_t idx) const {
  const auto j = split(idx);
  double s = 0;
  for (int a = 0; a < n; ++a) {
    const double xi = frequency(j[a]);
    s += xi * xi;
  }
  return std::sqrt(s);
}

std::size_t PhaseGrid::x_count() const {
  return n == 1 ? static_cast<std::size_t>(nx) : static_cast<std::size_t>(nx) * nx;
}

std::size_t PhaseGrid::v_count() const { return vbox().size(); }

Vec PhaseGrid::x_point(std::size_t idx) const {
  if (n == 1) return {x_coord(static_cast<int>(idx)), 0.0};
  return {x_coord(static_cast<int>(idx / nx)), x_coord(static_cast<int>(idx % nx))};
}

double PhaseGrid::cell_volume() const { return dt() * slice_cell(); }

double PhaseGrid::slice_cell() const { return std::pow(dx(), n) * std::pow(dv(), n); }

bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

PhaseGrid make_grid(int n, double x_period, double v_halfwidth, int nx, int nv, double t0,
                    double t1, int nt, std::optional<double> s) {
  if (n != 1 && n != 2) throw std::invalid_argument("n must be 1 or 2");
  if (!is_power_of_two(nx)) throw std::invalid_argument("nx must be a power of two");
  if (!is_power_of_two(nv)) throw std::invalid_argument("nv must be a power of two");
  if (!(x_period > 0)) throw std::invalid_argument("x_period must be positive");
  if (!(v_halfwidth >= 8.0)) throw std::invalid_argument("v_halfwidth must be at least 8");
  if (nt < 1) throw std::invalid_argument("nt must be at least 1");
  if (nt > 1 && !(t1 > t0)) throw std::invalid_argument("t1 must exceed t0");
  if (s) {
    if (!(*s > 0 && *s < 1)) throw std::invalid_argument("s must lie in (0,1)");
    if (!(2.0 * *s < n)) throw std::invalid_argument("2s must be smaller than n");
  }
  return PhaseGrid{n, x_period, v_halfwidth, nx, nv, t0, t1, nt};
}

bool Field::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double d) { return std::isfinite(d); });
}

bool Ball::contains(const Vec& p, int n) const {
  double s = 0;
  for (int i = 0; i < n; ++i) s += (p[i] - center[i]) * (p[i] - center[i]);
  return s <= radius * radius * (1 + 1e-12) + 1e-300;
}

bool LevelPredicate::operator()(double f) const {
  switch (cmp) {
    case Comparator::LessEq: return f <= a;
    case Comparator::GreaterEq: return f >= a;
    case Comparator::StrictlyBetween: return f > a && f < b;
  }
  return false;
}

void check_region(const PhaseGrid& g, const Region& r) {
  const double tol = 1e-9 * std::max(1.0, std::abs(g.t1 - g.t0));
  if (!(r.t_a <= r.t_b)) throw std::invalid_argument("region: t_a must not exceed t_b");
  if (r.t_a < g.t0 - tol || r.t_b > g.t1 + tol)
    throw std::invalid_argument("region: time interval leaves the grid");
  if (r.x.radius < 0) throw std::invalid_argument("region: negative x radius");
  for (int a = 0; a < g.n; ++a) {
    if (std::abs(r.x.center[a]) + r.x.radius > 0.5 * g.x_period + 1e-12)
      throw std::invalid_argument("region: x ball leaves the periodic cell");
  }
  if (r.v) {
    if (r.v->radius < 0) throw std::invalid_argument("region: negative v radius");
    for (int a = 0; a < g.n; ++a) {
      if (std::abs(r.v->center[a]) + r.v->radius > g.v_halfwidth)
        throw std::invalid_argument("region: v ball leaves the velocity box");
    }
  }
}

namespace {

template <class Visit>
void for_each_in_region(const Field& f, const Region& r, Visit&& visit) {
  const auto& g = f.grid;
  const double tol = 1e-9 * std::max(1.0, g.dt());
  for (int it = 0; it < g.nt; ++it) {
    const double t = g.t_at(it);
    if (t < r.t_a - tol || t > r.t_b + tol) continue;
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      if (!r.x.contains(g.x_point(ix), g.n)) continue;
      const auto slice = f.vslice(it, ix);
      for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
        if (r.v && !r.v->contains(g.v_point(iv), g.n)) continue;
        visit(slice[iv]);
      }
    }
  }
}

}  // namespace

double lp_norm(const Field& f, double p, const Region& region) {
  if (!(p >= 1)) throw std::invalid_argument("lp_norm: p must be >= 1");
  check_region(f.grid, region);
  if (std::isinf(p)) {
    double m = 0;
    for_each_in_region(f, region, [&](double v) { m = std::max(m, std::abs(v)); });
    return m;
  }
  double acc = 0;
  for_each_in_region(f, region, [&](double v) { acc += std::pow(std::abs(v), p); });
  return std::pow(acc * f.grid.cell_volume(), 1.0 / p);
}

double hs_norm_v(std::span<const double> vslice, const VBox& box, double s) {
  std::vector<fft::cplx> buf(vslice.begin(), vslice.end());
  fft::forward(buf, std::vector<int>(box.n, box.nv));
  double acc = 0;
  for (std::size_t k = 0; k < buf.size(); ++k) {
    const double xi = box.freq_norm(k);
    acc += std::pow(1.0 + xi * xi, s) * std::norm(buf[k]);
  }
  return std::sqrt(acc * box.cell() / static_cast<double>(buf.size()));
}

SeminormResult gagliardo_seminorm(std::span<const double> vslice, const VBox& box, double s) {
  const int n = box.n, nv = box.nv;
  const double h = box.h();
  const std::size_t N = box.size();
  SeminormResult res;
  // |k h|^{-n-2s} over signed offsets, indexed (k + nv - 1) per axis.
  const int span = 2 * nv - 1;
  std::vector<double> table(n == 1 ? span : static_cast<std::size_t>(span) * span, 0.0);
  for (std::size_t q = 0; q < table.size(); ++q) {
    const int k0 = static_cast<int>(n == 1 ? q : q / span) - (nv - 1);
    const int k1 = n == 1 ? 0 : static_cast<int>(q % span) - (nv - 1);
    const double r = h * std::sqrt(double(k0) * k0 + double(k1) * k1);
    table[q] = r > 0 ? std::pow(r, -n - 2.0 * s) : 0.0;
  }
  double pairs = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto ji = box.split(i);
    for (std::size_t j = i + 1; j < N; ++j) {
      const double d = vslice[i] - vslice[j];
      if (d == 0) continue;
      const auto jj = box.split(j);
      const std::size_t q = n == 1 ? static_cast<std::size_t>(jj[0] - ji[0] + nv - 1)
                                   : static_cast<std::size_t>(jj[0] - ji[0] + nv - 1) * span +
                                         (jj[1] - ji[1] + nv - 1);
      pairs += 2.0 * d * d * table[q];
    }
  }
  pairs *= box.cell() * box.cell();

  double exterior = 0, grad = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const double fi = vslice[i];
    const Vec p = box.point(i);
    if (fi != 0) {
      exterior += 2.0 * fi * fi * exterior_power_integral(box, p, s) * box.cell();
      if (distance_to_exterior(box, p) < 1.0) res.boundary_contact = true;
    }
    const auto j = box.split(i);
    for (int a = 0; a < n; ++a) {
      auto jn = j;
      jn[a] += 1;
      const double fn = jn[a] < nv ? vslice[n == 1 ? jn[0] : jn[0] * nv + jn[1]] : 0.0;
      grad += (fn - fi) * (fn - fi) / (h * h) * box.cell();
    }
  }
  const double diag = 2.0 * diagonal_weight(n, s) * std::pow(h, 2.0 - 2.0 * s) * grad;
  res.value = std::sqrt(std::max(0.0, pairs + exterior + diag));
  return res;
}

double level_set_measure(const Field& f, const LevelPredicate& pred, const Region& region) {
  check_region(f.grid, region);
  std::size_t count = 0;
  for_each_in_region(f, region, [&](double v) { count += pred(v) ? 1 : 0; });
  return static_cast<double>(count) * f.grid.cell_volume();
}

std::vector<double> velocity_average(const Field& f, std::span<const double> weight) {
  const auto& g = f.grid;
  if (weight.size() != g.v_count()) throw std::invalid_argument("weight size mismatch");
  std::vector<double> rho(static_cast<std::size_t>(g.nt) * g.x_count(), 0.0);
  const double cell = g.vbox().cell();
  for (int it = 0; it < g.nt; ++it) {
    for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
      const auto sl = f.vslice(it, ix);
      double acc = 0;
      for (std::size_t iv = 0; iv < sl.size(); ++iv) acc += weight[iv] * sl[iv];
      rho[static_cast<std::size_t>(it) * g.x_count() + ix] = acc * cell;
    }
  }
  return rho;
}

namespace {

void write_le(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_field(const Field& f, const std::string& stem) {
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + stem + ".bin");
  for (double v : f.data) write_le(bin, v);

  const auto& g = f.grid;
  nlohmann::json meta = {{"n", g.n},   {"nx", g.nx},         {"nv", g.nv},
                         {"nt", g.nt}, {"x_period", g.x_period}, {"v_halfwidth", g.v_halfwidth},
                         {"t0", g.t0}, {"t1", g.t1}};
  meta["s"] = f.metadata.count("s") ? nlohmann::json(f.metadata.at("s")) : nlohmann::json();
  meta["kappa"] =
      f.metadata.count("kappa") ? nlohmann::json(f.metadata.at("kappa")) : nlohmann::json();
  meta["metadata"] = f.metadata;
  std::ofstream js(stem + ".json");
  if (!js) throw std::runtime_error("cannot open " + stem + ".json");
  js << meta.dump(2) << "\n";
}

Field read_field(const std::string& stem) {
  std::ifstream js(stem + ".json");
  if (!js) throw std::runtime_error("cannot open " + stem + ".json");
  const auto meta = nlohmann::json::parse(js);
  const PhaseGrid g = make_grid(meta.at("n"), meta.at("x_period"), meta.at("v_halfwidth"),
                                meta.at("nx"), meta.at("nv"), meta.at("t0"), meta.at("t1"),
                                meta.at("nt"));
  Field f(g);
  if (meta.contains("metadata")) f.metadata = meta["metadata"].get<std::map<std::string, double>>();
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + stem + ".bin");
  for (auto& v : f.data) v = read_le(bin);
  if (!bin) throw std::runtime_error("field payload shorter than its sidecar declares");
  return f;
}

}  // namespace kfp
