#include "kfp/conegeom.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace kfp {

namespace {

constexpr int kShards = 64;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
  return std::mt19937_64(seq);
}

/// Ray parameter interval [lo, hi] inside the box, empty when lo > hi.
std::pair<double, double> ray_box(double t0, const Vec& x0, double dt, const Vec& dx,
                                  const StBox& b, int n) {
  double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
  auto slab = [&](double o, double d, double a, double c) {
    if (d == 0) {
      if (o < a || o > c) lo = 1, hi = 0;
      return;
    }
    double l1 = (a - o) / d, l2 = (c - o) / d;
    if (l1 > l2) std::swap(l1, l2);
    lo = std::max(lo, l1);
    hi = std::min(hi, l2);
  };
  slab(t0, dt, b.t_lo, b.t_hi);
  for (int a = 0; a < n; ++a) slab(x0[a], dx[a], b.x_lo[a], b.x_hi[a]);
  return {lo, hi};
}

/// Bounding box of the cone: hull of the vertex and the base boxes.
StBox cone_bounds(const ConeProblem& p) {
  StBox bb{p.t0, 0, p.x0, p.x0};
  for (const auto& b : p.base) {
    bb.t_hi = std::max(bb.t_hi, b.t_hi);
    for (int a = 0; a < p.n; ++a) {
      bb.x_lo[a] = std::min(bb.x_lo[a], b.x_lo[a]);
      bb.x_hi[a] = std::max(bb.x_hi[a], b.x_hi[a]);
    }
  }
  return bb;
}

}  // namespace

double StBox::volume(int n) const {
  double v = std::max(t_hi - t_lo, 0.0);
  for (int a = 0; a < n; ++a) v *= std::max(x_hi[a] - x_lo[a], 0.0);
  return v;
}

bool StBox::contains(double t, const Vec& x, int n) const {
  if (t < t_lo || t > t_hi) return false;
  for (int a = 0; a < n; ++a)
    if (x[a] < x_lo[a] || x[a] > x_hi[a]) return false;
  return true;
}

GridSet GridSet::empty(int n, int nt, int nx, double t_lo, double t_hi, double x_half) {
  if (n != 1 && n != 2) throw std::invalid_argument("GridSet: n must be 1 or 2");
  if (nt < 1 || nx < 1 || !(t_hi > t_lo) || !(x_half > 0))
    throw std::invalid_argument("GridSet: bad extent");
  GridSet s;
  s.n = n;
  s.t_lo = t_lo;
  s.t_hi = t_hi;
  s.x_half = x_half;
  s.nt = nt;
  s.nx = nx;
  s.mask.assign(static_cast<std::size_t>(nt) * (n == 1 ? nx : nx * nx), 0);
  return s;
}

bool GridSet::contains(double t, const Vec& x) const {
  const double ut = (t - t_lo) / dt();
  if (!(ut >= 0 && ut < nt)) return false;
  std::size_t idx = static_cast<std::size_t>(ut);
  for (int a = 0; a < n; ++a) {
    const double ux = (x[a] + x_half) / dx();
    if (!(ux >= 0 && ux < nx)) return false;
    idx = idx * nx + static_cast<std::size_t>(ux);
  }
  return mask[idx] != 0;
}

void GridSet::add_box(const StBox& b) {
  const std::size_t per_t = n == 1 ? nx : static_cast<std::size_t>(nx) * nx;
  for (int it = 0; it < nt; ++it) {
    const double t = t_lo + (it + 0.5) * dt();
    for (std::size_t q = 0; q < per_t; ++q) {
      Vec x{};
      if (n == 1) {
        x[0] = -x_half + (q + 0.5) * dx();
      } else {
        x[0] = -x_half + (q / nx + 0.5) * dx();
        x[1] = -x_half + (q % nx + 0.5) * dx();
      }
      if (b.contains(t, x, n)) mask[it * per_t + q] = 1;
    }
  }
}

void GridSet::add_slab(double a, double b) {
  StBox box{a, b, {-x_half, -x_half}, {x_half, x_half}};
  add_box(box);
}

void GridSet::fill() { std::fill(mask.begin(), mask.end(), 1); }

void ConeProblem::validate() const {
  if (n != 1 && n != 2) throw std::invalid_argument("cone problem: n must be 1 or 2");
  if (S.n != n) throw std::invalid_argument("cone problem: S has the wrong dimension");
  if (!(t0 >= -5 && t0 <= -4)) throw std::invalid_argument("cone problem: t0 must lie in [-5,-4]");
  if (norm(x0, n) > 2) throw std::invalid_argument("cone problem: |x0| must be at most 2");
  if (base.empty()) throw std::invalid_argument("cone problem: empty base");
  if (!(mu >= 0)) throw std::invalid_argument("cone problem: mu must be non-negative");
  for (const auto& b : base) {
    if (!(b.t_lo >= -2 && b.t_hi <= 0 && b.t_lo < b.t_hi))
      throw std::invalid_argument("cone problem: base box outside [-2,0] in time");
    for (int a = 0; a < n; ++a)
      if (!(b.x_lo[a] < b.x_hi[a])) throw std::invalid_argument("cone problem: degenerate box");
    // the farthest corner must lie in B_2
    Vec far{};
    for (int a = 0; a < n; ++a) far[a] = std::max(std::abs(b.x_lo[a]), std::abs(b.x_hi[a]));
    if (norm(far, n) > 2 + 1e-12)
      throw std::invalid_argument("cone problem: base box leaves B_2");
  }
}

double ConeProblem::base_measure() const {
  // union volume by coordinate compression
  std::vector<double> ct, cx[2];
  for (const auto& b : base) {
    ct.push_back(b.t_lo);
    ct.push_back(b.t_hi);
    for (int a = 0; a < n; ++a) {
      cx[a].push_back(b.x_lo[a]);
      cx[a].push_back(b.x_hi[a]);
    }
  }
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(ct);
  for (int a = 0; a < n; ++a) uniq(cx[a]);
  if (n == 1) cx[1] = {0.0, 1.0};
  double vol = 0;
  for (std::size_t i = 0; i + 1 < ct.size(); ++i)
    for (std::size_t j = 0; j + 1 < cx[0].size(); ++j)
      for (std::size_t k = 0; k + 1 < cx[1].size(); ++k) {
        const double t = 0.5 * (ct[i] + ct[i + 1]);
        const Vec x{0.5 * (cx[0][j] + cx[0][j + 1]), 0.5 * (cx[1][k] + cx[1][k + 1])};
        const bool in = std::any_of(base.begin(), base.end(),
                                    [&](const StBox& b) { return b.contains(t, x, n); });
        if (in) vol += (ct[i + 1] - ct[i]) * (cx[0][j + 1] - cx[0][j]) * (cx[1][k + 1] - cx[1][k]);
      }
  return vol;
}

bool ConeProblem::in_cone(double t, const Vec& x) const {
  const double dt = t - t0;
  if (dt <= 0) return false;
  Vec dx{};
  for (int a = 0; a < n; ++a) dx[a] = x[a] - x0[a];
  for (const auto& b : base) {
    const auto [lo, hi] = ray_box(t0, x0, dt, dx, b, n);
    if (hi >= std::max(lo, 1.0)) return true;
  }
  return false;
}

double segment_measure(double t0, const Vec& x0, double tb, const Vec& xb, const GridSet& S) {
  const int n = S.n;
  if (tb == t0) throw std::invalid_argument("segment_measure: degenerate segment (t1 = t0)");
  Vec vbar{};
  for (int a = 0; a < n; ++a) vbar[a] = (xb[a] - x0[a]) / (tb - t0);
  if (norm(vbar, n) > 2 + 1e-12)
    throw std::logic_error("segment_measure: |vbar| exceeds 2; vertex or base out of place");
  // cell crossings in the segment parameter
  std::vector<double> cuts{0.0, 1.0};
  auto crossings = [&](double a, double b, double lo, double step, int count) {
    if (a == b) return;
    const double amin = std::min(a, b), amax = std::max(a, b);
    const int k0 = std::max(0, static_cast<int>(std::ceil((amin - lo) / step)));
    const int k1 = std::min(count, static_cast<int>(std::floor((amax - lo) / step)));
    for (int k = k0; k <= k1; ++k) {
      const double lam = (lo + k * step - a) / (b - a);
      if (lam > 0 && lam < 1) cuts.push_back(lam);
    }
  };
  crossings(t0, tb, S.t_lo, S.dt(), S.nt);
  for (int a = 0; a < n; ++a) crossings(x0[a], xb[a], -S.x_half, S.dx(), S.nx);
  std::sort(cuts.begin(), cuts.end());
  double inside = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double m = 0.5 * (cuts[i] + cuts[i + 1]);
    Vec x{};
    for (int a = 0; a < n; ++a) x[a] = x0[a] + m * (xb[a] - x0[a]);
    if (S.contains(t0 + m * (tb - t0), x)) inside += cuts[i + 1] - cuts[i];
  }
  const double v2 = vbar[0] * vbar[0] + (n == 2 ? vbar[1] * vbar[1] : 0.0);
  return inside * std::abs(tb - t0) * std::sqrt(1 + v2);
}

HypothesisCheck check_hypothesis(const ConeProblem& p, std::size_t samples, std::uint64_t seed) {
  HypothesisCheck hc;
  hc.min_measure = std::numeric_limits<double>::infinity();
  auto rng = stream(seed, 0xC0FEu);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<double> weights;
  for (const auto& b : p.base) weights.push_back(b.volume(p.n));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  auto test = [&](double t, const Vec& x) {
    const double m = segment_measure(p.t0, p.x0, t, x, p.S);
    hc.min_measure = std::min(hc.min_measure, m);
    ++hc.checked;
    if (m < p.mu * (1 - 1e-12)) hc.holds = false;
  };
  for (const auto& b : p.base)
    for (int c = 0; c < (1 << (1 + p.n)); ++c) {
      Vec x{};
      for (int a = 0; a < p.n; ++a) x[a] = (c >> (1 + a)) & 1 ? b.x_hi[a] : b.x_lo[a];
      test(c & 1 ? b.t_hi : b.t_lo, x);
    }
  for (std::size_t i = 0; i < samples; ++i) {
    const StBox& b = p.base[pick(rng)];
    Vec x{};
    const double t = b.t_lo + U(rng) * (b.t_hi - b.t_lo);
    for (int a = 0; a < p.n; ++a) x[a] = b.x_lo[a] + U(rng) * (b.x_hi[a] - b.x_lo[a]);
    test(t, x);
  }
  return hc;
}

std::string to_string(ConeVerdict v) {
  switch (v) {
    case ConeVerdict::Pass: return "pass";
    case ConeVerdict::Fail: return "fail";
    case ConeVerdict::Vacuous: return "vacuous";
  }
  return "?";
}

double cross_section_area(const ConeProblem& p, double t, int resolution) {
  const StBox bb = cone_bounds(p);
  const int m = resolution > 0 ? resolution : (p.n == 1 ? 20000 : 400);
  double h[2] = {0, 0};
  for (int a = 0; a < p.n; ++a) h[a] = (bb.x_hi[a] - bb.x_lo[a]) / m;
  std::size_t count = 0;
  if (p.n == 1) {
    for (int i = 0; i < m; ++i)
      if (p.in_cone(t, Vec{bb.x_lo[0] + (i + 0.5) * h[0], 0})) ++count;
    return count * h[0];
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (p.in_cone(t, Vec{bb.x_lo[0] + (i + 0.5) * h[0], bb.x_lo[1] + (j + 0.5) * h[1]}))
        ++count;
  return count * h[0] * h[1];
}

AffineFit fit_cross_section(const ConeProblem& p, int points) {
  std::vector<double> ts, as;
  for (int i = 1; i <= points; ++i) {
    const double t = p.t0 + (-2 - p.t0) * i / (points + 1.0);
    ts.push_back(t);
    as.push_back(cross_section_area(p, t));
  }
  const double N = ts.size();
  double mt = 0, ma = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / N;
    ma += as[i] / N;
  }
  double stt = 0, sta = 0, saa = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    sta += (ts[i] - mt) * (as[i] - ma);
    saa += (as[i] - ma) * (as[i] - ma);
  }
  AffineFit f;
  f.slope = sta / stt;
  f.intercept = ma - f.slope * mt;
  f.r2 = saa > 0 ? sta * sta / (stt * saa) : 1.0;
  return f;
}

ConeResult cone_measure_check(const ConeProblem& p, std::size_t samples, std::uint64_t seed,
                              int workers) {
  p.validate();
  if (samples < 100000) throw std::invalid_argument("cone_measure_check: sample budget below 1e5");
  ConeResult r;
  r.base_measure = p.base_measure();
  r.bound = r.base_measure * p.mu * p.mu / 80.0;
  r.hypothesis = check_hypothesis(p, 2000, seed);
  r.A_minus2 = cross_section_area(p, -2.0);
  r.A_bound_holds = r.A_minus2 >= r.base_measure / 4.0;

  const StBox bb = cone_bounds(p);
  const double vol = bb.volume(p.n);
  std::vector<std::size_t> hits(kShards, 0);
  std::atomic<int> next{0};
  const int w = workers > 0 ? workers : std::max(1u, std::thread::hardware_concurrency());
  auto work = [&] {
    for (int shard; (shard = next++) < kShards;) {
      auto rng = stream(seed, static_cast<std::uint64_t>(shard) + 1);
      std::uniform_real_distribution<double> U(0, 1);
      const std::size_t m = samples / kShards + (static_cast<std::size_t>(shard) < samples % kShards);
      std::size_t h = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const double t = bb.t_lo + U(rng) * (bb.t_hi - bb.t_lo);
        Vec x{};
        for (int a = 0; a < p.n; ++a) x[a] = bb.x_lo[a] + U(rng) * (bb.x_hi[a] - bb.x_lo[a]);
        if (p.S.contains(t, x) && p.in_cone(t, x)) ++h;
      }
      hits[shard] = h;
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < std::min(w, kShards); ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  std::size_t total = 0;
  for (auto h : hits) total += h;
  const double frac = static_cast<double>(total) / samples;
  r.measure = vol * frac;
  r.standard_error = vol * std::sqrt(frac * (1 - frac) / samples);
  r.slack = r.bound > 0 ? r.measure / r.bound : std::numeric_limits<double>::infinity();
  if (!r.hypothesis.holds)
    r.verdict = ConeVerdict::Vacuous;
  else
    r.verdict = r.measure >= r.bound - 3 * r.standard_error ? ConeVerdict::Pass : ConeVerdict::Fail;
  return r;
}

namespace {

StBox random_base_box(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0, 1);
  StBox b;
  const double len = 0.2 + 1.6 * U(rng);
  b.t_lo = -2 + (2 - len) * U(rng);
  b.t_hi = b.t_lo + len;
  Vec c{}, half{};
  do {
    for (int a = 0; a < n; ++a) {
      c[a] = -1.5 + 3 * U(rng);
      half[a] = 0.1 + 0.7 * U(rng);
    }
    Vec far{};
    for (int a = 0; a < n; ++a) far[a] = std::abs(c[a]) + half[a];
    if (norm(far, n) <= 2) break;
  } while (true);
  for (int a = 0; a < n; ++a) {
    b.x_lo[a] = c[a] - half[a];
    b.x_hi[a] = c[a] + half[a];
  }
  return b;
}

GridSet default_grid(int n) { return n == 1 ? GridSet::empty(1, 700, 600) : GridSet::empty(2, 350, 120); }

}  // namespace

ConeProblem random_cone_problem(int n, std::uint64_t seed) {
  auto rng = stream(seed, 0xA2u);
  std::uniform_real_distribution<double> U(0, 1);
  ConeProblem p;
  p.n = n;
  p.t0 = -5 + U(rng);
  do {
    for (int a = 0; a < n; ++a) p.x0[a] = -2 + 4 * U(rng);
  } while (norm(p.x0, n) > 2);
  const int boxes = 1 + static_cast<int>(3 * U(rng));
  for (int i = 0; i < boxes; ++i) p.base.push_back(random_base_box(n, rng));
  p.S = default_grid(n);
  const int slabs = 1 + static_cast<int>(3 * U(rng));
  for (int i = 0; i < slabs; ++i) {
    const double a = p.t0 + (-p.t0) * U(rng);
    p.S.add_slab(a, std::min(0.0, a + 0.05 + 0.45 * U(rng)));
  }
  const int blobs = static_cast<int>(3 * U(rng));
  for (int i = 0; i < blobs; ++i) {
    StBox b;
    b.t_lo = -5 + 5 * U(rng);
    b.t_hi = b.t_lo + 0.2 + U(rng);
    for (int a = 0; a < n; ++a) {
      b.x_lo[a] = -3 + 4 * U(rng);
      b.x_hi[a] = b.x_lo[a] + 0.3 + 1.5 * U(rng);
    }
    p.S.add_box(b);
  }
  const HypothesisCheck hc = check_hypothesis(p, 4000, seed ^ 0x5EEDu);
  p.mu = 0.95 * hc.min_measure;
  return p;
}

ConeProblem slab_cone_problem(int n, double mu, std::uint64_t seed) {
  auto rng = stream(seed, 0x51ABu);
  std::uniform_real_distribution<double> U(0, 1);
  ConeProblem p;
  p.n = n;
  p.t0 = -5 + U(rng);
  for (int a = 0; a < n; ++a) p.x0[a] = -1 + 2 * U(rng);
  p.base.push_back(random_base_box(n, rng));
  p.S = default_grid(n);
  p.S.add_slab(-3.5, -3.5 + mu);
  p.mu = mu;
  return p;
}

nlohmann::json to_json(const ConeProblem& p) {
  nlohmann::json j;
  j["n"] = p.n;
  j["vertex"] = {{"t", p.t0}, {"x", std::vector<double>(p.x0.begin(), p.x0.begin() + p.n)}};
  auto boxes = nlohmann::json::array();
  for (const auto& b : p.base)
    boxes.push_back({{"t", {b.t_lo, b.t_hi}},
                     {"x_lo", std::vector<double>(b.x_lo.begin(), b.x_lo.begin() + p.n)},
                     {"x_hi", std::vector<double>(b.x_hi.begin(), b.x_hi.begin() + p.n)}});
  j["base"] = boxes;
  std::size_t marked = std::count(p.S.mask.begin(), p.S.mask.end(), 1);
  j["S"] = {{"t_range", {p.S.t_lo, p.S.t_hi}}, {"x_half", p.S.x_half}, {"nt", p.S.nt},
            {"nx", p.S.nx}, {"marked_cells", marked}};
  j["mu"] = p.mu;
  return j;
}

nlohmann::json to_json(const ConeResult& r) {
  return {{"measure", r.measure},
          {"standard_error", r.standard_error},
          {"bound", r.bound},
          {"slack", std::isfinite(r.slack) ? nlohmann::json(r.slack) : nlohmann::json(nullptr)},
          {"base_measure", r.base_measure},
          {"hypothesis_holds", r.hypothesis.holds},
          {"hypothesis_checked", r.hypothesis.checked},
          {"min_segment_measure", r.hypothesis.min_measure},
          {"A_minus2", r.A_minus2},
          {"A_bound_holds", r.A_bound_holds},
          {"verdict", to_string(r.verdict)}};
}

}  // namespace kfp
