#include "kfp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace kfp {

using nlohmann::json;

ConfigError::ConfigError(const std::string& field, const std::string& what, int line)
    : std::runtime_error(line > 0 ? "config error at line " + std::to_string(line) + " (" +
                                        field + "): " + what
                                  : "config error (" + field + "): " + what),
      field_(field),
      line_(line) {}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("<document>", e.what(), line);
  }
}

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<document>", "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_json(ss.str());
}

namespace {

constexpr double kPi = std::numbers::pi;

double bump(double u) { return std::abs(u) < 1 ? std::exp(1 - 1 / (1 - u * u)) : 0.0; }

/// Reads obj[key] into the default-filled resolved block, checking its type.
class Block {
 public:
  Block(const json& parent, const std::string& name, bool required)
      : name_(name), out_(json::object()) {
    if (!parent.contains(name)) {
      if (required) throw ConfigError(name, "missing required block \"" + name + "\"");
      in_ = json::object();
      return;
    }
    in_ = parent.at(name);
    if (!in_.is_object()) throw ConfigError(name, "must be an object");
  }

  double number(const std::string& key, double def) {
    double v = def;
    if (in_.contains(key)) {
      if (!in_[key].is_number()) throw ConfigError(path(key), "must be a number");
      v = in_[key].get<double>();
    }
    out_[key] = v;
    return v;
  }
  double required_number(const std::string& key) {
    if (!in_.contains(key)) throw ConfigError(path(key), "missing required field");
    return number(key, 0);
  }
  int integer(const std::string& key, int def) {
    int v = def;
    if (in_.contains(key)) {
      if (!in_[key].is_number_integer()) throw ConfigError(path(key), "must be an integer");
      v = in_[key].get<int>();
    }
    out_[key] = v;
    return v;
  }
  int required_integer(const std::string& key) {
    if (!in_.contains(key)) throw ConfigError(path(key), "missing required field");
    return integer(key, 0);
  }
  std::string string(const std::string& key, const std::string& def) {
    std::string v = def;
    if (in_.contains(key)) {
      if (!in_[key].is_string()) throw ConfigError(path(key), "must be a string");
      v = in_[key].get<std::string>();
    }
    out_[key] = v;
    return v;
  }
  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (in_.contains(key)) {
      if (!in_[key].is_boolean()) throw ConfigError(path(key), "must be a boolean");
      v = in_[key].get<bool>();
    }
    out_[key] = v;
    return v;
  }
  std::string path(const std::string& key) const { return name_ + "." + key; }
  void reject_unknown(std::initializer_list<const char*> known) const {
    for (auto it = in_.begin(); it != in_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(path(it.key()), "unknown field");
    }
  }
  const json& out() const { return out_; }

 private:
  std::string name_;
  json in_;
  json out_;
};

template <class F>
auto guarded(const std::string& field, F f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

ResolvedRun resolve_run_config(const json& j, std::uint64_t seed) {
  if (!j.is_object()) throw ConfigError("<document>", "top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* known[] = {"schema", "grid", "kernel", "source", "initial", "stepper"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return it.key() == k; }) == std::end(known))
      throw ConfigError(it.key(), "unknown block");
  }
  if (j.contains("schema") && j["schema"] != kRunSchema)
    throw ConfigError("schema", std::string("unsupported schema, expected ") + kRunSchema);
  ResolvedRun rr;
  json& res = rr.resolved;
  res["schema"] = kRunSchema;
  res["seed"] = seed;
  RunConfig& cfg = rr.config;

  Block kb(j, "kernel", true);
  Block gb(j, "grid", true);
  kb.reject_unknown({"family", "s", "kappa", "c", "radius", "modulation"});
  const double s = kb.required_number("s");
  const int n = gb.integer("n", 1);
  gb.reject_unknown({"n", "x_period", "v_halfwidth", "nx", "nv", "t0", "t1", "nt"});
  cfg.grid = guarded("grid", [&] {
    return make_grid(n, gb.number("x_period", 8.0), gb.number("v_halfwidth", 8.0),
                     gb.required_integer("nx"), gb.required_integer("nv"), gb.number("t0", 0.0),
                     gb.required_number("t1"), gb.integer("nt", 11), s);
  });
  res["grid"] = gb.out();

  const std::string family = kb.string("family", "homogeneous");
  const double kappa = kb.number("kappa", 2.0), c = kb.number("c", 1.0);
  cfg.kernel = guarded("kernel", [&] {
    if (family == "homogeneous") {
      if (kb.string("modulation", "none") != "none")
        throw ConfigError("kernel.modulation", "only the modulated family takes a modulation");
      return Kernel::homogeneous(n, s, kappa, c);
    }
    if (family == "truncated") return Kernel::truncated(n, s, kappa, c, kb.number("radius", 6.0));
    if (family == "modulated")
      return Kernel::modulated(
          n, s, kappa, c, Kernel::preset(kb.string("modulation", "mixed"), n, kappa, c, seed));
    throw ConfigError("kernel.family",
                      "unknown family '" + family + "' (expected homogeneous, truncated, modulated)");
  });
  res["kernel"] = kb.out();

  Block sb(j, "stepper", false);
  sb.reject_unknown({"name", "record_every", "c_stab", "collisions", "imex_c_low"});
  cfg.stepper = guarded("stepper.name", [&] { return parse_stepper(sb.string(
      "name", cfg.kernel.translation_invariant() ? "spectral-exponential" : "imex")); });
  cfg.record_every = sb.integer("record_every", 1);
  if (cfg.record_every < 1) throw ConfigError("stepper.record_every", "must be at least 1");
  cfg.c_stab = sb.number("c_stab", std::min(0.25, 0.8 * explicit_stability_limit(n, s)));
  cfg.collisions = sb.boolean("collisions", true);
  if (j.contains("stepper") && j["stepper"].contains("imex_c_low"))
    cfg.imex_c_low = sb.number("imex_c_low", 0);
  res["stepper"] = sb.out();

  const PhaseGrid& g = cfg.grid;
  Block ib(j, "initial", false);
  const std::string ikind = ib.string("kind", "bump");
  Manufactured man;
  man.n = n;
  man.s = s;
  man.c = c;
  bool need_manufactured = false;
  if (ikind == "bump") {
    ib.reject_unknown({"kind", "amplitude", "v_radius", "modulation"});
    cfg.initial = bump_initial(g, ib.number("amplitude", 1.0), ib.number("v_radius", 2.5),
                               ib.number("modulation", 0.5));
  } else if (ikind == "rough") {
    ib.reject_unknown({"kind", "amplitude", "x_modes", "max_xi", "decay", "v_radius"});
    cfg.initial = rough_initial(g, seed, ib.integer("x_modes", 12), ib.number("max_xi", 12.0),
                                ib.number("decay", 0.5), ib.number("amplitude", 1.0),
                                ib.number("v_radius", 4.0));
  } else if (ikind == "two-level") {
    ib.reject_unknown({"kind", "hi", "lo", "x_split", "v_split", "blend", "v_radius"});
    cfg.initial = two_level_initial(g, ib.number("hi", 0.95), ib.number("lo", -0.5),
                                    ib.number("x_split", 0.0), ib.number("v_split", 2.5),
                                    ib.number("blend", 0.5), ib.number("v_radius", 5.0));
  } else if (ikind == "manufactured") {
    ib.reject_unknown({"kind", "A", "k", "w"});
    man.A = ib.number("A", 0.5);
    man.k = ib.number("k", 2 * kPi / g.x_period);
    man.w = ib.number("w", 1.0);
    need_manufactured = true;
    cfg.initial = man.initial(g);
  } else {
    throw ConfigError("initial.kind",
                      "unknown kind '" + ikind + "' (expected bump, rough, two-level, manufactured)");
  }
  res["initial"] = ib.out();

  Block srb(j, "source", false);
  const std::string skind = srb.string("kind", need_manufactured ? "manufactured" : "zero");
  if (skind == "zero") {
    srb.reject_unknown({"kind"});
  } else if (skind == "gaussian") {
    srb.reject_unknown({"kind", "amplitude", "r", "width"});
    const double amp = srb.number("amplitude", 0.1), width = srb.number("width", 1.0);
    cfg.source.kind = "gaussian";
    cfg.source.r = srb.number("r", 60.0);
    cfg.source.fn = [amp, width](double, const Vec& x, const Vec& v) {
      return amp * std::exp(-(v[0] * v[0] + v[1] * v[1]) / (width * width)) *
             (1 + 0.5 * std::cos(x[0]));
    };
  } else if (skind == "manufactured") {
    srb.reject_unknown({"kind"});
    if (!need_manufactured)
      throw ConfigError("source.kind", "manufactured source requires manufactured initial data");
    if (family != "homogeneous")
      throw ConfigError("source.kind", "manufactured source requires the homogeneous kernel");
    cfg.source = man.source();
  } else {
    throw ConfigError("source.kind",
                      "unknown kind '" + skind + "' (expected zero, gaussian, manufactured)");
  }
  if (need_manufactured && skind != "manufactured")
    throw ConfigError("source.kind", "manufactured initial data needs the manufactured source");
  res["source"] = srb.out();
  return rr;
}

std::vector<double> rough_initial(const PhaseGrid& g, std::uint64_t seed, int x_modes,
                                  double max_xi, double decay, double amplitude,
                                  double v_radius) {
  if (x_modes < 0 || !(max_xi > 0) || !(v_radius > 0) || v_radius > g.v_halfwidth - 1)
    throw std::invalid_argument("rough_initial: bad mode counts or window");
  struct Mode {
    double kx[2], xi[2], a, phase;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<Mode> modes;
  const int v_modes = 16;
  for (int k = 0; k <= x_modes; ++k)
    for (int l = 0; l < v_modes; ++l) {
      Mode m{};
      for (int a = 0; a < g.n; ++a) {
        m.kx[a] = 2 * kPi * (a == 0 ? k : std::floor(U(rng) * (x_modes + 1))) / g.x_period;
        m.xi[a] = max_xi * (2 * U(rng) - 1);
      }
      const double k2 = m.kx[0] * m.kx[0] + m.kx[1] * m.kx[1] + m.xi[0] * m.xi[0] + m.xi[1] * m.xi[1];
      m.a = N(rng) * std::pow(1 + k2, -0.5 * decay);
      m.phase = 2 * kPi * U(rng);
      modes.push_back(m);
    }
  std::vector<double> out(g.slice_size());
  double sup = 0;
  for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
    const Vec x = g.x_point(ix);
    for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
      const Vec v = g.v_point(iv);
      const double w = bump(norm(v, g.n) / v_radius);
      double acc = 0;
      if (w > 0)
        for (const auto& m : modes)
          acc += m.a * std::cos(m.kx[0] * x[0] + m.kx[1] * x[1] + m.xi[0] * v[0] + m.xi[1] * v[1] +
                                m.phase);
      out[ix * g.v_count() + iv] = w * acc;
      sup = std::max(sup, std::abs(w * acc));
    }
  }
  if (sup > 0)
    for (double& f : out) f *= amplitude / sup;
  return out;
}

std::vector<double> two_level_initial(const PhaseGrid& g, double hi, double lo, double x_split,
                                      double v_split, double blend, double v_radius) {
  auto step = [blend](double u) { return 0.5 * (1 + std::tanh(u / blend)); };
  std::vector<double> out(g.slice_size());
  for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
    const Vec x = g.x_point(ix);
    // periodic in x: hi on a band of half the torus to the left of x_split
    const double d = std::remainder(x[0] - x_split + 0.25 * g.x_period, g.x_period);
    const double sx = step(0.25 * g.x_period - std::abs(d));
    for (std::size_t iv = 0; iv < g.v_count(); ++iv) {
      const double r = norm(g.v_point(iv), g.n);
      const double w = r < v_radius ? bump(r / v_radius) / bump(0.0) : 0.0;
      const double sv = step(v_split - r);
      out[ix * g.v_count() + iv] = w * (lo + (hi - lo) * sx * sv);
    }
  }
  return out;
}

std::vector<double> bump_initial(const PhaseGrid& g, double amplitude, double v_radius,
                                 double modulation) {
  std::vector<double> out(g.slice_size());
  for (std::size_t ix = 0; ix < g.x_count(); ++ix) {
    const Vec x = g.x_point(ix);
    for (std::size_t iv = 0; iv < g.v_count(); ++iv)
      out[ix * g.v_count() + iv] = amplitude * bump(norm(g.v_point(iv), g.n) / v_radius) *
                                   (1 + modulation * std::cos(2 * kPi * x[0] / g.x_period));
  }
  return out;
}

}  // namespace kfp
