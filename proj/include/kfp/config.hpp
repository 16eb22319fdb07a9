#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/solver.hpp"

namespace kfp {

inline constexpr const char* kRunSchema = "kfp-run/1";

/// Schema or parse error; `field` is a dotted path such as "kernel.s", `line` is 1-based
/// (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what, int line = 0);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

/// Parses a JSON file; syntax errors become ConfigError carrying the line number.
nlohmann::json load_json(const std::string& path);
nlohmann::json parse_json(const std::string& text);

struct ResolvedRun {
  RunConfig config;
  nlohmann::json resolved;  // every default filled in
};

/// Validates a run config and fills defaults. Required blocks: "grid" and "kernel".
ResolvedRun resolve_run_config(const nlohmann::json& j, std::uint64_t seed);

/// Continuous random field independent of the grid: random Fourier modes in x and v with
/// amplitude (1 + |k|^2 + |xi|^2)^{-decay/2}, windowed in v and scaled to `amplitude` in sup.
std::vector<double> rough_initial(const PhaseGrid& g, std::uint64_t seed, int x_modes,
                                  double max_xi, double decay, double amplitude,
                                  double v_radius);

/// Level hi on the part of the window where x_1 < x_split and |v| < v_split, level lo
/// elsewhere inside the window, with smooth transitions of width `blend`.
std::vector<double> two_level_initial(const PhaseGrid& g, double hi, double lo, double x_split,
                                      double v_split, double blend, double v_radius);

/// amplitude * bump(|v| / v_radius) * (1 + modulation cos(2 pi x_1 / period)).
std::vector<double> bump_initial(const PhaseGrid& g, double amplitude, double v_radius,
                                 double modulation);

}  // namespace kfp
