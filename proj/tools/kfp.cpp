// Command-line entry point: run, verify, exponents, cone, sweep.
#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <thread>

#include "kfp/config.hpp"
#include "kfp/conegeom.hpp"
#include "kfp/diagnostics.hpp"
#include "kfp/report.hpp"
#include "kfp/solver.hpp"
#include "kfp/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kfp;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kChecksFailed = 1;
constexpr int kVacuousOnly = 2;
constexpr int kUsageError = 64;

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  int workers = 0;
};

fs::path output_dir(const Common& c, const std::string& sub) {
  fs::path root = c.out;
  if (root.empty()) {
    const char* env = std::getenv("KFP_OUTPUT_ROOT");
    root = fs::path(env && *env ? env : "kfp-out") / sub;
  }
  fs::create_directories(root);
  return root;
}

/// Writes manifest.json embedding the resolved config and both hashes.
void write_manifest(const fs::path& dir, const std::string& kind, const json& resolved,
                    std::uint64_t seed, std::vector<std::string> files, json extra = json::object()) {
  json m = extra;
  m["schema"] = kRunSchema;
  m["kind"] = kind;
  m["seed"] = seed;
  m["resolved_config"] = resolved;
  m["config_hash"] = config_hash(resolved);
  m["content_hash"] = content_hash(files);
  json names = json::array();
  for (const auto& f : files) names.push_back(fs::path(f).filename().string());
  m["files"] = names;
  write_json((dir / "manifest.json").string(), m);
}

json run_one(const json& cfg, std::uint64_t seed, const fs::path& dir) {
  const auto rr = resolve_run_config(cfg, seed);
  const auto traj = run(rr.config);
  fs::create_directories(dir);
  const std::string stem = (dir / "field").string();
  write_field(traj.field, stem);
  write_step_log(traj.log, (dir / "steps.csv").string());
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  const auto& last = traj.log.back();
  json summary{{"final_time", last.time}, {"final_mass", last.mass}, {"final_l2", last.l2},
               {"max_tail_error", 0.0}, {"steps", last.step}};
  for (const auto& s : traj.log)
    summary["max_tail_error"] = std::max(summary["max_tail_error"].get<double>(), s.tail_error);
  write_manifest(dir, "run", rr.resolved, seed, files, {{"summary", summary}});
  return summary;
}

int cmd_run(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config", "run needs a config file");
  const fs::path dir = output_dir(c, "run");
  const auto summary = run_one(load_json(c.config), c.seed, dir);
  std::cout << "run complete: " << dir.string() << "\n" << summary.dump(2) << "\n";
  return kOk;
}

int cmd_verify(const Common& c, const std::string& lemma, const std::string& criterion) {
  VerifyOptions opt;
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.criterion = criterion;
  if (!c.config.empty()) opt.params = load_json(c.config);
  const auto rep = verify_lemma(lemma, opt);
  const fs::path dir = output_dir(c, "verify-" + lemma);
  const std::string jpath = (dir / "report.json").string(), cpath = (dir / "report.csv").string();
  write_json(jpath, to_json(rep));
  std::vector<std::string> files{jpath};
  if (!rep.csv_header.empty()) {
    write_csv(cpath, rep.csv_header, rep.csv_rows);
    files.push_back(cpath);
  }
  json resolved{{"lemma", lemma}, {"params", opt.params}, {"criterion", criterion},
                {"workers", c.workers}};
  write_manifest(dir, "verify-lemma", resolved, c.seed, files);
  std::cout << "lemma " << lemma << ": " << rep.title << "\n";
  for (const auto& ch : rep.checks)
    std::cout << "  [" << to_string(ch.verdict) << "] " << ch.name << ": " << fmt(ch.value)
              << " (threshold " << fmt(ch.threshold) << ")"
              << (ch.detail.empty() ? "" : "; " + ch.detail) << "\n";
  std::cout << "report: " << jpath << "\n";
  if (rep.checks.empty() || rep.vacuous_only()) return kVacuousOnly;
  return rep.passed() ? kOk : kChecksFailed;
}

int cmd_exponents(int n, double s, double r) {
  const auto t = exponents(n, s, r);
  const double g = recursion_gamma(t, r);
  auto line = [](const char* k, double v) { std::cout << "  " << k << " = " << fmt(v) << "\n"; };
  std::cout << "exponents for n=" << n << " s=" << fmt(s) << " r=" << fmt(r) << "\n";
  line("r0", t.r0);
  line("n+1+n/s", n + 1 + n / s);
  line("p1", t.p1);
  line("p2", t.p2);
  line("theta*", t.theta_star);
  line("theta residual", t.theta_residual);
  line("q", t.q);
  line("beta", t.beta);
  line("alpha (second lemma)", t.alpha_dg2);
  line("gamma(r)", g);
  line("r_crit (gamma = 1)", t.r_crit);
  if (std::abs(g - 1) < 1e-9)
    std::cout << "  boundary: gamma = 1 at this r\n";
  else
    std::cout << "  gamma " << (g > 1 ? "> 1 (superlinear recursion)" : "<= 1 (recursion not superlinear)")
              << "\n";
  if (std::abs(r - t.r0) < 1e-12 && std::abs(g - 1) >= 1e-9)
    std::cout << "  note: r equals r0 but gamma(r0) != 1; the crossing is at r_crit\n";
  return kOk;
}

int cmd_cone(const Common& c) {
  json cfg = c.config.empty() ? json::object() : load_json(c.config);
  static const std::set<std::string> known{"generator", "n", "mu", "instance_seed", "samples"};
  for (auto it = cfg.begin(); it != cfg.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(it.key(), "unknown field");
  const std::string gen = cfg.value("generator", "slab");
  const int n = cfg.value("n", 1);
  const double mu = cfg.value("mu", 0.4);
  const std::uint64_t inst = cfg.value("instance_seed", std::uint64_t{20240601});
  const std::size_t samples = cfg.value("samples", std::size_t{200000});
  if (gen != "slab" && gen != "random") throw ConfigError("generator", "must be slab or random");
  const ConeProblem p = gen == "slab" ? slab_cone_problem(n, mu, inst) : random_cone_problem(n, inst);
  const auto r = cone_measure_check(p, samples, c.seed, c.workers);
  const fs::path dir = output_dir(c, "cone");
  const std::string path = (dir / "cone.json").string();
  write_json(path, {{"problem", to_json(p)}, {"result", to_json(r)}});
  const json resolved{{"generator", gen}, {"n", n}, {"mu", mu}, {"instance_seed", inst},
                      {"samples", samples}};
  write_manifest(dir, "cone", resolved, c.seed, {path});
  std::cout << "cone verdict: " << to_string(r.verdict) << "; measure " << fmt(r.measure)
            << " +- " << fmt(r.standard_error) << ", bound " << fmt(r.bound) << ", slack "
            << fmt(r.slack) << "\n";
  if (r.verdict == ConeVerdict::Vacuous) return kVacuousOnly;
  return r.verdict == ConeVerdict::Pass ? kOk : kChecksFailed;
}

/// Sets a dotted path such as "kernel.s" inside a JSON object.
void set_path(json& j, const std::string& path, const json& value) {
  json* cur = &j;
  std::size_t start = 0;
  for (std::size_t dot; (dot = path.find('.', start)) != std::string::npos; start = dot + 1)
    cur = &(*cur)[path.substr(start, dot - start)];
  (*cur)[path.substr(start)] = value;
}

/// {"base": run config, "vary": {"kernel.s": [...], ...}}: one job per combination.
int cmd_sweep(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config", "sweep needs a config file");
  const json cfg = load_json(c.config);
  if (!cfg.contains("base")) throw ConfigError("base", "missing sweep base config");
  std::vector<json> jobs{cfg["base"]};
  for (auto& [key, values] : cfg.value("vary", json::object()).items()) {
    if (!values.is_array() || values.empty()) throw ConfigError("vary." + key, "must be a non-empty array");
    std::vector<json> next;
    for (const auto& j : jobs)
      for (const auto& v : values) {
        json k = j;
        set_path(k, key, v);
        next.push_back(k);
      }
    jobs = std::move(next);
  }
  for (const auto& j : jobs) resolve_run_config(j, c.seed);  // fail fast on schema errors
  const fs::path dir = output_dir(c, "sweep");
  std::vector<json> summaries(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  const int w = c.workers > 0 ? c.workers : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(w, static_cast<int>(jobs.size())); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < jobs.size();) {
        try {
          summaries[i] = run_one(jobs[i], c.seed + i, dir / ("job-" + std::to_string(i)));
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  for (auto& t : pool) t.join();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    rows.push_back({std::to_string(i), config_hash(jobs[i]),
                    errors[i].empty() ? "ok" : "error",
                    errors[i].empty() ? fmt(summaries[i]["final_mass"].get<double>()) : "",
                    errors[i].empty() ? fmt(summaries[i]["final_l2"].get<double>()) : "",
                    errors[i]});
  const std::string csv = (dir / "sweep.csv").string();
  write_csv(csv, {"job", "config_hash", "status", "final_mass", "final_l2", "error"}, rows);
  write_manifest(dir, "sweep", cfg, c.seed, {csv});
  std::size_t failed = std::count_if(errors.begin(), errors.end(), [](auto& e) { return !e.empty(); });
  std::cout << "sweep: " << jobs.size() << " jobs, " << failed << " failed; " << csv << "\n";
  return failed ? kChecksFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic fractional diffusion toolkit"};
  app.require_subcommand(1);
  Common c;
  auto common = [&c](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON config path");
    sub->add_option("--out", c.out, "output directory (default: $KFP_OUTPUT_ROOT/<command>)");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--workers", c.workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };
  auto* run_cmd = app.add_subcommand("run", "integrate a run config");
  common(run_cmd);
  std::string lemma, criterion;
  auto* ver = app.add_subcommand("verify", "numerical checks for one lemma");
  common(ver);
  ver->add_option("--lemma", lemma, "lemma id")->required();
  ver->add_option("--criterion", criterion, "restrict to checks tagged with this acceptance criterion");
  int n = 1;
  double s = 0.25, r = 60;
  auto* ex = app.add_subcommand("exponents", "print the exponent table");
  ex->add_option("n", n)->required();
  ex->add_option("s", s)->required();
  ex->add_option("r", r)->required();
  auto* cone = app.add_subcommand("cone", "cone measure check on one instance");
  common(cone);
  auto* sweep = app.add_subcommand("sweep", "parallel parameter sweep of run configs");
  common(sweep);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }
  try {
    if (*run_cmd) return cmd_run(c);
    if (*ver) return cmd_verify(c, lemma, criterion);
    if (*ex) return cmd_exponents(n, s, r);
    if (*cone) return cmd_cone(c);
    if (*sweep) return cmd_sweep(c);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kChecksFailed;
  }
  return kUsageError;
}
