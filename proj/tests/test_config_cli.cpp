#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kfp/config.hpp"
#include "kfp/report.hpp"

using namespace kfp;
namespace fs = std::filesystem;

namespace {

const char* kSmallRun = R"({
  "grid": {"nx": 8, "nv": 32, "t1": 0.2, "nt": 3},
  "kernel": {"s": 0.3}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kfp-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KFP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("config_cli") {
  TEST_CASE("missing kernel block is reported by name") {
    try {
      resolve_run_config(parse_json(R"({"grid": {"nx": 8, "nv": 32, "t1": 1}})"), 1);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "kernel");
    }
  }

  TEST_CASE("syntax errors carry the line number") {
    try {
      parse_json("{\n  \"grid\": {\n    \"nx\": 8,,\n  }\n}");
      FAIL("expected a parse error");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("wrong types, unknown fields and bad families name the field") {
    auto field_of = [](const char* text) {
      try {
        resolve_run_config(parse_json(text), 1);
      } catch (const ConfigError& e) {
        return e.field();
      }
      return std::string("<none>");
    };
    CHECK(field_of(R"({"grid": {"nx": 8, "nv": 32, "t1": 1}, "kernel": {"s": "x"}})") == "kernel.s");
    CHECK(field_of(R"({"grid": {"nx": 8, "nv": 32, "t1": 1, "bogus": 1}, "kernel": {"s": 0.3}})") == "grid.bogus");
    CHECK(field_of(R"({"grid": {"nx": 8, "nv": 32, "t1": 1}, "kernel": {"s": 0.3, "family": "odd"}})") == "kernel.family");
    CHECK(field_of(R"({"grid": {"nx": 8, "nv": 32, "t1": 1}, "kernel": {"s": 0.3}, "extra": {}})") == "extra");
  }

  TEST_CASE("resolved config fills defaults and hashes deterministically") {
    const auto a = resolve_run_config(parse_json(kSmallRun), 7);
    const auto b = resolve_run_config(parse_json(kSmallRun), 7);
    CHECK(a.resolved["stepper"]["name"] == "spectral-exponential");
    CHECK(a.resolved["kernel"]["kappa"] == 2.0);
    CHECK(config_hash(a.resolved) == config_hash(b.resolved));
    CHECK(config_hash(a.resolved) != config_hash(resolve_run_config(parse_json(kSmallRun), 8).resolved));
  }

  TEST_CASE("cli run: same seed gives the same content hash") {
    const auto dir = scratch("run");
    std::ofstream(dir / "cfg.json") << kSmallRun;
    const std::string cfg = (dir / "cfg.json").string();
    REQUIRE(cli("run --config " + cfg + " --seed 3 --out " + (dir / "a").string(), dir / "a.log") == 0);
    REQUIRE(cli("run --config " + cfg + " --seed 3 --out " + (dir / "b").string(), dir / "b.log") == 0);
    const auto ma = load_json((dir / "a" / "manifest.json").string());
    const auto mb = load_json((dir / "b" / "manifest.json").string());
    CHECK(ma["content_hash"] == mb["content_hash"]);
    CHECK(ma["config_hash"] == mb["config_hash"]);
    CHECK(fs::exists(dir / "a" / "field.bin"));
    CHECK(fs::exists(dir / "a" / "steps.csv"));
  }

  TEST_CASE("cli: usage errors exit 64 and list valid lemma ids") {
    const auto dir = scratch("usage");
    CHECK(cli("verify --lemma 9.9 --out " + (dir / "v").string(), dir / "v.log") == 64);
    CHECK(slurp(dir / "v.log").find("valid ids: 2.1") != std::string::npos);
    std::ofstream(dir / "bad.json") << R"({"grid": {"nx": 8, "nv": 32, "t1": 1}})";
    CHECK(cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "r").string(), dir / "r.log") == 64);
    CHECK(slurp(dir / "r.log").find("kernel") != std::string::npos);
    CHECK(cli("no-such-command", dir / "n.log") == 64);
  }

  TEST_CASE("cli: exponents prints the table and the crossing note") {
    const auto dir = scratch("exp");
    REQUIRE(cli("exponents 1 0.25 30", dir / "e.log") == 0);
    const auto out = slurp(dir / "e.log");
    CHECK(out.find("r0") != std::string::npos);
    CHECK(out.find("r_crit") != std::string::npos);
    CHECK(out.find("gamma(r0) != 1") != std::string::npos);
    CHECK(cli("exponents 1 0.5 30", dir / "bad.log") == 64);
  }

  TEST_CASE("cli verify: A.2 on the bundled instance passes and writes reports") {
    const auto dir = scratch("a2");
    std::ofstream(dir / "params.json") << R"({"instances": 2})";
    CHECK(cli("verify --lemma A.2 --config " + (dir / "params.json").string() + " --out " + (dir / "v").string(), dir / "v.log") == 0);
    CHECK(slurp(dir / "v.log").find("[pass] bundled slab instance") != std::string::npos);
    CHECK(fs::exists(dir / "v" / "report.json"));
    CHECK(fs::exists(dir / "v" / "report.csv"));
  }
}
