// One PASS/FAIL line per acceptance criterion; exit status 0 only when every requested
// criterion passes.
#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "kfp/verify.hpp"

namespace {

const std::vector<std::string> kCriteria = {"1", "2", "3", "4", "5a", "5b", "6",
                                            "7", "8", "9", "10", "11"};

bool run_criterion(const std::string& c, std::uint64_t seed) {
  const std::string lemma = kfp::lemma_for_criterion(c);
  if (lemma.empty()) {
    std::cout << "criterion " << c << ": FAIL (unknown criterion)\n";
    return false;
  }
  kfp::VerifyOptions opt;
  opt.seed = seed;
  opt.criterion = c;
  const auto start = std::chrono::steady_clock::now();
  const auto rep = kfp::verify_lemma(lemma, opt);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  int passed = 0, failed = 0;
  const kfp::Check* first_fail = nullptr;
  for (const auto& chk : rep.checks) {
    if (chk.criterion != c) continue;
    if (chk.verdict == kfp::Verdict::Pass) ++passed;
    if (chk.verdict == kfp::Verdict::Fail) {
      ++failed;
      if (!first_fail) first_fail = &chk;
    }
  }
  const bool ok = failed == 0 && passed > 0;
  std::cout << "criterion " << c << ": " << (ok ? "PASS" : "FAIL") << " (lemma " << lemma
            << ", " << passed << " passed, " << failed << " failed, " << secs << " s)";
  if (first_fail)
    std::cout << "; " << first_fail->name << ": " << first_fail->value << " vs "
              << first_fail->threshold << "; " << first_fail->detail;
  else if (passed == 0)
    std::cout << "; no non-vacuous check";
  std::cout << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> criteria;
  std::uint64_t seed = 1;
  app.add_option("--criterion", criteria, "criterion tag (repeatable); all when omitted");
  app.add_option("--seed", seed, "seed");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = kCriteria;
  bool all = true;
  for (const auto& c : criteria) {
    try {
      all = run_criterion(c, seed) && all;
    } catch (const std::exception& e) {
      std::cout << "criterion " << c << ": FAIL (error: " << e.what() << ")\n";
      all = false;
    }
  }
  return all ? 0 : 1;
}
