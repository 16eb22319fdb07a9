#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/diagnostics.hpp"

namespace kfp {

struct Check {
  std::string name;
  std::string criterion;  // acceptance criterion tag such as "4" or "5b"; empty when untagged
  Verdict verdict = Verdict::Vacuous;
  double value = 0;
  double threshold = 0;
  std::string detail;
};

struct LemmaReport {
  std::string lemma;
  std::string title;
  std::vector<Check> checks;
  nlohmann::json data = nlohmann::json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;

  /// No check failed and at least one passed.
  bool passed() const;
  /// Nothing failed and nothing passed.
  bool vacuous_only() const;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int workers = 0;  // 0 selects the hardware concurrency
  nlohmann::json params = nlohmann::json::object();
  /// When set, only the sections feeding this criterion tag run.
  std::string criterion;
};

const std::vector<std::string>& lemma_ids();

/// Throws std::invalid_argument listing the valid ids for an unknown id.
LemmaReport verify_lemma(const std::string& id, const VerifyOptions& opt);

/// Lemma id whose report carries the given criterion tag, or "" when unknown.
std::string lemma_for_criterion(const std::string& criterion);

nlohmann::json to_json(const LemmaReport& r);

}  // namespace kfp
