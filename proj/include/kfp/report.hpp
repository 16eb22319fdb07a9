#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace kfp {

std::string sha256_hex(const std::string& bytes);

/// Hash of the canonical (sorted-key, compact) serialization.
std::string config_hash(const nlohmann::json& config);

/// Hash over the concatenated contents of the files, in order.
std::string content_hash(const std::vector<std::string>& paths);

void write_json(const std::string& path, const nlohmann::json& j);

/// Writes a CSV table; every row must have as many cells as the header.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Shortest round-trip decimal form.
std::string fmt(double v);

}  // namespace kfp
