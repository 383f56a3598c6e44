#pragma once

// Run-configuration helpers shared by the CLI and the reports.

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace vip {

// 16 hex digits of FNV-1a over the compact dump of `config`. nlohmann::json
// objects keep keys sorted, so equal configs give equal fingerprints.
std::string fingerprint(const nlohmann::json& config);

// Recursive merge; values in `over` win.
nlohmann::json merge(nlohmann::json base, const nlohmann::json& over);

nlohmann::json read_json_file(const std::string& path);

// Flag value, else VIP_SEED from the environment, else `fallback`.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback = 0);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// by index so the outcome does not depend on scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace vip
