#pragma once

// Command-line front end: generate, solve, evaluate, benchmark, cuts-export.

#include <cstdint>
#include <ostream>
#include <string>

#include <json.hpp>

namespace prescriptor::cli {

inline constexpr const char* kToolName = "prescriptor";
inline constexpr const char* kVersion = "0.3.0";

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kSolverFailure = 1;
inline constexpr int kUsageError = 2;

/// FNV-1a of the effective configuration with run-environment keys (threads,
/// config path, output destinations) removed.
std::uint64_t config_hash(const nlohmann::json& config);

/// "# key value" lines carried by every CSV the tool writes.
std::string metadata_header(const nlohmann::json& config, std::uint64_t seed);

/// Runs one invocation; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace prescriptor::cli
