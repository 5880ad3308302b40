#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace nhdp {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvariant = 3;

/// Flat key=value configuration. '#' starts a comment; '-' in keys reads as '_'.
using ConfigMap = std::map<std::string, std::string>;

/// Parse a config file, rejecting any key outside `known` with ConfigError.
ConfigMap read_config(const std::filesystem::path& path, const std::set<std::string>& known);

/// nhdp <train|eval|bench|synth> [--config FILE] [--key VALUE ...]
int run_cli(int argc, const char* const* argv);

}  // namespace nhdp
