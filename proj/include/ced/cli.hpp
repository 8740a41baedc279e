// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ced::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalid = 1,  // validation failures and unexpected errors
  kConfigError = 2,
  kBackendError = 3,
  kDatasetError = 4,
};

/// Resolved options shared by the run and decode commands. Mirrors the flags
/// one to one; a config file uses the same keys.
struct RunConfig {
  std::string dataset;
  std::string backend;
  double alpha = 0.1;
  std::vector<std::size_t> shots{0, 1, 3, 5};
  std::vector<std::string> methods{"greedy", "ced"};
  std::string strategy = "question_type";
  std::uint64_t seed = 0;
  int top_n = 5;
  int max_new_tokens = 32;
  std::vector<std::string> stop{"\n"};
  double floor = -20.0;
  std::string metric = "auto";
  std::string prompt_template;
  std::size_t top_k = 20;
  double timeout = 30.0;
  double smoothing = 0.1;
  std::size_t jobs = 0;  // 0: one per processor
  std::string out;
  int verbosity = 0;

  nlohmann::json to_json() const;
  /// Key/value text accepted by --config; parsing it back yields an equal
  /// config.
  std::string to_config_text() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Entry point for the `ced` tool. argv[0] is the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses `ced run ...` style arguments (without the program name) into a
/// config. Throws ConfigError on malformed input.
RunConfig parse_run_config(const std::vector<std::string>& args);

/// Replaces \n, \t, \r and \\ escapes with the characters they name.
std::string unescape(std::string_view text);
std::string escape(std::string_view text);

}  // namespace ced::cli
