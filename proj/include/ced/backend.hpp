// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ced/distributions.hpp"

namespace ced {

/// Text in, next-token log-probabilities out. Implementations are safe to
/// share between concurrent decoding workers.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Throws BackendError when a distribution cannot be produced and
  /// ParameterError for an empty context.
  virtual LogProbDist next_token_logprobs(std::string_view context) const = 0;
  /// Token string that ends generation, if the backend has one.
  virtual std::optional<TokenId> eos_token() const { return std::nullopt; }
  virtual std::string model_name() const = 0;
};

struct TableRule {
  std::string suffix;
  LogProbDist dist;
};

/// Deterministic lookup model: the rule with the longest suffix of the context
/// wins. Rule "" is the mandatory default.
class TableBackend final : public Backend {
 public:
  /// Throws ConfigError when the default rule is missing or a suffix repeats.
  TableBackend(std::vector<TableRule> rules, std::optional<TokenId> eos = std::nullopt,
               std::string model = "table");

  /// JSON rule file: {"model": str?, "eos": str?, "rules": [{"suffix": str,
  /// "probs": {token: p}} | {"suffix": str, "logprobs": {token: lp}}]}.
  static TableBackend load(const std::filesystem::path& path);

  LogProbDist next_token_logprobs(std::string_view context) const override;
  std::optional<TokenId> eos_token() const override { return eos_; }
  std::string model_name() const override { return model_; }

  const TableRule& match(std::string_view context) const;
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const std::vector<TableRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<TableRule> rules_;
  // suffix length (descending) -> suffix -> rule index
  std::map<std::size_t, std::unordered_map<std::string, std::size_t>, std::greater<>> index_;
  std::optional<TokenId> eos_;
  std::string model_;
  std::size_t vocab_size_ = 0;
};

TableBackend build_toy_table(std::vector<TableRule> rules,
                             std::optional<TokenId> eos = std::nullopt);

/// Word bigram model. Tokens surface as " word" (leading space) so the decoded
/// text stays whitespace-separated; the line-break token surfaces as "\n".
class BigramBackend final : public Backend {
 public:
  static constexpr std::string_view kLineBreak = "\n";

  LogProbDist next_token_logprobs(std::string_view context) const override;
  std::string model_name() const override { return "bigram"; }

  /// Distribution following a raw corpus token.
  LogProbDist distribution_after(std::string_view previous) const;

  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  double smoothing() const noexcept { return smoothing_; }

  static std::string surface(std::string_view corpus_token);

 private:
  friend BigramBackend fit_bigram(const std::vector<std::string>& corpus, double smoothing);

  std::vector<std::string> vocab_;  // sorted corpus tokens
  std::unordered_map<std::string, std::map<std::string, std::size_t>> successors_;
  std::unordered_map<std::string, std::size_t> context_counts_;
  std::map<std::string, std::size_t> unigram_;
  std::size_t total_ = 0;
  double smoothing_ = 0.0;
};

/// (count(prev, next) + s) / (count(prev) + s * |V|). With s == 0, tokens never
/// seen after prev are left out of the support, and a prev with no observed
/// successor falls back to corpus unigram frequencies.
/// Throws ParameterError for fewer than two tokens or s < 0.
BigramBackend fit_bigram(const std::vector<std::string>& corpus, double smoothing);

/// Whitespace-tokenized corpus file; every line ends with a line-break token.
BigramBackend load_bigram(const std::filesystem::path& path, double smoothing);

/// Parsed /v1/next_token_logprobs response.
struct LogProbResponse {
  std::string model;
  LogProbDist dist;
  std::optional<TokenId> eos;
};

/// Validates a response body against the wire contract: "model" string,
/// non-empty "entries" sorted by descending logprob, at most top_k of them,
/// unique tokens, finite logprobs <= 0. Throws BackendError otherwise.
LogProbResponse parse_logprob_response(std::string_view body, std::size_t top_k,
                                       std::uint64_t context_hash = 0);

/// Request body for /v1/next_token_logprobs.
std::string make_logprob_request(std::string_view context, std::size_t top_k);

struct RemoteOptions {
  std::string endpoint;  // http://host:port[/prefix]
  std::size_t top_k = 20;
  std::chrono::duration<double> timeout{30.0};
  std::size_t max_in_flight = 8;
};

/// HTTP client for the logprob wire protocol. Responses are cached per context
/// for the lifetime of the client.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  LogProbDist next_token_logprobs(std::string_view context) const override;
  std::optional<TokenId> eos_token() const override;
  std::string model_name() const override;

  /// GET /v1/health; returns the served model name or throws BackendError.
  std::string health() const;

  const RemoteOptions& options() const noexcept { return options_; }
  std::size_t requests_sent() const;

 private:
  struct Endpoint {
    std::string origin;  // scheme://host:port
    std::string prefix;  // path prefix without trailing slash
  };

  std::string post(const std::string& path, const std::string& body, std::uint64_t hash) const;

  RemoteOptions options_;
  Endpoint endpoint_;
  mutable std::counting_semaphore<> in_flight_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, LogProbDist> cache_;
  mutable std::optional<TokenId> eos_;
  mutable std::string model_;
  mutable std::size_t requests_ = 0;
};

/// Serves recorded distributions by exact context; unknown contexts raise
/// BackendError.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::unordered_map<std::string, LogProbDist> recorded,
                std::optional<TokenId> eos = std::nullopt);

  LogProbDist next_token_logprobs(std::string_view context) const override;
  std::optional<TokenId> eos_token() const override { return eos_; }
  std::string model_name() const override { return "replay"; }

 private:
  std::unordered_map<std::string, LogProbDist> recorded_;
  std::optional<TokenId> eos_;
};

enum class BackendKind { kTable, kBigram, kRemote };

struct BackendDescriptor {
  BackendKind kind = BackendKind::kTable;
  std::string location;  // file path for toy kinds, URL for remote
  std::size_t vocab_size = 0;
  std::size_t top_k = 20;
  double timeout_seconds = 30.0;
  double smoothing = 0.1;
  std::size_t max_in_flight = 8;

  /// "table:PATH", "bigram:PATH" or "remote:URL". Throws ConfigError.
  static BackendDescriptor parse(std::string_view spec);
  std::string to_string() const;
};

/// Builds the backend. For remote descriptors CED_BACKEND_URL, when set,
/// replaces the configured endpoint. Throws ConfigError for unusable
/// descriptors (missing files, top_k < 2, vocabulary < 2).
std::shared_ptr<const Backend> make_backend(BackendDescriptor& descriptor);

}  // namespace ced
