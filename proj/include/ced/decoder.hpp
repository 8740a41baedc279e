// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ced/backend.hpp"
#include "ced/distributions.hpp"
#include "ced/error.hpp"
#include "ced/fusion.hpp"

namespace ced {

struct DecodeParams {
  double alpha = kDefaultAlpha;
  int max_new_tokens = 32;
  std::vector<std::string> stop_sequences{"\n"};
  double floor = kDefaultFloor;

  /// Throws ParameterError.
  void validate() const;
};

enum class DecodeMethod { kGreedy, kCed };
enum class StopReason { kStopSequence, kMaxTokens, kEos };

std::string_view to_string(DecodeMethod m) noexcept;
std::string_view to_string(StopReason r) noexcept;
DecodeMethod parse_method(std::string_view text);

/// One generated position. Greedy steps only fill p and selected.
struct DecodeStep {
  LogProbDist p;
  std::optional<LogProbDist> p_tilde;
  std::optional<ScoredCandidates> scored;
  TokenId selected;
};

struct DecodeTrace {
  DecodeMethod method = DecodeMethod::kGreedy;
  std::string plain_prompt;
  std::string with_examples_prompt;  // empty for greedy
  std::vector<DecodeStep> steps;
  std::string output;
  StopReason stop_reason = StopReason::kMaxTokens;

  /// Every selected token in order, stop text included.
  std::string generated() const;
};

/// Backend failure in the middle of a decode; partial() holds the steps
/// completed before the failure.
class DecodeError : public BackendError {
 public:
  DecodeError(const BackendError& cause, DecodeTrace partial);

  const DecodeTrace& partial() const noexcept { return *partial_; }

 private:
  std::shared_ptr<const DecodeTrace> partial_;
};

/// Contrastive decode: both contexts are extended with the same selected token
/// every step.
DecodeTrace decode_ced(const Backend& backend, const PromptPair& prompts,
                       const DecodeParams& params = {});

/// Argmax decode over a single context (lexicographically smallest token on
/// ties).
DecodeTrace decode_greedy(const Backend& backend, const std::string& prompt,
                          const DecodeParams& params = {});

nlohmann::json trace_to_json(const DecodeTrace& trace);
DecodeTrace trace_from_json(const nlohmann::json& doc);

/// Backend answering exactly the contexts a trace visited with the recorded
/// distributions.
ReplayBackend replay_backend(const DecodeTrace& trace, std::optional<TokenId> eos = std::nullopt);

}  // namespace ced
