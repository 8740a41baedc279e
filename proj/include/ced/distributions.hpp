// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ced {

/// Token identifiers are the backend's literal token strings.
using TokenId = std::string;

struct TokenLogProb {
  TokenId token;
  double logprob = 0.0;

  friend bool operator==(const TokenLogProb&, const TokenLogProb&) = default;
};

inline constexpr double kDefaultAlpha = 0.1;
inline constexpr double kDefaultFloor = -20.0;
inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

/// Next-token distribution as natural-log probabilities keyed by token id.
///
/// Entries are kept sorted by token id. Every value is finite and <= 0, the map
/// is never empty, and a non-truncated distribution sums to 1 within 1e-6.
/// A truncated distribution covers only part of the vocabulary (a remote
/// backend's top-k, or the union produced by align_supports).
class LogProbDist {
 public:
  /// Validates and sorts. Throws ParameterError on any invariant violation.
  static LogProbDist from_logprobs(std::vector<TokenLogProb> entries, bool truncated);
  /// Convenience for tests and rule tables: probabilities in (0, 1].
  static LogProbDist from_probs(const std::vector<std::pair<TokenId, double>>& probs,
                                bool truncated = false);

  std::span<const TokenLogProb> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool truncated() const noexcept { return truncated_; }

  std::optional<double> logprob(const TokenId& token) const;
  bool contains(const TokenId& token) const { return logprob(token).has_value(); }

  /// Highest-probability entry; ties go to the lexicographically smallest id.
  const TokenLogProb& argmax() const noexcept;
  double max_logprob() const noexcept { return argmax().logprob; }

  friend bool operator==(const LogProbDist&, const LogProbDist&) = default;

 private:
  LogProbDist(std::vector<TokenLogProb> entries, bool truncated)
      : entries_(std::move(entries)), truncated_(truncated) {}

  std::vector<TokenLogProb> entries_;
  bool truncated_ = false;
  std::size_t argmax_ = 0;
};

/// Result of contrastive scoring over one step.
///
/// scores holds one entry per token of the example-conditioned distribution;
/// tokens outside head carry kMasked. head is sorted by token id.
struct ScoredCandidates {
  struct Candidate {
    TokenId token;
    double score = kMasked;
    double p_tilde_logprob = 0.0;
    double p_logprob = 0.0;

    bool masked() const noexcept { return score == kMasked; }
  };

  std::vector<Candidate> scores;
  std::vector<TokenId> head;
  TokenId selected;

  const Candidate* find(const TokenId& token) const;
};

/// Plausibility head: tokens with p_tilde(t) >= alpha * max_w p_tilde(w).
/// Returned in token-id order. Throws ParameterError for alpha outside [0, 1].
std::vector<TokenId> adaptive_head(const LogProbDist& p_tilde, double alpha);

/// Contrastive scores log p_tilde(t) - log p(t) over the head, everything else
/// masked. Tokens of the head missing from p use `floor` as their log p.
/// Ties on score go to higher p_tilde, then to the smallest token id.
/// Throws AlignmentError when the two supports share no token.
ScoredCandidates ced_scores(const LogProbDist& p_tilde, const LogProbDist& p,
                            double alpha = kDefaultAlpha, double floor = kDefaultFloor);

/// Extends both distributions to the union of their supports, filling gaps
/// with `floor`. Inputs with identical supports come back unchanged; otherwise
/// both outputs are flagged truncated.
std::pair<LogProbDist, LogProbDist> align_supports(const LogProbDist& p_tilde,
                                                   const LogProbDist& p,
                                                   double floor = kDefaultFloor);

/// Log-softmax over arbitrary finite log-weights.
LogProbDist normalize(const std::vector<TokenLogProb>& logweights);

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> values);

}  // namespace ced
