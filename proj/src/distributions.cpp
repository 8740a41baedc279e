// SPDX-License-Identifier: Apache-2.0

#include "ced/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ced/error.hpp"

namespace ced {
namespace {

constexpr double kFullMassTolerance = 1e-6;

bool by_token(const TokenLogProb& a, const TokenLogProb& b) { return a.token < b.token; }

const TokenLogProb* lookup(std::span<const TokenLogProb> entries, const TokenId& token) {
  auto it = std::lower_bound(entries.begin(), entries.end(), token,
                             [](const TokenLogProb& e, const TokenId& t) { return e.token < t; });
  if (it == entries.end() || it->token != token) return nullptr;
  return &*it;
}

}  // namespace

LogProbDist LogProbDist::from_logprobs(std::vector<TokenLogProb> entries, bool truncated) {
  if (entries.empty()) throw ParameterError("distribution has no entries");
  std::sort(entries.begin(), entries.end(), by_token);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!std::isfinite(e.logprob) || e.logprob > 0.0) {
      throw ParameterError("log-probability for token '" + e.token +
                           "' must be finite and <= 0, got " + std::to_string(e.logprob));
    }
    if (i > 0 && entries[i - 1].token == e.token) {
      throw ParameterError("duplicate token '" + e.token + "' in distribution");
    }
  }
  if (!truncated) {
    std::vector<double> values;
    values.reserve(entries.size());
    for (const auto& e : entries) values.push_back(e.logprob);
    double mass = std::exp(log_sum_exp(values));
    if (std::abs(mass - 1.0) > kFullMassTolerance) {
      throw ParameterError("full distribution mass is " + std::to_string(mass) + ", expected 1");
    }
  }
  LogProbDist dist(std::move(entries), truncated);
  for (std::size_t i = 1; i < dist.entries_.size(); ++i) {
    // strict: earlier (smaller) ids win ties
    if (dist.entries_[i].logprob > dist.entries_[dist.argmax_].logprob) dist.argmax_ = i;
  }
  return dist;
}

LogProbDist LogProbDist::from_probs(const std::vector<std::pair<TokenId, double>>& probs,
                                    bool truncated) {
  std::vector<TokenLogProb> entries;
  entries.reserve(probs.size());
  for (const auto& [token, prob] : probs) {
    if (!(prob > 0.0) || prob > 1.0) {
      throw ParameterError("probability for token '" + token + "' must lie in (0, 1]");
    }
    entries.push_back({token, std::log(prob)});
  }
  return from_logprobs(std::move(entries), truncated);
}

std::optional<double> LogProbDist::logprob(const TokenId& token) const {
  if (const auto* e = lookup(entries_, token)) return e->logprob;
  return std::nullopt;
}

const TokenLogProb& LogProbDist::argmax() const noexcept { return entries_[argmax_]; }

const ScoredCandidates::Candidate* ScoredCandidates::find(const TokenId& token) const {
  auto it = std::lower_bound(scores.begin(), scores.end(), token,
                             [](const Candidate& c, const TokenId& t) { return c.token < t; });
  if (it == scores.end() || it->token != token) return nullptr;
  return &*it;
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

// log(alpha * max p~); -inf for alpha == 0 so every token qualifies.
double head_threshold(const LogProbDist& p_tilde, double alpha) {
  return p_tilde.max_logprob() + std::log(alpha);
}

}  // namespace

std::vector<TokenId> adaptive_head(const LogProbDist& p_tilde, double alpha) {
  check_alpha(alpha);
  const double threshold = head_threshold(p_tilde, alpha);
  std::vector<TokenId> head;
  for (const auto& e : p_tilde.entries()) {
    if (e.logprob >= threshold) head.push_back(e.token);
  }
  return head;
}

ScoredCandidates ced_scores(const LogProbDist& p_tilde, const LogProbDist& p, double alpha,
                            double floor) {
  check_alpha(alpha);
  const bool overlap = std::any_of(p_tilde.entries().begin(), p_tilde.entries().end(),
                                   [&](const TokenLogProb& e) { return p.contains(e.token); });
  if (!overlap) throw AlignmentError("distributions share no token; cannot contrast them");

  const double threshold = head_threshold(p_tilde, alpha);
  ScoredCandidates out;
  out.scores.reserve(p_tilde.size());
  const ScoredCandidates::Candidate* best = nullptr;
  for (const auto& e : p_tilde.entries()) {
    ScoredCandidates::Candidate c;
    c.token = e.token;
    c.p_tilde_logprob = e.logprob;
    c.p_logprob = p.logprob(e.token).value_or(floor);
    if (e.logprob >= threshold) {
      c.score = e.logprob - c.p_logprob;
      out.head.push_back(e.token);
    }
    out.scores.push_back(std::move(c));
  }
  for (const auto& c : out.scores) {
    if (c.masked()) continue;
    if (best == nullptr || c.score > best->score ||
        (c.score == best->score && c.p_tilde_logprob > best->p_tilde_logprob)) {
      best = &c;
    }
  }
  // The argmax of p~ always passes the threshold, so best is set.
  out.selected = best->token;
  return out;
}

std::pair<LogProbDist, LogProbDist> align_supports(const LogProbDist& p_tilde,
                                                   const LogProbDist& p, double floor) {
  auto a = p_tilde.entries();
  auto b = p.entries();
  const bool same_support =
      std::equal(a.begin(), a.end(), b.begin(), b.end(),
                 [](const TokenLogProb& x, const TokenLogProb& y) { return x.token == y.token; });
  if (same_support) return {p_tilde, p};

  std::vector<TokenLogProb> left;
  std::vector<TokenLogProb> right;
  left.reserve(a.size() + b.size());
  right.reserve(a.size() + b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].token < b[j].token)) {
      left.push_back(a[i]);
      right.push_back({a[i].token, floor});
      ++i;
    } else if (i == a.size() || b[j].token < a[i].token) {
      left.push_back({b[j].token, floor});
      right.push_back(b[j]);
      ++j;
    } else {
      left.push_back(a[i++]);
      right.push_back(b[j++]);
    }
  }
  return {LogProbDist::from_logprobs(std::move(left), true),
          LogProbDist::from_logprobs(std::move(right), true)};
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kMasked;
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

LogProbDist normalize(const std::vector<TokenLogProb>& logweights) {
  if (logweights.empty()) throw ParameterError("cannot normalize an empty map");
  std::vector<double> values;
  values.reserve(logweights.size());
  for (const auto& e : logweights) {
    if (!std::isfinite(e.logprob)) {
      throw ParameterError("log-weight for token '" + e.token + "' is not finite");
    }
    values.push_back(e.logprob);
  }
  const double lse = log_sum_exp(values);
  std::vector<TokenLogProb> out;
  out.reserve(logweights.size());
  for (const auto& e : logweights) out.push_back({e.token, std::min(0.0, e.logprob - lse)});
  return LogProbDist::from_logprobs(std::move(out), false);
}

}  // namespace ced
