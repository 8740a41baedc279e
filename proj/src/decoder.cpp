// SPDX-License-Identifier: Apache-2.0

#include "ced/decoder.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace ced {
namespace {

struct Stop {
  bool hit = false;
  StopReason reason = StopReason::kMaxTokens;
};

// Applies the termination rules after `token` was appended to `generated`.
Stop check_stop(const DecodeParams& params, const std::optional<TokenId>& eos,
                const TokenId& token, std::string& generated, std::string& output,
                std::size_t steps) {
  if (eos && token == *eos) return {true, StopReason::kEos};
  output = generated;
  std::size_t cut = std::string::npos;
  for (const auto& stop : params.stop_sequences) {
    if (stop.empty()) continue;
    cut = std::min(cut, generated.find(stop));
  }
  if (cut != std::string::npos) {
    output = generated.substr(0, cut);
    return {true, StopReason::kStopSequence};
  }
  if (steps >= static_cast<std::size_t>(params.max_new_tokens)) {
    return {true, StopReason::kMaxTokens};
  }
  return {};
}

template <typename Fn>
auto guarded(DecodeTrace& trace, Fn&& fn) {
  try {
    return fn();
  } catch (const DecodeError&) {
    throw;
  } catch (const BackendError& e) {
    throw DecodeError(e, trace);
  }
}

}  // namespace

void DecodeParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (max_new_tokens < 1) throw ParameterError("max_new_tokens must be >= 1");
  if (!std::isfinite(floor) || floor >= 0.0) throw ParameterError("floor must be a finite log-probability < 0");
}

std::string_view to_string(DecodeMethod m) noexcept { return m == DecodeMethod::kCed ? "ced" : "greedy"; }

std::string_view to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::kStopSequence:
      return "stop_sequence";
    case StopReason::kEos:
      return "eos";
    case StopReason::kMaxTokens:
      break;
  }
  return "max_tokens";
}

DecodeMethod parse_method(std::string_view text) {
  if (text == "ced") return DecodeMethod::kCed;
  if (text == "greedy") return DecodeMethod::kGreedy;
  throw ConfigError("unknown decoding method '" + std::string(text) + "' (expected greedy or ced)");
}

std::string DecodeTrace::generated() const {
  std::string out;
  for (const auto& s : steps) out += s.selected;
  return out;
}

DecodeError::DecodeError(const BackendError& cause, DecodeTrace partial)
    : BackendError(std::string("decode aborted after ") + std::to_string(partial.steps.size()) +
                       " steps: " + cause.what(),
                   cause.context_hash()),
      partial_(std::make_shared<const DecodeTrace>(std::move(partial))) {}

DecodeTrace decode_ced(const Backend& backend, const PromptPair& prompts,
                       const DecodeParams& params) {
  params.validate();
  const auto eos = backend.eos_token();
  DecodeTrace trace;
  trace.method = DecodeMethod::kCed;
  trace.plain_prompt = prompts.plain;
  trace.with_examples_prompt = prompts.with_examples;

  std::string generated;
  std::string plain = prompts.plain;
  std::string with_examples = prompts.with_examples;
  for (;;) {
    auto p = guarded(trace, [&] { return backend.next_token_logprobs(plain); });
    auto p_tilde = guarded(trace, [&] { return backend.next_token_logprobs(with_examples); });
    auto [aligned_tilde, aligned_p] = align_supports(p_tilde, p, params.floor);
    auto scored = ced_scores(aligned_tilde, aligned_p, params.alpha, params.floor);
    const TokenId token = scored.selected;

    trace.steps.push_back({std::move(p), std::move(p_tilde), std::move(scored), token});
    generated += token;
    plain += token;
    with_examples += token;
    if (auto stop = check_stop(params, eos, token, generated, trace.output, trace.steps.size());
        stop.hit) {
      trace.stop_reason = stop.reason;
      return trace;
    }
  }
}

DecodeTrace decode_greedy(const Backend& backend, const std::string& prompt,
                          const DecodeParams& params) {
  params.validate();
  const auto eos = backend.eos_token();
  DecodeTrace trace;
  trace.method = DecodeMethod::kGreedy;
  trace.plain_prompt = prompt;

  std::string generated;
  std::string context = prompt;
  for (;;) {
    auto p = guarded(trace, [&] { return backend.next_token_logprobs(context); });
    const TokenId token = p.argmax().token;
    trace.steps.push_back({std::move(p), std::nullopt, std::nullopt, token});
    generated += token;
    context += token;
    if (auto stop = check_stop(params, eos, token, generated, trace.output, trace.steps.size());
        stop.hit) {
      trace.stop_reason = stop.reason;
      return trace;
    }
  }
}

namespace {

nlohmann::json dist_to_json(const LogProbDist& d) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& e : d.entries()) out[e.token] = e.logprob;
  return out;
}

LogProbDist dist_from_json(const nlohmann::json& doc) {
  std::vector<TokenLogProb> entries;
  std::vector<double> values;
  for (const auto& [token, lp] : doc.items()) {
    entries.push_back({token, lp.get<double>()});
    values.push_back(entries.back().logprob);
  }
  const bool full = !values.empty() && std::abs(std::exp(log_sum_exp(values)) - 1.0) <= 1e-6;
  return LogProbDist::from_logprobs(std::move(entries), !full);
}

StopReason parse_stop_reason(std::string_view s) {
  if (s == "stop_sequence") return StopReason::kStopSequence;
  if (s == "eos") return StopReason::kEos;
  if (s == "max_tokens") return StopReason::kMaxTokens;
  throw ConfigError("unknown stop reason '" + std::string(s) + "'");
}

}  // namespace

nlohmann::json trace_to_json(const DecodeTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    nlohmann::json step = {{"p", dist_to_json(s.p)}, {"selected", s.selected}};
    if (s.p_tilde) step["p_tilde"] = dist_to_json(*s.p_tilde);
    if (s.scored) {
      step["head"] = s.scored->head;
      nlohmann::json scores = nlohmann::json::object();
      for (const auto& c : s.scored->scores) {
        scores[c.token] = c.masked() ? nlohmann::json(nullptr) : nlohmann::json(c.score);
      }
      step["scores"] = std::move(scores);
    }
    steps.push_back(std::move(step));
  }
  nlohmann::json prompts = {{"plain", trace.plain_prompt}};
  if (trace.method == DecodeMethod::kCed) prompts["with_examples"] = trace.with_examples_prompt;
  return {{"method", to_string(trace.method)},
          {"prompts", std::move(prompts)},
          {"steps", std::move(steps)},
          {"output", trace.output},
          {"stop_reason", to_string(trace.stop_reason)}};
}

DecodeTrace trace_from_json(const nlohmann::json& doc) {
  try {
    DecodeTrace trace;
    trace.method = parse_method(doc.at("method").get<std::string>());
    trace.plain_prompt = doc.at("prompts").at("plain").get<std::string>();
    if (trace.method == DecodeMethod::kCed) {
      trace.with_examples_prompt = doc.at("prompts").at("with_examples").get<std::string>();
    }
    for (const auto& s : doc.at("steps")) {
      DecodeStep step{dist_from_json(s.at("p")), std::nullopt, std::nullopt,
                      s.at("selected").get<std::string>()};
      if (s.contains("p_tilde")) step.p_tilde = dist_from_json(s["p_tilde"]);
      if (s.contains("scores")) {
        ScoredCandidates scored;
        scored.head = s.at("head").get<std::vector<TokenId>>();
        scored.selected = step.selected;
        for (const auto& [token, score] : s["scores"].items()) {
          ScoredCandidates::Candidate c;
          c.token = token;
          c.score = score.is_null() ? kMasked : score.get<double>();
          if (step.p_tilde) c.p_tilde_logprob = step.p_tilde->logprob(token).value_or(kMasked);
          c.p_logprob = step.p.logprob(token).value_or(kMasked);
          scored.scores.push_back(std::move(c));
        }
        step.scored = std::move(scored);
      }
      trace.steps.push_back(std::move(step));
    }
    trace.output = doc.at("output").get<std::string>();
    trace.stop_reason = parse_stop_reason(doc.at("stop_reason").get<std::string>());
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed decode trace: ") + e.what());
  }
}

ReplayBackend replay_backend(const DecodeTrace& trace, std::optional<TokenId> eos) {
  std::unordered_map<std::string, LogProbDist> recorded;
  std::string generated;
  for (const auto& step : trace.steps) {
    recorded.insert_or_assign(trace.plain_prompt + generated, step.p);
    if (step.p_tilde) recorded.insert_or_assign(trace.with_examples_prompt + generated, *step.p_tilde);
    generated += step.selected;
  }
  return ReplayBackend(std::move(recorded), std::move(eos));
}

}  // namespace ced
