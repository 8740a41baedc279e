// SPDX-License-Identifier: Apache-2.0

#include "ced/decoder.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>

#include "ced/error.hpp"

namespace ced {
namespace {

LogProbDist probs(std::vector<std::pair<TokenId, double>> v) { return LogProbDist::from_probs(v); }

PromptPair pair_for(const std::string& header, const std::string& examples, const std::string& body) {
  return {header + body, header + examples + body, header.size()};
}

// plain context prefers "cat", the example-prefixed one prefers "dog".
TableBackend cat_dog_backend() {
  return build_toy_table({
      {"", probs({{"\n", 0.9}, {" x", 0.1}})},
      {"H:Q", probs({{" cat", 0.6}, {" dog", 0.4}})},
      {"H:EXQ", probs({{" cat", 0.3}, {" dog", 0.7}})},
  });
}

TEST(DecodeCed, ContrastPicksExampleBoostedToken) {
  auto backend = cat_dog_backend();
  // oracle: log(0.7/0.4) = 0.5596 > log(0.3/0.6) = -0.6931
  ASSERT_GT(std::log(0.7 / 0.4), std::log(0.3 / 0.6));
  auto trace = decode_ced(backend, pair_for("H:", "EX", "Q"), {});
  ASSERT_FALSE(trace.steps.empty());
  EXPECT_EQ(trace.steps[0].selected, " dog");
  EXPECT_EQ(trace.output, " dog");
  EXPECT_EQ(trace.stop_reason, StopReason::kStopSequence);
}

TEST(DecodeCed, GreedyOnPlainPicksCat) {
  auto backend = cat_dog_backend();
  EXPECT_EQ(decode_greedy(backend, "H:Q", {}).output, " cat");
  EXPECT_EQ(decode_greedy(backend, "H:EXQ", {}).output, " dog");
}

TEST(DecodeCed, ZeroShotMatchesGreedy) {
  auto backend = cat_dog_backend();
  auto ced = decode_ced(backend, pair_for("H:", "", "Q"), {});
  auto greedy = decode_greedy(backend, "H:Q", {});
  EXPECT_EQ(ced.output, greedy.output);
  for (const auto& step : ced.steps) {
    for (const auto& c : step.scored->scores) {
      if (!c.masked()) EXPECT_EQ(c.score, 0.0);
    }
  }
}

TEST(DecodeCed, StopsOnStopSequenceAfterThreeTokens) {
  auto backend = build_toy_table({
      {"", probs({{"a", 0.6}, {"b", 0.4}})},
      {"aaa", probs({{"\n", 0.8}, {"a", 0.2}})},
  });
  auto trace = decode_ced(backend, pair_for("", "", "go "), {});
  EXPECT_EQ(trace.output, "aaa");
  EXPECT_EQ(trace.steps.size(), 4u);
  EXPECT_EQ(trace.stop_reason, StopReason::kStopSequence);
  EXPECT_EQ(trace.generated(), "aaa\n");
}

TEST(DecodeCed, StopSequenceSpanningTokens) {
  auto backend = build_toy_table({
      {"", probs({{"ab", 0.6}, {"c", 0.4}})},
      {"ab", probs({{"cd", 0.9}, {"ab", 0.1}})},
  });
  DecodeParams params;
  params.stop_sequences = {"bc"};
  auto trace = decode_greedy(backend, "x", params);
  EXPECT_EQ(trace.generated(), "abcd");
  EXPECT_EQ(trace.output, "a");
}

TEST(DecodeCed, MaxTokensBoundsSteps) {
  auto backend = build_toy_table({{"", probs({{"a", 0.6}, {"\n", 0.4}})}});
  DecodeParams params;
  params.max_new_tokens = 5;
  auto trace = decode_ced(backend, pair_for("", "", "x"), params);
  EXPECT_EQ(trace.steps.size(), 5u);
  EXPECT_EQ(trace.output, "aaaaa");
  EXPECT_EQ(trace.stop_reason, StopReason::kMaxTokens);
}

TEST(DecodeGreedy, ArgmaxAndStop) {
  auto backend = build_toy_table({{"", probs({{"a", 0.7}, {"b", 0.3}})}});
  DecodeParams params;
  params.stop_sequences = {"a"};
  auto trace = decode_greedy(backend, "ctx", params);
  EXPECT_EQ(trace.steps.size(), 1u);
  EXPECT_EQ(trace.generated(), "a");
  EXPECT_EQ(trace.output, "");
  EXPECT_EQ(trace.stop_reason, StopReason::kStopSequence);
}

TEST(DecodeGreedy, SingleTokenBudgetIgnoresStops) {
  auto backend = build_toy_table({{"", probs({{"a", 0.7}, {"b", 0.3}})}});
  DecodeParams params;
  params.max_new_tokens = 1;
  params.stop_sequences = {"zzz"};
  auto trace = decode_greedy(backend, "ctx", params);
  EXPECT_EQ(trace.steps.size(), 1u);
  EXPECT_EQ(trace.stop_reason, StopReason::kMaxTokens);
}

TEST(DecodeGreedy, Deterministic) {
  auto backend = cat_dog_backend();
  auto a = trace_to_json(decode_greedy(backend, "H:Q", {}));
  auto b = trace_to_json(decode_greedy(backend, "H:Q", {}));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Decode, EosTerminatesAndIsNotEmitted) {
  auto backend = build_toy_table({{"", probs({{"a", 0.6}, {"b", 0.4}})}, {"a", probs({{"</s>", 0.9}, {"a", 0.1}})}},
                                 TokenId("</s>"));
  auto trace = decode_greedy(backend, "x", {});
  EXPECT_EQ(trace.output, "a");
  EXPECT_EQ(trace.stop_reason, StopReason::kEos);
  auto ced = decode_ced(backend, pair_for("", "", "x"), {});
  EXPECT_EQ(ced.output, "a");
  EXPECT_EQ(ced.stop_reason, StopReason::kEos);
}

TEST(Decode, RejectsBadParams) {
  auto backend = cat_dog_backend();
  DecodeParams bad;
  bad.alpha = 1.5;
  EXPECT_THROW(decode_greedy(backend, "x", bad), ParameterError);
  bad = {};
  bad.max_new_tokens = 0;
  EXPECT_THROW(decode_ced(backend, pair_for("", "", "x"), bad), ParameterError);
}

TEST(Decode, BackendFailureCarriesPartialTrace) {
  // recorded only for the first step
  ReplayBackend replay({{"x", probs({{"a", 0.6}, {"b", 0.4}})}});
  try {
    decode_ced(replay, pair_for("", "", "x"), {});
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.partial().steps.size(), 1u);
    EXPECT_EQ(e.partial().steps[0].selected, "a");
    EXPECT_EQ(e.context_hash(), context_hash("xa"));
  }
}

TEST(Decode, SharedPrefixAndHeadMembership) {
  auto backend = build_toy_table({
      {"", probs({{"\n", 0.3}, {" a", 0.4}, {" b", 0.3}})},
      {"EXbody", probs({{" b", 0.5}, {" a", 0.3}, {"\n", 0.2}})},
      {" b", probs({{" a", 0.5}, {"\n", 0.5}})},
  });
  DecodeParams params;
  params.max_new_tokens = 6;
  const auto prompts = pair_for("H\n", "EX", "body");
  auto trace = decode_ced(backend, prompts, params);
  for (const auto& step : trace.steps) {
    const auto& head = step.scored->head;
    EXPECT_NE(std::find(head.begin(), head.end(), step.selected), head.end());
  }
  EXPECT_EQ(trace.with_examples_prompt.substr(0, 2) + trace.with_examples_prompt.substr(4),
            trace.plain_prompt);
}

TEST(Decode, TraceJsonRoundTripAndReplay) {
  auto backend = cat_dog_backend();
  auto trace = decode_ced(backend, pair_for("H:", "EX", "Q"), {});
  auto doc = trace_to_json(trace);
  EXPECT_EQ(doc["method"], "ced");
  EXPECT_EQ(doc["stop_reason"], "stop_sequence");
  EXPECT_TRUE(doc["steps"][0].contains("head"));
  EXPECT_TRUE(doc["steps"][0]["scores"].is_object());

  auto restored = trace_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(restored.output, trace.output);
  EXPECT_EQ(trace_to_json(restored).dump(), doc.dump());

  auto replay = replay_backend(restored);
  auto again = decode_ced(replay, pair_for("H:", "EX", "Q"), {});
  EXPECT_EQ(again.output, trace.output);
  EXPECT_EQ(trace_to_json(again).dump(), doc.dump());
}

TEST(Decode, MaskedScoresSerializeAsNull) {
  auto backend = build_toy_table({{"", probs({{"a", 0.95}, {"b", 0.05}})}});
  DecodeParams params;
  params.max_new_tokens = 1;
  auto doc = trace_to_json(decode_ced(backend, pair_for("", "", "x"), params));
  EXPECT_TRUE(doc["steps"][0]["scores"]["b"].is_null());
  EXPECT_EQ(doc["steps"][0]["head"], nlohmann::json::array({"a"}));
}

}  // namespace
}  // namespace ced
