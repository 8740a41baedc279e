// SPDX-License-Identifier: Apache-2.0

#include "ced/metrics.hpp"

#include <gtest/gtest.h>

#include "ced/error.hpp"

namespace ced {
namespace {

TEST(NormalizeAnswer, Rules) {
  EXPECT_EQ(normalize_answer("The Dog."), "dog");
  EXPECT_EQ(normalize_answer("  two  "), "two");
  EXPECT_EQ(normalize_answer("blue"), "blue");
  EXPECT_EQ(normalize_answer("a  red\tball!?"), "red ball");
  EXPECT_EQ(normalize_answer("An apple"), "apple");
  EXPECT_EQ(normalize_answer("theater"), "theater");
  EXPECT_EQ(normalize_answer("the"), "the");
  EXPECT_EQ(normalize_answer(""), "");
  EXPECT_EQ(normalize_answer("yes ."), "yes");
}

TEST(NormalizeAnswer, Idempotent) {
  for (const char* s : {"The Dog.", "  A cat ", "x, y", "THE END!"}) {
    const auto once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << s;
  }
}

TEST(ExactMatch, Examples) {
  EXPECT_EQ(exact_match("The dog", {"dog"}), 1);
  EXPECT_EQ(exact_match("cat", {"dog", "puppy"}), 0);
  EXPECT_EQ(exact_match("", {"dog"}), 0);
  EXPECT_EQ(exact_match(" puppy\n", {"dog", "Puppy"}), 1);
}

TEST(VqaSoftAccuracy, Formula) {
  const std::vector<std::string> three{"dog", "dog", "dog", "cat", "cat", "cat", "cat", "pup", "pup", "pup"};
  EXPECT_DOUBLE_EQ(vqa_soft_accuracy("dog", three), 1.0);  // min(3/3, 1)
  const std::vector<std::string> one{"dog", "cat", "cat", "cat", "cat", "cat", "cat", "cat", "cat", "cat"};
  EXPECT_DOUBLE_EQ(vqa_soft_accuracy("dog", one), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(vqa_soft_accuracy("cow", one), 0.0);
  EXPECT_DOUBLE_EQ(vqa_soft_accuracy("cat", one), 1.0);
  EXPECT_DOUBLE_EQ(vqa_soft_accuracy("", one), 0.0);
}

TEST(ScoreAnswer, AutoSwitchesOnAnnotatorCount) {
  const std::vector<std::string> four{"dog", "cat", "cat", "cat"};
  EXPECT_DOUBLE_EQ(score_answer(MetricKind::kAuto, "dog", four), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(score_answer(MetricKind::kExactMatch, "dog", four), 1.0);
  EXPECT_DOUBLE_EQ(score_answer(MetricKind::kAuto, "dog", {"dog", "cat"}), 1.0);
  EXPECT_DOUBLE_EQ(score_answer(MetricKind::kSoft, "dog", {"dog", "cat"}), 1.0 / 3.0);
}

TEST(ParseMetric, Names) {
  EXPECT_EQ(parse_metric("vqa_soft"), MetricKind::kSoft);
  EXPECT_EQ(to_string(parse_metric("exact_match")), "exact_match");
  EXPECT_THROW(parse_metric("bleu"), ConfigError);
}

}  // namespace
}  // namespace ced
