// SPDX-License-Identifier: Apache-2.0

#include "ced/backend.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ced/error.hpp"

namespace ced {
namespace {

LogProbDist uniform_xy() { return LogProbDist::from_probs({{"x", 0.5}, {"y", 0.5}}); }

TEST(TableBackend, DefaultRuleAnswersEverything) {
  auto table = build_toy_table({{"", uniform_xy()}});
  EXPECT_EQ(table.next_token_logprobs("anything"), uniform_xy());
  EXPECT_EQ(table.next_token_logprobs("x"), uniform_xy());
  EXPECT_EQ(table.vocab_size(), 2u);
}

TEST(TableBackend, LongestSuffixWins) {
  const auto green = LogProbDist::from_probs({{"x", 0.9}, {"y", 0.1}});
  const auto very = LogProbDist::from_probs({{"x", 0.2}, {"y", 0.8}});
  auto table = build_toy_table({{"", uniform_xy()}, {"green", green}, {"very green", very}});
  EXPECT_EQ(table.next_token_logprobs("it is green"), green);
  EXPECT_EQ(table.next_token_logprobs("it is very green"), very);
  EXPECT_EQ(table.next_token_logprobs("green it is"), uniform_xy());
  EXPECT_EQ(table.next_token_logprobs("green"), green);
}

TEST(TableBackend, FixedAnswerDistribution) {
  const auto abc = LogProbDist::from_probs({{"a", 0.7}, {"b", 0.2}, {"c", 0.1}});
  auto table = build_toy_table({{"", uniform_xy()}, {"Answer:", abc}});
  EXPECT_EQ(table.next_token_logprobs("Question: ?\nAnswer:"), abc);
}

TEST(TableBackend, ValidatesRules) {
  EXPECT_THROW(build_toy_table({{"green", uniform_xy()}}), ConfigError);
  EXPECT_THROW(build_toy_table({{"", uniform_xy()}, {"ab", uniform_xy()}, {"ab", uniform_xy()}}),
               ConfigError);
  auto table = build_toy_table({{"", uniform_xy()}});
  EXPECT_THROW(table.next_token_logprobs(""), ParameterError);
}

TEST(TableBackend, IsDeterministic) {
  auto table = build_toy_table({{"", uniform_xy()}, {"q", LogProbDist::from_probs({{"x", 0.3}, {"y", 0.7}})}});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(table.next_token_logprobs("aq"), table.next_token_logprobs("aq"));
}

TEST(TableBackend, LoadsJsonRules) {
  const auto path = std::filesystem::temp_directory_path() / "ced_table_test.json";
  std::ofstream(path) << R"({"model": "m", "eos": "</s>", "rules": [
      {"suffix": "", "probs": {"x": 0.5, "y": 0.5}},
      {"suffix": "z", "logprobs": {"x": 0.0}}]})";
  auto table = TableBackend::load(path);
  EXPECT_EQ(table.model_name(), "m");
  EXPECT_EQ(table.eos_token(), TokenId("</s>"));
  EXPECT_EQ(*table.next_token_logprobs("z").logprob("x"), 0.0);

  std::ofstream(path) << R"({"rules": [{"suffix": "", "probs": {"x": 0.5, "y": 0.4}}]})";
  EXPECT_THROW(TableBackend::load(path), ConfigError);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(TableBackend::load(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(TableBackend::load(path), ConfigError);
}

TEST(BigramBackend, CountsWithoutSmoothing) {
  auto bigram = fit_bigram({"a", "b", "a", "b", "a"}, 0.0);
  auto after_a = bigram.next_token_logprobs("a");
  ASSERT_EQ(after_a.size(), 1u);
  // count(a, b) = 2, count(a) = 2
  EXPECT_NEAR(std::exp(*after_a.logprob(" b")), 1.0, 1e-9);
  auto four = fit_bigram({"a", "b", "a", "b"}, 0.0);
  EXPECT_NEAR(std::exp(*four.distribution_after("a").logprob(" b")), 1.0, 1e-9);
}

TEST(BigramBackend, SmoothingOnUnseenContextIsUniform) {
  auto bigram = fit_bigram({"a", "b", "a"}, 1.0);
  auto d = bigram.distribution_after("zzz");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(*d.logprob(" a"), std::log(0.5), 1e-12);
  EXPECT_NEAR(*d.logprob(" b"), std::log(0.5), 1e-12);
}

TEST(BigramBackend, SmoothedCountsMatchFormula) {
  // after "a": counts b=2, a=0, c=0; count(a)=2; V=3; s=0.5
  auto bigram = fit_bigram({"a", "b", "a", "b", "c"}, 0.5);
  auto d = bigram.distribution_after("a");
  EXPECT_NEAR(std::exp(*d.logprob(" b")), 2.5 / 3.5, 1e-12);
  EXPECT_NEAR(std::exp(*d.logprob(" a")), 0.5 / 3.5, 1e-12);
  EXPECT_NEAR(std::exp(*d.logprob(" c")), 0.5 / 3.5, 1e-12);
}

TEST(BigramBackend, UnseenContextWithoutSmoothingFallsBackToUnigram) {
  auto bigram = fit_bigram({"a", "b", "a", "c"}, 0.0);
  auto d = bigram.distribution_after("c");  // corpus-final token has no successor
  EXPECT_NEAR(std::exp(*d.logprob(" a")), 0.5, 1e-12);
  EXPECT_NEAR(std::exp(*d.logprob(" b")), 0.25, 1e-12);
}

TEST(BigramBackend, DistributionsAreNormalized) {
  auto bigram = fit_bigram({"the", "cat", "sat", "on", "the", "mat", "the", "cat"}, 0.3);
  for (const char* prev : {"the", "cat", "mat", "unknown"}) {
    double mass = 0.0;
    for (const auto& e : bigram.distribution_after(prev).entries()) mass += std::exp(e.logprob);
    EXPECT_NEAR(mass, 1.0, 1e-9) << prev;
  }
}

TEST(BigramBackend, ReadsLastWordOfContext) {
  auto bigram = fit_bigram({"a", "b", "\n", "b", "a"}, 0.0);
  EXPECT_EQ(bigram.next_token_logprobs("x y a"), bigram.distribution_after("a"));
  EXPECT_EQ(bigram.next_token_logprobs("x y a  "), bigram.distribution_after("a"));
  EXPECT_EQ(bigram.next_token_logprobs("x b\n"), bigram.distribution_after("\n"));
}

TEST(BigramBackend, Errors) {
  EXPECT_THROW(fit_bigram({}, 0.0), ParameterError);
  EXPECT_THROW(fit_bigram({"a"}, 0.0), ParameterError);
  EXPECT_THROW(fit_bigram({"a", "b"}, -1.0), ParameterError);
}

TEST(BigramBackend, LoadsCorpusWithLineBreaks) {
  const auto path = std::filesystem::temp_directory_path() / "ced_corpus_test.txt";
  std::ofstream(path) << "red ball\nblue ball\n";
  auto bigram = load_bigram(path, 0.0);
  auto d = bigram.distribution_after("ball");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d.contains("\n"));
  std::filesystem::remove(path);
}

TEST(ReplayBackend, ServesRecordedContextsOnly) {
  ReplayBackend replay({{"ctx", uniform_xy()}});
  EXPECT_EQ(replay.next_token_logprobs("ctx"), uniform_xy());
  try {
    replay.next_token_logprobs("other");
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.context_hash(), context_hash("other"));
  }
}

TEST(BackendDescriptor, ParsesKinds) {
  auto t = BackendDescriptor::parse("table:/tmp/t.json");
  EXPECT_EQ(t.kind, BackendKind::kTable);
  EXPECT_EQ(t.location, "/tmp/t.json");
  EXPECT_EQ(BackendDescriptor::parse("bigram:c.txt").kind, BackendKind::kBigram);
  auto r = BackendDescriptor::parse("remote:http://localhost:8000");
  EXPECT_EQ(r.kind, BackendKind::kRemote);
  EXPECT_EQ(r.location, "http://localhost:8000");
  EXPECT_EQ(r.to_string(), "remote:http://localhost:8000");
  EXPECT_THROW(BackendDescriptor::parse("table"), ConfigError);
  EXPECT_THROW(BackendDescriptor::parse("gpu:x"), ConfigError);
}

TEST(MakeBackend, ValidatesDescriptors) {
  auto missing = BackendDescriptor::parse("table:/nonexistent/table.json");
  EXPECT_THROW(make_backend(missing), ConfigError);
  auto remote = BackendDescriptor::parse("remote:http://127.0.0.1:9");
  remote.top_k = 1;
  EXPECT_THROW(make_backend(remote), ConfigError);
  auto https = BackendDescriptor::parse("remote:https://example.com");
  EXPECT_THROW(make_backend(https), ConfigError);
}

TEST(MakeBackend, EnvironmentOverridesRemoteEndpoint) {
  ::setenv("CED_BACKEND_URL", "http://127.0.0.1:4321", 1);
  auto remote = BackendDescriptor::parse("remote:http://127.0.0.1:9");
  auto backend = make_backend(remote);
  ::unsetenv("CED_BACKEND_URL");
  EXPECT_EQ(remote.location, "http://127.0.0.1:4321");
  auto* client = dynamic_cast<const RemoteBackend*>(backend.get());
  ASSERT_NE(client, nullptr);
  EXPECT_EQ(client->options().endpoint, "http://127.0.0.1:4321");
}

TEST(ContextHash, IsStableFnv1a) {
  EXPECT_EQ(context_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(context_hash("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hash_hex(0xabcULL), "0000000000000abc");
}

}  // namespace
}  // namespace ced
