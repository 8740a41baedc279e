// SPDX-License-Identifier: Apache-2.0

#include "ced/synthetic.hpp"

#include <array>
#include <fstream>
#include <string>

#include "ced/error.hpp"
#include "ced/fusion.hpp"

namespace ced {
namespace {

struct QuestionKind {
  const char* type;
  const char* stem;  // question text with %s for the subject
  const char* gold;
  const char* distractor;
};

constexpr std::array<QuestionKind, 5> kKinds{{
    {"what color", "What color is the %s?", "red", "blue"},
    {"how many", "How many %s are visible?", "two", "three"},
    {"what animal", "What animal is near the %s?", "dog", "cat"},
    {"what sport", "What sport is played with the %s?", "tennis", "soccer"},
    {"is there", "Is there a %s in the picture?", "yes", "no"},
}};

constexpr std::array<const char*, 8> kObjects{"kite", "bench", "umbrella", "bicycle",
                                              "lamp", "fence", "boat", "table"};
constexpr std::array<const char*, 6> kScenes{"park", "street", "beach", "kitchen", "field", "harbor"};

struct Profile {
  double plain_gold;
  double examples_gold;
};

// hard, contrast, strong, strong, easy
constexpr std::array<Profile, 5> kProfiles{{{0.30, 0.05}, {0.20, 0.45}, {0.40, 0.70},
                                            {0.40, 0.70}, {0.70, 0.80}}};

std::string format_question(const QuestionKind& kind, const std::string& subject) {
  std::string stem(kind.stem);
  return stem.replace(stem.find("%s"), 2, subject);
}

DescriptiveFeatures features_for(std::size_t index, const std::string& subject) {
  const std::string scene = kScenes[index % kScenes.size()];
  return {{subject, scene, "object " + std::to_string(index % 7)},
          {"bright " + scene, "small " + subject},
          {"a " + subject + " in the " + scene}};
}

nlohmann::json probs(const std::string& gold, const std::string& distractor, double gold_p) {
  return {{" " + gold, gold_p}, {" " + distractor, 1.0 - gold_p}};
}

}  // namespace

SyntheticFixture make_synthetic_fixture(std::size_t test_records, std::size_t pool_per_type) {
  SyntheticFixture fx;
  const PromptTemplate tmpl;
  nlohmann::json rules = nlohmann::json::array();
  rules.push_back({{"suffix", ""}, {"probs", {{"\n", 0.5}, {" yes", 0.25}, {" no", 0.25}}}});
  for (const auto& kind : kKinds) {
    for (const char* token : {kind.gold, kind.distractor}) {
      rules.push_back({{"suffix", std::string(" ") + token}, {"probs", {{"\n", 0.9}, {" " + std::string(token), 0.1}}}});
    }
  }

  for (std::size_t t = 0; t < kKinds.size(); ++t) {
    for (std::size_t j = 0; j < pool_per_type; ++j) {
      const auto& kind = kKinds[t];
      const std::string subject = std::string(kObjects[(t + j) % kObjects.size()]) + " " +
                                  std::to_string(j) + " from the pool";
      EvalRecord r;
      r.id = "pool-" + std::to_string(t) + "-" + std::to_string(j);
      r.question = format_question(kind, subject);
      r.answers = {kind.gold};
      r.question_type = kind.type;
      r.features = features_for(t * 31 + j, kObjects[(t + j) % kObjects.size()]);
      r.split = Split::kPool;
      fx.records.push_back(std::move(r));
    }
  }

  for (std::size_t i = 0; i < test_records; ++i) {
    const auto& kind = kKinds[i % kKinds.size()];
    const auto& profile = kProfiles[(i / kKinds.size()) % kProfiles.size()];
    const std::string object = kObjects[i % kObjects.size()];
    EvalRecord r;
    r.id = "test-" + std::to_string(i);
    r.question = format_question(kind, object + " number " + std::to_string(i));
    r.answers = {kind.gold};
    if (i % 2 == 0) r.question_type = kind.type;
    r.features = features_for(i, object);
    r.split = Split::kTest;

    const std::string body = render_features(r.features, kDefaultTopN) + tmpl.render_query_block(r.question);
    rules.push_back({{"suffix", tmpl.render_query_block(r.question)},
                     {"probs", probs(kind.gold, kind.distractor, profile.plain_gold)}});
    rules.push_back({{"suffix", "Answer: " + std::string(kind.gold) + "\n\n" + body},
                     {"probs", probs(kind.gold, kind.distractor, profile.examples_gold)}});
    fx.records.push_back(std::move(r));
  }
  fx.table = {{"model", "synthetic-table"}, {"rules", std::move(rules)}};
  return fx;
}

TableBackend synthetic_backend(const SyntheticFixture& fixture) {
  std::vector<TableRule> rules;
  for (const auto& r : fixture.table.at("rules")) {
    std::vector<std::pair<TokenId, double>> p;
    for (const auto& [token, prob] : r.at("probs").items()) p.emplace_back(token, prob.get<double>());
    rules.push_back({r.at("suffix").get<std::string>(), LogProbDist::from_probs(p)});
  }
  return TableBackend(std::move(rules), std::nullopt, fixture.table.value("model", "table"));
}

void write_synthetic_fixture(const SyntheticFixture& fixture, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream dataset(dir / "dataset.jsonl", std::ios::binary);
  for (const auto& r : fixture.records) dataset << record_to_jsonl(r) << '\n';
  std::ofstream table(dir / "table.json", std::ios::binary);
  table << fixture.table.dump(1) << '\n';
  if (!dataset || !table) throw ConfigError("cannot write synthetic fixture to " + dir.string());
}

}  // namespace ced
