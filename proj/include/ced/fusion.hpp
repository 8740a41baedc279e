// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ced {

inline constexpr int kDefaultTopN = 5;
inline constexpr std::size_t kDefaultMaxShots = 8;

/// Text stand-in for one image or video: ranked tags, attributes, captions.
struct DescriptiveFeatures {
  std::vector<std::string> tags;
  std::vector<std::string> attributes;
  std::vector<std::string> captions;

  friend bool operator==(const DescriptiveFeatures&, const DescriptiveFeatures&) = default;
};

/// One labeled in-context shot.
struct ContextExample {
  std::string id;
  DescriptiveFeatures features;
  std::string question;
  std::string answer;
  std::string question_type;

  friend bool operator==(const ContextExample&, const ContextExample&) = default;
};

/// Byte layout of the prompts. `example_block` must contain "{q}" followed by
/// "{a}"; the query block is everything before "{a}" with trailing blanks
/// removed ("Question: {q}\nAnswer:" for the default).
class PromptTemplate {
 public:
  static constexpr std::string_view kDefaultHeader =
      "Answer the question using the visual description.\n\n";
  static constexpr std::string_view kDefaultExampleBlock = "Question: {q}\nAnswer: {a}\n\n";

  PromptTemplate() : PromptTemplate(std::string(kDefaultHeader), std::string(kDefaultExampleBlock)) {}
  PromptTemplate(std::string header, std::string example_block);

  /// Reads a template file. The file body is the example block; an optional
  /// header precedes a line consisting solely of "---".
  static PromptTemplate load(const std::filesystem::path& path);
  static PromptTemplate parse(std::string_view text);

  const std::string& header() const noexcept { return header_; }
  const std::string& example_block() const noexcept { return example_block_; }

  std::string render_example_block(std::string_view question, std::string_view answer) const;
  std::string render_query_block(std::string_view question) const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  std::string header_;
  std::string example_block_;
  std::string query_block_;
};

/// The two conditioning contexts of one query. with_examples is
/// header + example block + body and plain is header + body.
struct PromptPair {
  std::string plain;
  std::string with_examples;
  std::size_t header_size = 0;

  std::string_view body() const noexcept {
    return std::string_view(plain).substr(header_size);
  }
  std::string_view example_block() const noexcept {
    return std::string_view(with_examples)
        .substr(header_size, with_examples.size() - plain.size());
  }
};

/// "Tags: ...\nAttributes: ...\nCaptions: ...\n" from the first n items of
/// each list; empty lists drop their line. Throws FeatureError when all three
/// lists are empty, ParameterError for n < 1.
std::string render_features(const DescriptiveFeatures& features, int n);

/// Feature block followed by the template's question/answer block. The answer
/// is trimmed first.
std::string render_example(const ContextExample& example, int n,
                           const PromptTemplate& tmpl = PromptTemplate());

PromptPair build_prompt_pair(const std::vector<ContextExample>& examples,
                             const DescriptiveFeatures& features, std::string_view question,
                             int n, const PromptTemplate& tmpl = PromptTemplate(),
                             std::size_t max_shots = kDefaultMaxShots);

enum class SelectionStrategy { kQuestionType, kRandom };

std::string_view to_string(SelectionStrategy s) noexcept;
SelectionStrategy parse_strategy(std::string_view text);

/// Picks k shots from the pool. kQuestionType takes the first k entries of the
/// query's type in pool order and fills any shortfall by a seeded draw from the
/// remaining entries; kRandom draws k entries uniformly without replacement.
/// Throws SelectionError when k exceeds the pool.
std::vector<ContextExample> select_examples(const std::vector<ContextExample>& pool,
                                            std::string_view query_type, std::size_t k,
                                            SelectionStrategy strategy, std::uint64_t seed);

/// The dataset-provided type when present, else the lowercased first two
/// words of the question with edge punctuation removed.
std::string question_type(std::string_view question,
                          const std::optional<std::string>& explicit_type = std::nullopt);

std::string trim(std::string_view s);

}  // namespace ced
