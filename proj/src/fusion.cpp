// SPDX-License-Identifier: Apache-2.0

#include "ced/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "ced/error.hpp"

namespace ced {
namespace {

constexpr std::string_view kQuestionSlot = "{q}";
constexpr std::string_view kAnswerSlot = "{a}";

bool is_blank(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Single left-to-right pass, so slot markers inside values stay literal.
std::string substitute(std::string_view text, std::string_view question,
                       std::optional<std::string_view> answer) {
  std::string out;
  out.reserve(text.size() + question.size() + (answer ? answer->size() : 0));
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.substr(i).starts_with(kQuestionSlot)) {
      out += question;
      i += kQuestionSlot.size();
    } else if (answer && text.substr(i).starts_with(kAnswerSlot)) {
      out += *answer;
      i += kAnswerSlot.size();
    } else {
      out += text[i++];
    }
  }
  return out;
}

void append_line(std::string& out, std::string_view label, const std::vector<std::string>& items,
                 std::size_t n) {
  if (items.empty()) return;
  out += label;
  out += ": ";
  const std::size_t count = std::min(n, items.size());
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) out += ", ";
    out += items[i];
  }
  out += '\n';
}

void check_top_n(int n) {
  if (n < 1) throw ParameterError("top-n must be >= 1, got " + std::to_string(n));
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_blank(s[b])) ++b;
  while (e > b && is_blank(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

PromptTemplate::PromptTemplate(std::string header, std::string example_block)
    : header_(std::move(header)), example_block_(std::move(example_block)) {
  const auto q = example_block_.find(kQuestionSlot);
  const auto a = example_block_.find(kAnswerSlot);
  if (q == std::string::npos || a == std::string::npos) {
    throw ConfigError("prompt template must contain both {q} and {a}");
  }
  if (a < q) throw ConfigError("prompt template must place {q} before {a}");
  if (example_block_.find(kAnswerSlot, a + 1) != std::string::npos) {
    throw ConfigError("prompt template must contain {a} exactly once");
  }
  std::string_view query(example_block_);
  query = query.substr(0, a);
  while (!query.empty() && (query.back() == ' ' || query.back() == '\t')) query.remove_suffix(1);
  query_block_ = std::string(query);
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  constexpr std::string_view kSeparator = "---\n";
  std::size_t sep = std::string_view::npos;
  if (text.starts_with(kSeparator)) {
    sep = 0;
  } else if (auto pos = text.find("\n---\n"); pos != std::string_view::npos) {
    sep = pos + 1;
  }
  if (sep == std::string_view::npos) {
    return PromptTemplate(std::string(kDefaultHeader), std::string(text));
  }
  return PromptTemplate(std::string(text.substr(0, sep)),
                        std::string(text.substr(sep + kSeparator.size())));
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string PromptTemplate::render_example_block(std::string_view question,
                                                 std::string_view answer) const {
  return substitute(example_block_, question, answer);
}

std::string PromptTemplate::render_query_block(std::string_view question) const {
  return substitute(query_block_, question, std::nullopt);
}

std::string render_features(const DescriptiveFeatures& features, int n) {
  check_top_n(n);
  if (features.tags.empty() && features.attributes.empty() && features.captions.empty()) {
    throw FeatureError("descriptive features are empty");
  }
  const auto count = static_cast<std::size_t>(n);
  std::string out;
  append_line(out, "Tags", features.tags, count);
  append_line(out, "Attributes", features.attributes, count);
  append_line(out, "Captions", features.captions, count);
  return out;
}

std::string render_example(const ContextExample& example, int n, const PromptTemplate& tmpl) {
  return render_features(example.features, n) +
         tmpl.render_example_block(example.question, trim(example.answer));
}

PromptPair build_prompt_pair(const std::vector<ContextExample>& examples,
                             const DescriptiveFeatures& features, std::string_view question,
                             int n, const PromptTemplate& tmpl, std::size_t max_shots) {
  if (examples.size() > max_shots) {
    throw ParameterError("too many context examples: " + std::to_string(examples.size()) +
                         " > " + std::to_string(max_shots));
  }
  const std::string body = render_features(features, n) + tmpl.render_query_block(question);
  std::string shots;
  for (const auto& e : examples) shots += render_example(e, n, tmpl);

  PromptPair pair;
  pair.header_size = tmpl.header().size();
  pair.plain = tmpl.header() + body;
  pair.with_examples = tmpl.header() + shots + body;
  return pair;
}

std::string_view to_string(SelectionStrategy s) noexcept {
  return s == SelectionStrategy::kRandom ? "random" : "question_type";
}

SelectionStrategy parse_strategy(std::string_view text) {
  if (text == "question_type") return SelectionStrategy::kQuestionType;
  if (text == "random") return SelectionStrategy::kRandom;
  throw ConfigError("unknown selection strategy '" + std::string(text) +
                    "' (expected question_type or random)");
}

std::vector<ContextExample> select_examples(const std::vector<ContextExample>& pool,
                                            std::string_view query_type, std::size_t k,
                                            SelectionStrategy strategy, std::uint64_t seed) {
  if (k == 0) return {};
  if (k > pool.size()) {
    throw SelectionError("requested " + std::to_string(k) + " examples from a pool of " +
                         std::to_string(pool.size()));
  }
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (strategy == SelectionStrategy::kQuestionType && chosen.size() < k &&
        pool[i].question_type == query_type) {
      chosen.push_back(i);
    } else {
      rest.push_back(i);
    }
  }
  // Partial Fisher-Yates over the leftovers for random picks and shortfalls.
  std::mt19937_64 rng(seed);
  for (std::size_t slot = 0; chosen.size() < k; ++slot) {
    std::uniform_int_distribution<std::size_t> pick(slot, rest.size() - 1);
    std::swap(rest[slot], rest[pick(rng)]);
    chosen.push_back(rest[slot]);
  }
  std::vector<ContextExample> out;
  out.reserve(k);
  for (auto i : chosen) out.push_back(pool[i]);
  return out;
}

std::string question_type(std::string_view question, const std::optional<std::string>& explicit_type) {
  if (explicit_type && !trim(*explicit_type).empty()) return *explicit_type;
  std::istringstream words{std::string(question)};
  std::string word;
  std::string key;
  int taken = 0;
  while (taken < 2 && words >> word) {
    auto first = std::find_if(word.begin(), word.end(),
                              [](unsigned char c) { return std::isalnum(c) != 0; });
    auto last = std::find_if(word.rbegin(), word.rend(),
                             [](unsigned char c) { return std::isalnum(c) != 0; }).base();
    if (first >= last) continue;
    std::string clean(first, last);
    std::transform(clean.begin(), clean.end(), clean.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!key.empty()) key += ' ';
    key += clean;
    ++taken;
  }
  return key;
}

}  // namespace ced
