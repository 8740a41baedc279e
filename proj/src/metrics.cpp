// SPDX-License-Identifier: Apache-2.0

#include "ced/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "ced/error.hpp"

namespace ced {

std::string normalize_answer(std::string_view s) {
  std::istringstream words{std::string(s)};
  std::string word;
  std::string out;
  while (words >> word) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  while (!out.empty() && std::string_view(".,!?").find(out.back()) != std::string_view::npos) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (out.starts_with(article)) {
      out.erase(0, article.size());
      break;
    }
  }
  return out;
}

int exact_match(std::string_view pred, const std::vector<std::string>& answers) {
  const auto p = normalize_answer(pred);
  if (p.empty()) return 0;
  return std::any_of(answers.begin(), answers.end(),
                     [&](const std::string& a) { return normalize_answer(a) == p; })
             ? 1
             : 0;
}

double vqa_soft_accuracy(std::string_view pred, const std::vector<std::string>& answers) {
  const auto p = normalize_answer(pred);
  if (p.empty()) return 0.0;
  const auto matches = std::count_if(answers.begin(), answers.end(),
                                     [&](const std::string& a) { return normalize_answer(a) == p; });
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

std::string_view to_string(MetricKind m) noexcept {
  switch (m) {
    case MetricKind::kExactMatch:
      return "exact_match";
    case MetricKind::kSoft:
      return "vqa_soft";
    case MetricKind::kAuto:
      break;
  }
  return "auto";
}

MetricKind parse_metric(std::string_view text) {
  if (text == "auto") return MetricKind::kAuto;
  if (text == "exact_match") return MetricKind::kExactMatch;
  if (text == "vqa_soft") return MetricKind::kSoft;
  throw ConfigError("unknown metric '" + std::string(text) + "' (expected auto, exact_match or vqa_soft)");
}

double score_answer(MetricKind metric, std::string_view pred, const std::vector<std::string>& answers) {
  const bool soft = metric == MetricKind::kSoft || (metric == MetricKind::kAuto && answers.size() >= 4);
  return soft ? vqa_soft_accuracy(pred, answers) : static_cast<double>(exact_match(pred, answers));
}

}  // namespace ced
