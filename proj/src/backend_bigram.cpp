// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ced/backend.hpp"
#include "ced/error.hpp"

namespace ced {

std::string BigramBackend::surface(std::string_view corpus_token) {
  if (corpus_token == kLineBreak) return std::string(kLineBreak);
  return " " + std::string(corpus_token);
}

BigramBackend fit_bigram(const std::vector<std::string>& corpus, double smoothing) {
  if (corpus.size() < 2) throw ParameterError("bigram corpus needs at least two tokens");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) {
    throw ParameterError("smoothing must be a finite value >= 0");
  }
  BigramBackend model;
  model.smoothing_ = smoothing;
  std::set<std::string> vocab(corpus.begin(), corpus.end());
  model.vocab_.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ++model.unigram_[corpus[i]];
    if (i + 1 < corpus.size()) {
      ++model.successors_[corpus[i]][corpus[i + 1]];
      ++model.context_counts_[corpus[i]];
    }
  }
  model.total_ = corpus.size();
  return model;
}

BigramBackend load_bigram(const std::filesystem::path& path, double smoothing) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bigram corpus " + path.string());
  std::vector<std::string> corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::string word;
    bool any = false;
    while (words >> word) {
      corpus.push_back(word);
      any = true;
    }
    if (any) corpus.emplace_back(BigramBackend::kLineBreak);
  }
  return fit_bigram(corpus, smoothing);
}

LogProbDist BigramBackend::distribution_after(std::string_view previous) const {
  const std::string prev(previous);
  const auto seen = context_counts_.find(prev);
  const double denom_count = seen == context_counts_.end() ? 0.0 : static_cast<double>(seen->second);
  std::vector<TokenLogProb> entries;

  if (smoothing_ > 0.0) {
    const double denom = denom_count + smoothing_ * static_cast<double>(vocab_.size());
    const auto succ = successors_.find(prev);
    entries.reserve(vocab_.size());
    for (const auto& token : vocab_) {
      double count = 0.0;
      if (succ != successors_.end()) {
        if (auto it = succ->second.find(token); it != succ->second.end()) count = it->second;
      }
      entries.push_back({surface(token), std::log((count + smoothing_) / denom)});
    }
  } else if (denom_count > 0.0) {
    for (const auto& [token, count] : successors_.at(prev)) {
      entries.push_back({surface(token), std::log(count / denom_count)});
    }
  } else {
    for (const auto& [token, count] : unigram_) {
      entries.push_back({surface(token), std::log(static_cast<double>(count) / total_)});
    }
  }
  for (auto& e : entries) e.logprob = std::min(0.0, e.logprob);
  return LogProbDist::from_logprobs(std::move(entries), false);
}

LogProbDist BigramBackend::next_token_logprobs(std::string_view context) const {
  if (context.empty()) throw ParameterError("context must not be empty");
  if (context.back() == '\n') return distribution_after(kLineBreak);
  std::size_t end = context.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(context[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > 0 && !std::isspace(static_cast<unsigned char>(context[begin - 1]))) --begin;
  return distribution_after(context.substr(begin, end - begin));
}

}  // namespace ced
