// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ced/backend.hpp"
#include "ced/error.hpp"

namespace ced {

TableBackend::TableBackend(std::vector<TableRule> rules, std::optional<TokenId> eos,
                           std::string model)
    : rules_(std::move(rules)), eos_(std::move(eos)), model_(std::move(model)) {
  bool has_default = false;
  std::set<TokenId> vocab;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    has_default = has_default || rule.suffix.empty();
    auto [it, inserted] = index_[rule.suffix.size()].emplace(rule.suffix, i);
    if (!inserted) {
      throw ConfigError("ambiguous table rules: suffix \"" + rule.suffix + "\" appears twice");
    }
    for (const auto& e : rule.dist.entries()) vocab.insert(e.token);
  }
  if (!has_default) throw ConfigError("table backend needs a default rule with an empty suffix");
  vocab_size_ = vocab.size();
}

const TableRule& TableBackend::match(std::string_view context) const {
  for (const auto& [length, by_suffix] : index_) {
    if (length > context.size()) continue;
    auto it = by_suffix.find(std::string(context.substr(context.size() - length)));
    if (it != by_suffix.end()) return rules_[it->second];
  }
  // unreachable: the empty suffix always matches
  return rules_.front();
}

LogProbDist TableBackend::next_token_logprobs(std::string_view context) const {
  if (context.empty()) throw ParameterError("context must not be empty");
  return match(context).dist;
}

TableBackend build_toy_table(std::vector<TableRule> rules, std::optional<TokenId> eos) {
  return TableBackend(std::move(rules), std::move(eos));
}

TableBackend TableBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table backend file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("table backend file " + path.string() + ": " + e.what());
  }
  try {
    std::vector<TableRule> rules;
    for (const auto& r : doc.at("rules")) {
      std::string suffix = r.at("suffix").get<std::string>();
      std::vector<TokenLogProb> entries;
      if (r.contains("probs")) {
        std::vector<std::pair<TokenId, double>> probs;
        for (const auto& [token, p] : r.at("probs").items()) probs.emplace_back(token, p.get<double>());
        rules.push_back({std::move(suffix), LogProbDist::from_probs(probs)});
      } else {
        for (const auto& [token, lp] : r.at("logprobs").items()) {
          entries.push_back({token, lp.get<double>()});
        }
        rules.push_back({std::move(suffix), LogProbDist::from_logprobs(std::move(entries), false)});
      }
    }
    std::optional<TokenId> eos;
    if (doc.contains("eos") && !doc["eos"].is_null()) eos = doc["eos"].get<std::string>();
    return TableBackend(std::move(rules), std::move(eos), doc.value("model", std::string("table")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("table backend file " + path.string() + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError("table backend file " + path.string() + ": " + e.what());
  }
}

}  // namespace ced
