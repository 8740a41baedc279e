// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ced/backend.hpp"
#include "ced/dataset.hpp"
#include "ced/decoder.hpp"
#include "ced/fusion.hpp"
#include "ced/metrics.hpp"

namespace ced {

struct ExperimentGrid {
  std::vector<DecodeMethod> methods{DecodeMethod::kGreedy, DecodeMethod::kCed};
  std::vector<std::size_t> shots{0, 1, 3, 5};
  SelectionStrategy strategy = SelectionStrategy::kQuestionType;
  std::uint64_t seed = 0;
  DecodeParams params;
  int top_n = kDefaultTopN;
  PromptTemplate prompt_template;
  MetricKind metric = MetricKind::kAuto;
  std::size_t jobs = 1;

  nlohmann::json echo() const;
};

struct RecordOutcome {
  std::string id;
  DecodeMethod method = DecodeMethod::kGreedy;
  std::size_t shots = 0;
  std::string prediction;
  double score = 0.0;
  StopReason stop_reason = StopReason::kMaxTokens;
  std::vector<std::string> example_ids;
};

struct CellResult {
  DecodeMethod method = DecodeMethod::kGreedy;
  std::size_t shots = 0;
  double total = 0.0;
  std::size_t count = 0;

  double accuracy() const noexcept { return count == 0 ? 0.0 : total / static_cast<double>(count); }
};

struct ExperimentReport {
  nlohmann::json config;
  std::size_t records = 0;
  std::vector<CellResult> cells;        // methods x shots, grid order
  std::vector<RecordOutcome> outcomes;  // dataset order, then shots, then method

  const CellResult* cell(DecodeMethod method, std::size_t shots) const;
  double accuracy(DecodeMethod method, std::size_t shots) const;
};

/// Per record seed used for example draws; shared by every shot count so
/// random draws for smaller k are prefixes of larger ones.
std::uint64_t record_seed(std::uint64_t seed, std::string_view record_id) noexcept;

/// Evaluates every test record under every (method, shots) cell. Examples
/// come from pool records only. Throws SelectionError naming the record when
/// the pool cannot supply a shot count, and ParameterError for an empty test
/// split.
ExperimentReport run_experiment(const std::vector<EvalRecord>& dataset, const Backend& backend,
                                const ExperimentGrid& grid);

nlohmann::json report_to_json(const ExperimentReport& report);
/// Aligned accuracy table with same-shot and zero-shot deltas of ced over
/// greedy.
std::string report_to_text(const ExperimentReport& report);

}  // namespace ced
