// SPDX-License-Identifier: Apache-2.0

#include "ced/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "ced/error.hpp"

namespace ced {
namespace {

struct RecordResult {
  std::vector<RecordOutcome> outcomes;
  std::exception_ptr error;
};

RecordResult evaluate_record(const EvalRecord& record, const std::vector<ContextExample>& pool,
                             const Backend& backend, const ExperimentGrid& grid) {
  RecordResult result;
  const auto query_type = record.resolved_question_type();
  const auto seed = record_seed(grid.seed, record.id);
  for (auto k : grid.shots) {
    std::vector<ContextExample> shots;
    try {
      shots = select_examples(pool, query_type, k, grid.strategy, seed);
    } catch (const SelectionError& e) {
      throw SelectionError("record \"" + record.id + "\": " + e.what());
    }
    const auto prompts = build_prompt_pair(shots, record.features, record.question, grid.top_n,
                                           grid.prompt_template, std::max(k, kDefaultMaxShots));
    std::vector<std::string> example_ids;
    for (const auto& s : shots) example_ids.push_back(s.id);
    for (auto method : grid.methods) {
      auto trace = method == DecodeMethod::kCed
                       ? decode_ced(backend, prompts, grid.params)
                       : decode_greedy(backend, prompts.with_examples, grid.params);
      RecordOutcome o;
      o.id = record.id;
      o.method = method;
      o.shots = k;
      o.score = score_answer(grid.metric, trace.output, record.answers);
      o.prediction = trim(trace.output);
      o.stop_reason = trace.stop_reason;
      o.example_ids = example_ids;
      result.outcomes.push_back(std::move(o));
    }
  }
  return result;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string signed_fixed(double v) { return (v >= 0.0 ? "+" : "") + fixed(v); }

}  // namespace

std::uint64_t record_seed(std::uint64_t seed, std::string_view record_id) noexcept {
  // splitmix64 finalizer over the seed and id hash
  std::uint64_t z = seed ^ context_hash(record_id);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json ExperimentGrid::echo() const {
  std::vector<std::string> method_names;
  for (auto m : methods) method_names.emplace_back(to_string(m));
  return {{"methods", method_names},
          {"shots", shots},
          {"strategy", to_string(strategy)},
          {"seed", seed},
          {"alpha", params.alpha},
          {"top_n", top_n},
          {"max_new_tokens", params.max_new_tokens},
          {"stop", params.stop_sequences},
          {"floor", params.floor},
          {"metric", to_string(metric)},
          {"prompt_header", prompt_template.header()},
          {"prompt_example_block", prompt_template.example_block()}};
}

const CellResult* ExperimentReport::cell(DecodeMethod method, std::size_t shots) const {
  auto it = std::find_if(cells.begin(), cells.end(), [&](const CellResult& c) {
    return c.method == method && c.shots == shots;
  });
  return it == cells.end() ? nullptr : &*it;
}

double ExperimentReport::accuracy(DecodeMethod method, std::size_t shots) const {
  const auto* c = cell(method, shots);
  if (c == nullptr) {
    throw ParameterError("report has no cell " + std::string(to_string(method)) + "/k=" +
                         std::to_string(shots));
  }
  return c->accuracy();
}

ExperimentReport run_experiment(const std::vector<EvalRecord>& dataset, const Backend& backend,
                                const ExperimentGrid& grid) {
  grid.params.validate();
  if (grid.methods.empty() || grid.shots.empty()) {
    throw ParameterError("experiment grid needs at least one method and one shot count");
  }
  std::vector<ContextExample> pool;
  std::vector<const EvalRecord*> tests;
  for (const auto& r : dataset) {
    if (r.split == Split::kPool) {
      pool.push_back(r.as_example());
    } else {
      tests.push_back(&r);
    }
  }
  if (tests.empty()) throw ParameterError("dataset has no test records");

  std::vector<RecordResult> results(tests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tests.size(); i = next++) {
      try {
        results[i] = evaluate_record(*tests[i], pool, backend, grid);
      } catch (...) {
        results[i].error = std::current_exception();
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(grid.jobs, 1, tests.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 1; w < width; ++w) workers.emplace_back(worker);
    worker();
  }
  // First failure in dataset order, independent of scheduling.
  for (const auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }

  ExperimentReport report;
  report.config = grid.echo();
  report.records = tests.size();
  for (auto m : grid.methods) {
    for (auto k : grid.shots) report.cells.push_back({m, k, 0.0, 0});
  }
  for (auto& r : results) {
    for (auto& o : r.outcomes) {
      auto c = std::find_if(report.cells.begin(), report.cells.end(), [&](const CellResult& x) {
        return x.method == o.method && x.shots == o.shots;
      });
      c->total += o.score;
      ++c->count;
      report.outcomes.push_back(std::move(o));
    }
  }
  return report;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"method", to_string(c.method)},
                     {"shots", c.shots},
                     {"accuracy", c.accuracy()},
                     {"total", c.total},
                     {"count", c.count}});
  }
  nlohmann::json deltas = nlohmann::json::array();
  const auto* zero_greedy = report.cell(DecodeMethod::kGreedy, 0);
  for (const auto& c : report.cells) {
    if (c.method != DecodeMethod::kCed) continue;
    nlohmann::json d = {{"shots", c.shots}};
    if (const auto* g = report.cell(DecodeMethod::kGreedy, c.shots)) {
      d["vs_same_shot_greedy"] = c.accuracy() - g->accuracy();
    }
    if (zero_greedy != nullptr) d["vs_zero_shot_greedy"] = c.accuracy() - zero_greedy->accuracy();
    deltas.push_back(std::move(d));
  }
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& o : report.outcomes) {
    outcomes.push_back({{"id", o.id},
                        {"method", to_string(o.method)},
                        {"shots", o.shots},
                        {"prediction", o.prediction},
                        {"score", o.score},
                        {"stop_reason", to_string(o.stop_reason)},
                        {"examples", o.example_ids}});
  }
  return {{"config", report.config},
          {"records", report.records},
          {"cells", std::move(cells)},
          {"deltas", std::move(deltas)},
          {"outcomes", std::move(outcomes)}};
}

std::string report_to_text(const ExperimentReport& report) {
  std::vector<std::size_t> shots;
  std::vector<DecodeMethod> methods;
  for (const auto& c : report.cells) {
    if (std::find(shots.begin(), shots.end(), c.shots) == shots.end()) shots.push_back(c.shots);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"method"};
  for (auto k : shots) header.push_back("k=" + std::to_string(k));
  rows.push_back(header);
  for (auto m : methods) {
    std::vector<std::string> row{std::string(to_string(m))};
    for (auto k : shots) {
      const auto* c = report.cell(m, k);
      row.push_back(c ? fixed(c->accuracy()) : "-");
    }
    rows.push_back(std::move(row));
  }
  const auto* zero_greedy = report.cell(DecodeMethod::kGreedy, 0);
  if (std::find(methods.begin(), methods.end(), DecodeMethod::kCed) != methods.end() &&
      std::find(methods.begin(), methods.end(), DecodeMethod::kGreedy) != methods.end()) {
    std::vector<std::string> same{"ced-greedy (same k)"};
    std::vector<std::string> zero{"ced-greedy (k=0)"};
    for (auto k : shots) {
      const double ced = report.cell(DecodeMethod::kCed, k)->accuracy();
      same.push_back(signed_fixed(ced - report.cell(DecodeMethod::kGreedy, k)->accuracy()));
      zero.push_back(zero_greedy ? signed_fixed(ced - zero_greedy->accuracy()) : "-");
    }
    rows.push_back(std::move(same));
    rows.push_back(std::move(zero));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  out << "records: " << report.records << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(widths[i])) << row[i];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(widths[i])) << row[i];
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace ced
