// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ced/fusion.hpp"

namespace ced {

enum class Split { kPool, kTest };

/// One QA instance. Visual inputs appear only as precomputed features.
struct EvalRecord {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::string> question_type;
  DescriptiveFeatures features;
  Split split = Split::kTest;

  /// Dataset-provided type or the question heuristic.
  std::string resolved_question_type() const;
  /// Pool records as in-context shots; the first gold answer is the label.
  ContextExample as_example() const;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
};

/// Parses one JSONL line. Throws DatasetError tagged with `line`.
EvalRecord parse_record(std::string_view text, std::size_t line);

/// Every problem in the file, one diagnostic per offending line, including
/// duplicate ids. Blank lines are skipped. An empty or unreadable file yields a
/// single diagnostic with line 0.
std::vector<Diagnostic> validate_dataset(const std::filesystem::path& path);

/// All records in file order. Throws DatasetError at the first problem.
std::vector<EvalRecord> load_dataset(const std::filesystem::path& path);

/// Inverse of parse_record (canonical key order, single line, no newline).
std::string record_to_jsonl(const EvalRecord& record);

}  // namespace ced
