// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ced/backend.hpp"
#include "ced/dataset.hpp"

namespace ced {

/// Bundled toy benchmark. Every test record gets a plain-context rule keyed on
/// its question and an example-context rule keyed on "Answer: <gold>\n\n" plus
/// its body, so only shots labeled with the record's type answer shift mass.
/// Records cycle through five profiles per question type:
///   hard      plain (d .70, g .30)  examples (d .95, g .05)  nobody recovers g
///   contrast  plain (d .80, g .20)  examples (d .55, g .45)  only ced recovers g
///   strong    plain (d .60, g .40)  examples (g .70, d .30)  x2, any method with shots
///   easy      plain (g .70, d .30)  examples (g .80, d .20)  always right
/// where g is the gold token and d the type's distractor. Rules are rendered
/// with the default prompt template and hold for any top-n >= 3.
struct SyntheticFixture {
  std::vector<EvalRecord> records;
  nlohmann::json table;  // TableBackend::load format
};

SyntheticFixture make_synthetic_fixture(std::size_t test_records = 200,
                                        std::size_t pool_per_type = 6);

TableBackend synthetic_backend(const SyntheticFixture& fixture);

/// Writes dataset.jsonl and table.json into `dir`.
void write_synthetic_fixture(const SyntheticFixture& fixture, const std::filesystem::path& dir);

}  // namespace ced
