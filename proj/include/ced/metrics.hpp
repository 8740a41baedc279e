// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ced {

/// Lowercase, trim, collapse whitespace, drop trailing . , ! ? and one
/// leading article (a, an, the).
std::string normalize_answer(std::string_view s);

/// 1 when the normalized prediction equals any normalized gold answer.
int exact_match(std::string_view pred, const std::vector<std::string>& answers);

/// min(#matching annotators / 3, 1).
double vqa_soft_accuracy(std::string_view pred, const std::vector<std::string>& answers);

enum class MetricKind { kAuto, kExactMatch, kSoft };

std::string_view to_string(MetricKind m) noexcept;
MetricKind parse_metric(std::string_view text);

/// kAuto picks soft accuracy for records with at least four gold answers.
double score_answer(MetricKind metric, std::string_view pred,
                    const std::vector<std::string>& answers);

}  // namespace ced
