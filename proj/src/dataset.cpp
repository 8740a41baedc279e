// SPDX-License-Identifier: Apache-2.0

#include "ced/dataset.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ced/error.hpp"

namespace ced {
namespace {

using nlohmann::json;

std::string required_text(const json& doc, const char* key, std::size_t line) {
  if (!doc.contains(key)) throw DatasetError(std::string("missing required field \"") + key + "\"", line);
  const auto& v = doc[key];
  if (!v.is_string()) throw DatasetError(std::string("field \"") + key + "\" must be a string", line);
  auto s = v.get<std::string>();
  if (trim(s).empty()) throw DatasetError(std::string("field \"") + key + "\" is empty", line);
  return s;
}

std::vector<std::string> text_list(const json& v, const std::string& where, std::size_t line) {
  if (!v.is_array()) throw DatasetError("field \"" + where + "\" must be an array of strings", line);
  std::vector<std::string> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      throw DatasetError("field \"" + where + "\"[" + std::to_string(i) + "] must be a string", line);
    }
    auto s = v[i].get<std::string>();
    if (trim(s).empty()) {
      throw DatasetError("field \"" + where + "\"[" + std::to_string(i) + "] is empty", line);
    }
    out.push_back(std::move(s));
  }
  return out;
}

DescriptiveFeatures parse_features(const json& doc, std::size_t line) {
  if (!doc.contains("features")) throw DatasetError("missing required field \"features\"", line);
  const auto& f = doc["features"];
  if (!f.is_object()) throw DatasetError("field \"features\" must be an object", line);
  DescriptiveFeatures out;
  for (const char* key : {"tags", "attributes", "captions"}) {
    if (!f.contains(key)) {
      throw DatasetError(std::string("missing required field \"features.") + key + "\"", line);
    }
  }
  out.tags = text_list(f["tags"], "features.tags", line);
  out.attributes = text_list(f["attributes"], "features.attributes", line);
  out.captions = text_list(f["captions"], "features.captions", line);
  if (out.captions.empty()) throw DatasetError("field \"features.captions\" is empty", line);
  if (out.tags.empty() && out.attributes.empty()) {
    throw DatasetError("at most one of \"features.tags\" and \"features.attributes\" may be empty",
                       line);
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string(), 0);
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (trim(text).empty()) continue;
    fn(text, line);
  }
}

}  // namespace

std::string EvalRecord::resolved_question_type() const {
  return ced::question_type(question, question_type);
}

ContextExample EvalRecord::as_example() const {
  return {id, features, question, answers.front(), resolved_question_type()};
}

EvalRecord parse_record(std::string_view text, std::size_t line) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw DatasetError("invalid JSON", line);
  if (!doc.is_object()) throw DatasetError("record must be a JSON object", line);

  EvalRecord r;
  r.id = required_text(doc, "id", line);
  r.question = required_text(doc, "question", line);
  if (!doc.contains("answers")) throw DatasetError("missing required field \"answers\"", line);
  r.answers = text_list(doc["answers"], "answers", line);
  if (r.answers.empty()) throw DatasetError("field \"answers\" must not be empty", line);
  if (doc.contains("question_type") && !doc["question_type"].is_null()) {
    if (!doc["question_type"].is_string()) {
      throw DatasetError("field \"question_type\" must be a string", line);
    }
    r.question_type = doc["question_type"].get<std::string>();
  }
  const auto split = required_text(doc, "split", line);
  if (split == "pool") {
    r.split = Split::kPool;
  } else if (split == "test") {
    r.split = Split::kTest;
  } else {
    throw DatasetError("field \"split\" must be \"pool\" or \"test\", got \"" + split + "\"", line);
  }
  r.features = parse_features(doc, line);
  return r;
}

std::vector<Diagnostic> validate_dataset(const std::filesystem::path& path) {
  std::vector<Diagnostic> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t records = 0;
  try {
    for_each_line(path, [&](const std::string& text, std::size_t line) {
      ++records;
      try {
        auto r = parse_record(text, line);
        auto [it, inserted] = seen.emplace(r.id, line);
        if (!inserted) {
          out.push_back({line, "duplicate id \"" + r.id + "\" (first seen on line " +
                                   std::to_string(it->second) + ")"});
        }
      } catch (const DatasetError& e) {
        out.push_back({line, e.detail()});
      }
    });
  } catch (const DatasetError& e) {
    return {{0, e.detail()}};
  }
  if (records == 0) out.push_back({0, "no records"});
  return out;
}

std::vector<EvalRecord> load_dataset(const std::filesystem::path& path) {
  std::vector<EvalRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_line(path, [&](const std::string& text, std::size_t line) {
    auto r = parse_record(text, line);
    if (auto [it, inserted] = seen.emplace(r.id, line); !inserted) {
      throw DatasetError("duplicate id \"" + r.id + "\" (first seen on line " +
                             std::to_string(it->second) + ")",
                         line);
    }
    records.push_back(std::move(r));
  });
  if (records.empty()) throw DatasetError("no records in " + path.string(), 0);
  return records;
}

std::string record_to_jsonl(const EvalRecord& r) {
  json doc = json::object();
  doc["id"] = r.id;
  doc["question"] = r.question;
  doc["answers"] = r.answers;
  if (r.question_type) doc["question_type"] = *r.question_type;
  doc["split"] = r.split == Split::kPool ? "pool" : "test";
  doc["features"] = {{"tags", r.features.tags},
                     {"attributes", r.features.attributes},
                     {"captions", r.features.captions}};
  return doc.dump();
}

}  // namespace ced
