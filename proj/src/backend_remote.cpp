// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ced/backend.hpp"
#include "ced/error.hpp"

namespace ced {
namespace {

constexpr std::string_view kLogProbPath = "/v1/next_token_logprobs";
constexpr std::string_view kHealthPath = "/v1/health";
// Servers computing log-softmax in reduced precision can report the top token
// at a hair above zero.
constexpr double kPositiveSlack = 1e-6;

}  // namespace

std::string make_logprob_request(std::string_view context, std::size_t top_k) {
  nlohmann::json body = {{"context", std::string(context)}, {"top_k", top_k}};
  return body.dump();
}

LogProbResponse parse_logprob_response(std::string_view body, std::size_t top_k,
                                       std::uint64_t hash) {
  auto fail = [&](const std::string& why) -> BackendError {
    return BackendError("malformed logprob response: " + why, hash);
  };
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw fail("body is not a JSON object");
  if (!doc.contains("model") || !doc["model"].is_string()) throw fail("missing string \"model\"");
  if (!doc.contains("entries") || !doc["entries"].is_array()) throw fail("missing array \"entries\"");
  const auto& raw = doc["entries"];
  if (raw.empty()) throw fail("no entries");
  if (raw.size() > top_k) {
    throw fail(std::to_string(raw.size()) + " entries exceed top_k " + std::to_string(top_k));
  }
  std::vector<TokenLogProb> entries;
  entries.reserve(raw.size());
  double previous = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& e = raw[i];
    if (!e.is_object() || !e.contains("token") || !e["token"].is_string() ||
        !e.contains("logprob") || !e["logprob"].is_number()) {
      throw fail("entry " + std::to_string(i) + " needs string token and numeric logprob");
    }
    double lp = e["logprob"].get<double>();
    if (!std::isfinite(lp) || lp > kPositiveSlack) {
      throw fail("entry " + std::to_string(i) + " has logprob " + std::to_string(lp));
    }
    if (i > 0 && lp > previous) throw fail("entries are not sorted by descending logprob");
    previous = lp;
    entries.push_back({e["token"].get<std::string>(), std::min(lp, 0.0)});
  }
  auto dist = [&] {
    try {
      return LogProbDist::from_logprobs(std::move(entries), true);
    } catch (const ParameterError& e) {
      throw fail(e.what());
    }
  }();
  LogProbResponse out{doc["model"].get<std::string>(), std::move(dist), std::nullopt};
  if (doc.contains("eos") && doc["eos"].is_string()) out.eos = doc["eos"].get<std::string>();
  return out;
}

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight))) {
  if (options_.top_k < 2) throw ConfigError("remote backend top_k must be >= 2");
  std::string_view url(options_.endpoint);
  if (!url.starts_with("http://")) {
    throw ConfigError("remote endpoint must be an http:// URL, got '" + options_.endpoint + "'");
  }
  const auto path_start = url.find('/', std::string_view("http://").size());
  endpoint_.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    std::string_view prefix = url.substr(path_start);
    while (prefix.ends_with('/')) prefix.remove_suffix(1);
    endpoint_.prefix = std::string(prefix);
  }
}

std::string RemoteBackend::post(const std::string& path, const std::string& body,
                                std::uint64_t hash) const {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(endpoint_.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  {
    std::lock_guard lock(mutex_);
    ++requests_;
  }
  auto res = body.empty() ? client.Get(endpoint_.prefix + path)
                          : client.Post(endpoint_.prefix + path, body, "application/json");
  if (!res) {
    throw BackendError("request to " + endpoint_.origin + endpoint_.prefix + path +
                           " failed: " + httplib::to_string(res.error()),
                       hash);
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body,
                       hash);
  }
  return res->body;
}

LogProbDist RemoteBackend::next_token_logprobs(std::string_view context) const {
  if (context.empty()) throw ParameterError("context must not be empty");
  const std::string key(context);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const auto hash = context_hash(context);
  auto parsed = parse_logprob_response(
      post(std::string(kLogProbPath), make_logprob_request(context, options_.top_k), hash),
      options_.top_k, hash);
  std::lock_guard lock(mutex_);
  if (parsed.eos) eos_ = parsed.eos;
  model_ = parsed.model;
  return cache_.emplace(key, std::move(parsed.dist)).first->second;
}

std::optional<TokenId> RemoteBackend::eos_token() const {
  std::lock_guard lock(mutex_);
  return eos_;
}

std::string RemoteBackend::model_name() const {
  std::lock_guard lock(mutex_);
  return model_.empty() ? "remote" : model_;
}

std::size_t RemoteBackend::requests_sent() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::string RemoteBackend::health() const {
  const std::string body = post(std::string(kHealthPath), "", 0);
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.value("status", "") != "ok" ||
      !doc.contains("model") || !doc["model"].is_string()) {
    throw BackendError("unexpected health response: " + body, 0);
  }
  std::string model = doc["model"].get<std::string>();
  std::lock_guard lock(mutex_);
  model_ = model;
  return model;
}

ReplayBackend::ReplayBackend(std::unordered_map<std::string, LogProbDist> recorded,
                             std::optional<TokenId> eos)
    : recorded_(std::move(recorded)), eos_(std::move(eos)) {}

LogProbDist ReplayBackend::next_token_logprobs(std::string_view context) const {
  if (context.empty()) throw ParameterError("context must not be empty");
  auto it = recorded_.find(std::string(context));
  if (it == recorded_.end()) {
    throw BackendError("no recorded distribution for context", context_hash(context));
  }
  return it->second;
}

BackendDescriptor BackendDescriptor::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos || colon + 1 == spec.size()) {
    throw ConfigError("backend must look like table:PATH, bigram:PATH or remote:URL, got '" +
                      std::string(spec) + "'");
  }
  const auto kind = spec.substr(0, colon);
  BackendDescriptor d;
  d.location = std::string(spec.substr(colon + 1));
  if (kind == "table") {
    d.kind = BackendKind::kTable;
  } else if (kind == "bigram") {
    d.kind = BackendKind::kBigram;
  } else if (kind == "remote") {
    d.kind = BackendKind::kRemote;
  } else {
    throw ConfigError("unknown backend kind '" + std::string(kind) + "'");
  }
  return d;
}

std::string BackendDescriptor::to_string() const {
  switch (kind) {
    case BackendKind::kTable:
      return "table:" + location;
    case BackendKind::kBigram:
      return "bigram:" + location;
    case BackendKind::kRemote:
      return "remote:" + location;
  }
  return location;
}

std::shared_ptr<const Backend> make_backend(BackendDescriptor& descriptor) {
  switch (descriptor.kind) {
    case BackendKind::kTable: {
      auto table = std::make_shared<TableBackend>(TableBackend::load(descriptor.location));
      descriptor.vocab_size = table->vocab_size();
      if (descriptor.vocab_size < 2) throw ConfigError("table backend vocabulary must have >= 2 tokens");
      return table;
    }
    case BackendKind::kBigram: {
      auto bigram =
          std::make_shared<BigramBackend>(load_bigram(descriptor.location, descriptor.smoothing));
      descriptor.vocab_size = bigram->vocab_size();
      if (descriptor.vocab_size < 2) throw ConfigError("bigram vocabulary must have >= 2 tokens");
      return bigram;
    }
    case BackendKind::kRemote: {
      if (const char* env = std::getenv("CED_BACKEND_URL"); env != nullptr && *env != '\0') {
        descriptor.location = env;
      }
      RemoteOptions options;
      options.endpoint = descriptor.location;
      options.top_k = descriptor.top_k;
      options.timeout = std::chrono::duration<double>(descriptor.timeout_seconds);
      options.max_in_flight = descriptor.max_in_flight;
      return std::make_shared<RemoteBackend>(std::move(options));
    }
  }
  throw ConfigError("unsupported backend kind");
}

}  // namespace ced
