// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "ced/backend.hpp"
#include "ced/error.hpp"

namespace ced {
namespace {

const std::filesystem::path kProtocolDir = std::filesystem::path(CED_TEST_DATA_DIR) / "protocol";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// In-process stand-in for the logprob server. Answers every context with a
// fixed distribution truncated to the requested top_k.
class FakeServer {
 public:
  FakeServer() {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok","model":"fake"})", "application/json");
    });
    server_.Post("/v1/next_token_logprobs", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++active_;
      int seen = max_active_.load();
      while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
      }
      ++hits_;
      if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      --active_;
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("context") || !body.contains("top_k")) {
        res.status = 400;
        res.set_content(R"({"error":"bad request"})", "application/json");
        return;
      }
      last_context_ = body["context"].get<std::string>();
      if (status_ != 200) {
        res.status = status_;
        res.set_content(R"({"error":"boom"})", "application/json");
        return;
      }
      if (!raw_body_.empty()) {
        res.set_content(raw_body_, "application/json");
        return;
      }
      const auto top_k = body["top_k"].get<std::size_t>();
      nlohmann::json entries = nlohmann::json::array();
      const std::vector<std::pair<std::string, double>> full{
          {" dog", -0.5}, {" cat", -1.5}, {" cow", -2.5}, {"\n", -3.0}, {" pig", -4.0}, {" hen", -5.0}};
      for (std::size_t i = 0; i < std::min(top_k, full.size()); ++i) {
        entries.push_back({{"token", full[i].first}, {"logprob", full[i].second}});
      }
      res.set_content(nlohmann::json{{"model", "fake"}, {"entries", entries}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::atomic<int> active_{0};
  std::atomic<int> max_active_{0};
  int delay_ms_ = 0;
  int status_ = 200;
  std::string raw_body_;
  std::string last_context_;
};

RemoteBackend client(const FakeServer& s, std::size_t top_k = 5, double timeout = 5.0,
                     std::size_t in_flight = 8) {
  RemoteOptions o;
  o.endpoint = s.url();
  o.top_k = top_k;
  o.timeout = std::chrono::duration<double>(timeout);
  o.max_in_flight = in_flight;
  return RemoteBackend(o);
}

TEST(RemoteBackend, ReturnsTruncatedTopK) {
  FakeServer server;
  auto backend = client(server, 5);
  auto d = backend.next_token_logprobs("Question: ?\nAnswer:");
  EXPECT_EQ(d.size(), 5u);
  EXPECT_TRUE(d.truncated());
  EXPECT_EQ(d.argmax().token, " dog");
  EXPECT_EQ(server.last_context_, "Question: ?\nAnswer:");
  EXPECT_EQ(backend.model_name(), "fake");
}

TEST(RemoteBackend, CachesPerContext) {
  FakeServer server;
  auto backend = client(server);
  auto first = backend.next_token_logprobs("ctx");
  auto second = backend.next_token_logprobs("ctx");
  backend.next_token_logprobs("other");
  EXPECT_EQ(first, second);
  EXPECT_EQ(server.hits_.load(), 2);
  EXPECT_EQ(backend.requests_sent(), 2u);
}

TEST(RemoteBackend, HealthCheck) {
  FakeServer server;
  EXPECT_EQ(client(server).health(), "fake");
}

TEST(RemoteBackend, NonSuccessStatusIsBackendError) {
  FakeServer server;
  server.status_ = 503;
  auto backend = client(server);
  try {
    backend.next_token_logprobs("ctx");
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.context_hash(), context_hash("ctx"));
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
  }
}

TEST(RemoteBackend, MalformedBodyIsBackendError) {
  FakeServer server;
  server.raw_body_ = read_file(kProtocolDir / "bad_unsorted.json");
  EXPECT_THROW(client(server).next_token_logprobs("ctx"), BackendError);
}

TEST(RemoteBackend, OversizedResponseIsBackendError) {
  FakeServer server;
  server.raw_body_ = read_file(kProtocolDir / "valid_top5.json");
  EXPECT_THROW(client(server, 3).next_token_logprobs("ctx"), BackendError);
}

TEST(RemoteBackend, TimeoutIsBackendError) {
  FakeServer server;
  server.delay_ms_ = 600;
  EXPECT_THROW(client(server, 5, 0.1).next_token_logprobs("ctx"), BackendError);
}

TEST(RemoteBackend, UnreachableIsBackendError) {
  RemoteOptions o;
  o.endpoint = "http://127.0.0.1:1";
  o.timeout = std::chrono::duration<double>(1.0);
  RemoteBackend backend(o);
  EXPECT_THROW(backend.next_token_logprobs("ctx"), BackendError);
  EXPECT_THROW(backend.health(), BackendError);
}

TEST(RemoteBackend, BoundsRequestsInFlight) {
  FakeServer server;
  server.delay_ms_ = 50;
  auto backend = client(server, 5, 5.0, 2);
  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] { backend.next_token_logprobs("ctx " + std::to_string(i)); });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(server.hits_.load(), 8);
  EXPECT_LE(server.max_active_.load(), 2);
}

TEST(RemoteBackend, PicksUpEosFromResponse) {
  FakeServer server;
  server.raw_body_ = read_file(kProtocolDir / "valid_eos.json");
  auto backend = client(server);
  backend.next_token_logprobs("ctx");
  EXPECT_EQ(backend.eos_token(), TokenId("</s>"));
}

TEST(RemoteBackend, HonoursPathPrefix) {
  FakeServer server;
  server.server_.Post("/api/v1/next_token_logprobs", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"model":"prefixed","entries":[{"token":"a","logprob":-0.1},{"token":"b","logprob":-2.4}]})",
                    "application/json");
  });
  RemoteOptions o;
  o.endpoint = server.url() + "/api/";
  RemoteBackend backend(o);
  EXPECT_EQ(backend.next_token_logprobs("ctx").argmax().token, "a");
}

TEST(WireProtocol, RequestBody) {
  auto body = nlohmann::json::parse(make_logprob_request("a\nb", 7));
  EXPECT_EQ(body["context"], "a\nb");
  EXPECT_EQ(body["top_k"], 7);
}

TEST(WireProtocol, RecordedResponsesConform) {
  for (const char* name : {"valid_top5.json", "valid_eos.json", "valid_top_token_zero.json"}) {
    auto parsed = parse_logprob_response(read_file(kProtocolDir / name), 5);
    EXPECT_EQ(parsed.model, "recorded-llm") << name;
    EXPECT_TRUE(parsed.dist.truncated());
    for (const auto& e : parsed.dist.entries()) EXPECT_LE(e.logprob, 0.0);
  }
}

TEST(WireProtocol, RejectsMalformedResponses) {
  for (const auto& entry : std::filesystem::directory_iterator(kProtocolDir)) {
    const auto name = entry.path().filename().string();
    if (!name.starts_with("bad_")) continue;
    EXPECT_THROW(parse_logprob_response(read_file(entry.path()), 5, 42), BackendError) << name;
  }
}

}  // namespace
}  // namespace ced
