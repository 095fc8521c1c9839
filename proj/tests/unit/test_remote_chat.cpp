#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "pearrl/errors.hpp"
#include "pearrl/remote_chat.hpp"
#include "remote_fixture.hpp"
#include "stub_server.hpp"

namespace pearrl {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;

class RemoteChat : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv(testing::kFixtureKeyEnv, testing::kFixtureKey, 1); }
  void TearDown() override { ::unsetenv(testing::kFixtureKeyEnv); }

  static std::vector<ChatMessage> hello() {
    return {{Role::system, "Be brief."}, {Role::user, "Hello"}};
  }
  static std::string ok_body(const std::string& text) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
  }
};

TEST_F(RemoteChat, RequestShape) {
  const auto msgs = hello();
  const auto gpt = build_chat_request("gpt-4", msgs, RemoteEndpoint::gpt4_style("u").params);
  EXPECT_EQ(gpt, json::parse(R"({"model":"gpt-4","messages":[{"role":"system","content":"Be brief."},
      {"role":"user","content":"Hello"}],"temperature":1.0})"));
  const auto llama = build_chat_request("llama", msgs, RemoteEndpoint::llama2_style("u").params);
  EXPECT_DOUBLE_EQ(llama["temperature"].get<double>(), 0.6);
  EXPECT_DOUBLE_EQ(llama["top_p"].get<double>(), 0.9);
}

TEST_F(RemoteChat, ParseResponse) {
  EXPECT_EQ(parse_chat_response(ok_body("72")), "72");
  EXPECT_THROW(parse_chat_response("not json"), ProtocolError);
  EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), ProtocolError);
  EXPECT_THROW(parse_chat_response(R"({"choices":[{"message":{}}]})"), ProtocolError);
}

TEST_F(RemoteChat, MissingCredentialIsConfigError) {
  auto e = RemoteEndpoint::gpt4_style("http://127.0.0.1:1/v1/chat/completions");
  e.api_key_env = "PEARRL_TEST_UNSET_VARIABLE";
  ::unsetenv("PEARRL_TEST_UNSET_VARIABLE");
  EXPECT_THROW(RemoteChatBackend{e}, ConfigError);
}

TEST_F(RemoteChat, BackoffDelaysAreCappedAndBounded) {
  RetryPolicy p;
  p.max_attempts = 6;
  p.base_delay = 100ms;
  p.max_delay = 500ms;
  EXPECT_EQ(p.delay_for(0), 100ms);
  EXPECT_EQ(p.delay_for(1), 200ms);
  EXPECT_EQ(p.delay_for(2), 400ms);
  EXPECT_EQ(p.delay_for(3), 500ms);
  EXPECT_EQ(p.delay_for(30), 500ms);
}

TEST_F(RemoteChat, RetriesRetryableStatuses) {
  auto e = testing::fixture_endpoint("gpt4", "http://stub");
  std::vector<int> statuses = {429, 503, 0, 200};
  std::size_t calls = 0;
  std::vector<std::chrono::milliseconds> slept;
  HttpPost post = [&](const std::string&, const std::string&, const HttpHeaders& headers) {
    EXPECT_EQ(headers.at(0).second, std::string("Bearer ") + testing::kFixtureKey);
    const int s = statuses[calls++];
    return HttpResponse{s, s == 200 ? ok_body("55") : ""};
  };
  RemoteChatBackend backend(e, post, [&](std::chrono::milliseconds d) { slept.push_back(d); });
  Rng rng(0);
  EXPECT_EQ(backend.complete(hello(), rng), "55");
  EXPECT_EQ(calls, 4u);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{500ms, 1000ms, 2000ms}));
}

TEST_F(RemoteChat, ExhaustedRetriesIsTransportError) {
  auto e = testing::fixture_endpoint("gpt4", "http://stub");
  e.retry.max_attempts = 3;
  int calls = 0;
  HttpPost post = [&](const std::string&, const std::string&, const HttpHeaders&) {
    ++calls;
    return HttpResponse{429, ""};
  };
  RemoteChatBackend backend(e, post, [](std::chrono::milliseconds) {});
  Rng rng(0);
  try {
    backend.complete(hello(), rng);
    FAIL() << "expected TransportError";
  } catch (const TransportError& err) {
    EXPECT_EQ(err.http_status, 429);
  }
  EXPECT_EQ(calls, 3);
}

TEST_F(RemoteChat, ClientErrorIsNotRetried) {
  auto e = testing::fixture_endpoint("gpt4", "http://stub");
  int calls = 0;
  HttpPost post = [&](const std::string&, const std::string&, const HttpHeaders&) {
    ++calls;
    return HttpResponse{400, R"({"error":"bad"})"};
  };
  RemoteChatBackend backend(e, post, [](std::chrono::milliseconds) {});
  Rng rng(0);
  EXPECT_THROW(backend.complete(hello(), rng), ProtocolError);
  EXPECT_EQ(calls, 1);
}

TEST_F(RemoteChat, StubServerWithInjected429s) {
  const auto msgs = hello();
  const auto params = RemoteEndpoint::llama2_style("").params;
  const auto request = build_chat_request("meta-llama/Llama-2-70b-chat-hf", msgs, params);
  testing::StubChatServer server({{request, json::parse(ok_body("Hi."))}});
  server.inject_429(2);

  auto e = testing::fixture_endpoint("llama2", server.url());
  e.retry.base_delay = 5ms;
  e.retry.max_delay = 20ms;
  RemoteChatBackend backend(e);
  Rng rng(0);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(backend.complete(msgs, rng), "Hi.");
  EXPECT_GE(std::chrono::steady_clock::now() - start, 15ms);
  EXPECT_EQ(server.rejected_429(), 2);
  const auto seen = server.requests();
  ASSERT_EQ(seen.size(), 3u);
  for (const auto& r : seen) {
    EXPECT_EQ(r.body, request);
    EXPECT_EQ(r.authorization, std::string("Bearer ") + testing::kFixtureKey);
  }
}

TEST_F(RemoteChat, UnreachableServerIsTransportError) {
  auto e = testing::fixture_endpoint("gpt4", "http://127.0.0.1:1/v1/chat/completions");
  e.retry.max_attempts = 2;
  e.retry.base_delay = 1ms;
  e.timeout = 2s;
  RemoteChatBackend backend(e);
  Rng rng(0);
  EXPECT_THROW(backend.complete(hello(), rng), TransportError);
}

TEST_F(RemoteChat, RecordThenReplay) {
  const auto path = std::filesystem::temp_directory_path() / "pearrl_record_replay.jsonl";
  std::filesystem::remove(path);
  struct Echo final : ChatBackend {
    std::string complete(std::span<const ChatMessage> m, Rng&) override {
      return "echo:" + m.back().content;
    }
    std::string tag() const override { return "echo"; }
  } echo;
  const GenerationParams params{0.6, 0.9};
  RecordingBackend recorder(echo, "m", params, path);
  Rng rng(0);
  EXPECT_EQ(recorder.complete(hello(), rng), "echo:Hello");

  ReplayBackend replay(load_fixtures(path), "m", params);
  EXPECT_EQ(replay.complete(hello(), rng), "echo:Hello");
  // Different sampling parameters make a different request.
  ReplayBackend other(load_fixtures(path), "m", GenerationParams{1.0, std::nullopt});
  EXPECT_THROW(other.complete(hello(), rng), ProtocolError);
  std::filesystem::remove(path);
}

TEST_F(RemoteChat, MalformedFixtureLine) {
  const auto path = std::filesystem::temp_directory_path() / "pearrl_bad_fixture.jsonl";
  std::ofstream(path) << "{\"request\": {}}\n";
  EXPECT_THROW(load_fixtures(path), DataError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace pearrl
