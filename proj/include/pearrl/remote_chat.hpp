#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pearrl/chat.hpp"

namespace pearrl {

/// Capped exponential backoff: base, 2*base, 4*base, ... up to max_delay.
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};

  // Delay before retry number `retry` (0-based).
  std::chrono::milliseconds delay_for(int retry) const;
};

struct RemoteEndpoint {
  std::string url;  // full chat-completions URL, http:// or https://
  std::string model = "gpt-4";
  GenerationParams params;
  // Name of the environment variable holding the bearer token. The token
  // itself never appears in configs or logs.
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{60};
  RetryPolicy retry;

  // temperature 1.0
  static RemoteEndpoint gpt4_style(std::string url, std::string model = "gpt-4");
  // temperature 0.6, top_p 0.9
  static RemoteEndpoint llama2_style(std::string url,
                                     std::string model = "meta-llama/Llama-2-70b-chat-hf");
};

struct HttpResponse {
  int status = 0;  // 0 means the request never got an answer
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;
using HttpPost = std::function<HttpResponse(const std::string& url, const std::string& body,
                                            const HttpHeaders& headers)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

HttpPost make_http_post(std::chrono::seconds timeout);
Sleeper real_sleeper();

/// {model, messages[{role, content}], temperature, top_p?}
nlohmann::json build_chat_request(std::string_view model, std::span<const ChatMessage> messages,
                                  const GenerationParams& params);
/// choices[0].message.content, or ProtocolError.
std::string parse_chat_response(std::string_view body);

inline bool is_retryable_status(int status) { return status == 0 || status == 429 || status >= 500; }

class RemoteChatBackend final : public ChatBackend {
 public:
  // Reads the credential from the environment now; ConfigError if unset.
  explicit RemoteChatBackend(RemoteEndpoint endpoint, HttpPost post = {}, Sleeper sleep = {});

  std::string complete(std::span<const ChatMessage> messages, Rng& rng) override;
  std::string tag() const override { return "remote:" + endpoint_.model; }
  const RemoteEndpoint& endpoint() const { return endpoint_; }

 private:
  RemoteEndpoint endpoint_;
  std::string api_key_;
  HttpPost post_;
  Sleeper sleep_;
};

/// One recorded exchange per line: {"request": {...}, "response": {...}}.
struct FixtureEntry {
  nlohmann::json request;
  nlohmann::json response;
};

std::vector<FixtureEntry> load_fixtures(const std::filesystem::path& path);

/// Answers from recorded exchanges whose request body equals the one this
/// backend would send. A miss is a ProtocolError.
class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(std::vector<FixtureEntry> fixtures, std::string model, GenerationParams params);

  std::string complete(std::span<const ChatMessage> messages, Rng& rng) override;
  std::string tag() const override { return "replay:" + model_; }

 private:
  std::vector<FixtureEntry> fixtures_;
  std::string model_;
  GenerationParams params_;
};

/// Forwards to `inner` and appends each exchange to a fixture file.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, std::string model, GenerationParams params,
                   std::filesystem::path path);

  std::string complete(std::span<const ChatMessage> messages, Rng& rng) override;
  std::string tag() const override { return inner_->tag(); }

 private:
  ChatBackend* inner_;
  std::string model_;
  GenerationParams params_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

}  // namespace pearrl
