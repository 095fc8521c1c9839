#include "pearrl/remote_chat.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  auto delay = base_delay;
  for (int i = 0; i < retry && delay < max_delay; ++i) {
    delay *= 2;
  }
  return std::min(delay, max_delay);
}

RemoteEndpoint RemoteEndpoint::gpt4_style(std::string url, std::string model) {
  RemoteEndpoint e;
  e.url = std::move(url);
  e.model = std::move(model);
  e.params = {1.0, std::nullopt};
  return e;
}

RemoteEndpoint RemoteEndpoint::llama2_style(std::string url, std::string model) {
  RemoteEndpoint e;
  e.url = std::move(url);
  e.model = std::move(model);
  e.params = {0.6, 0.9};
  return e;
}

HttpPost make_http_post(std::chrono::seconds timeout) {
  return [timeout](const std::string& url, const std::string& body, const HttpHeaders& headers) {
    const auto [base, path] = split_url(url);
    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) {
      h.emplace(k, v);
    }
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      return HttpResponse{0, httplib::to_string(res.error())};
    }
    return HttpResponse{res->status, res->body};
  };
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

nlohmann::json build_chat_request(std::string_view model, std::span<const ChatMessage> messages,
                                  const GenerationParams& params) {
  nlohmann::json request;
  request["model"] = model;
  auto& list = request["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    list.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  request["temperature"] = params.temperature;
  if (params.top_p) {
    request["top_p"] = *params.top_p;
  }
  return request;
}

std::string parse_chat_response(std::string_view body) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) {
    throw ProtocolError("chat response is not JSON");
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw ProtocolError("chat response has no choices");
  }
  const auto& first = choices->front();
  const auto message = first.find("message");
  if (message == first.end() || !message->is_object()) {
    throw ProtocolError("chat response choice has no message");
  }
  const auto content = message->find("content");
  if (content == message->end() || !content->is_string()) {
    throw ProtocolError("chat response message has no text content");
  }
  return content->get<std::string>();
}

RemoteChatBackend::RemoteChatBackend(RemoteEndpoint endpoint, HttpPost post, Sleeper sleep)
    : endpoint_(std::move(endpoint)),
      post_(post ? std::move(post) : make_http_post(endpoint_.timeout)),
      sleep_(sleep ? std::move(sleep) : real_sleeper()) {
  if (endpoint_.url.empty()) {
    throw ConfigError("remote backend needs an endpoint URL");
  }
  if (endpoint_.retry.max_attempts < 1) {
    throw ConfigError("remote backend needs max_attempts >= 1");
  }
  const char* key = std::getenv(endpoint_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("credential environment variable " + endpoint_.api_key_env + " is not set");
  }
  api_key_ = key;
}

std::string RemoteChatBackend::complete(std::span<const ChatMessage> messages, Rng&) {
  const auto body = build_chat_request(endpoint_.model, messages, endpoint_.params).dump();
  const HttpHeaders headers = {{"Authorization", "Bearer " + api_key_}};
  HttpResponse last;
  for (int attempt = 0; attempt < endpoint_.retry.max_attempts; ++attempt) {
    if (attempt > 0) {
      sleep_(endpoint_.retry.delay_for(attempt - 1));
    }
    last = post_(endpoint_.url, body, headers);
    if (last.status >= 200 && last.status < 300) {
      return parse_chat_response(last.body);
    }
    if (!is_retryable_status(last.status)) {
      throw ProtocolError("chat endpoint returned HTTP " + std::to_string(last.status));
    }
  }
  throw TransportError("chat endpoint still failing after " +
                           std::to_string(endpoint_.retry.max_attempts) + " attempts (last status " +
                           std::to_string(last.status) + ")",
                       last.status);
}

std::vector<FixtureEntry> load_fixtures(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  std::vector<FixtureEntry> out;
  const auto all_lines = detail::lines(text);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    if (detail::trim(all_lines[i]).empty()) {
      continue;
    }
    const auto doc = nlohmann::json::parse(all_lines[i], nullptr, false);
    if (doc.is_discarded() || !doc.contains("request") || !doc.contains("response")) {
      throw DataError(detail::where(path.string(), i + 1) + ": malformed fixture line");
    }
    out.push_back({doc["request"], doc["response"]});
  }
  return out;
}

ReplayBackend::ReplayBackend(std::vector<FixtureEntry> fixtures, std::string model,
                             GenerationParams params)
    : fixtures_(std::move(fixtures)), model_(std::move(model)), params_(params) {}

std::string ReplayBackend::complete(std::span<const ChatMessage> messages, Rng&) {
  const auto request = build_chat_request(model_, messages, params_);
  for (const auto& f : fixtures_) {
    if (f.request == request) {
      return parse_chat_response(f.response.dump());
    }
  }
  throw ProtocolError("no recorded response for this request");
}

RecordingBackend::RecordingBackend(ChatBackend& inner, std::string model, GenerationParams params,
                                   std::filesystem::path path)
    : inner_(&inner), model_(std::move(model)), params_(params), path_(std::move(path)) {}

std::string RecordingBackend::complete(std::span<const ChatMessage> messages, Rng& rng) {
  auto reply = inner_->complete(messages, rng);
  nlohmann::json line;
  line["request"] = build_chat_request(model_, messages, params_);
  line["response"] = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) {
    throw ConfigError("cannot append to fixture file " + path_.string());
  }
  out << line.dump() << '\n';
  return reply;
}

}  // namespace pearrl
