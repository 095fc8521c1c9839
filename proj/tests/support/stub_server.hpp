#pragma once

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pearrl/remote_chat.hpp"

namespace httplib {
class Server;
}

namespace pearrl::testing {

// Local chat-completions endpoint. Answers each POST from recorded exchanges
// (matched on the JSON body) and can inject 429s ahead of real answers.
class StubChatServer {
 public:
  struct Request {
    nlohmann::json body;
    std::string authorization;
  };

  explicit StubChatServer(std::vector<FixtureEntry> fixtures);
  ~StubChatServer();
  StubChatServer(const StubChatServer&) = delete;
  StubChatServer& operator=(const StubChatServer&) = delete;

  std::string url() const;

  // The next `n` requests get HTTP 429 before any lookup.
  void inject_429(int n) { pending_429_ = n; }
  // Every request gets this status (0 disables).
  void force_status(int status) { forced_status_ = status; }

  std::vector<Request> requests() const;
  int rejected_429() const { return rejected_429_; }

 private:
  std::vector<FixtureEntry> fixtures_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> pending_429_{0};
  std::atomic<int> forced_status_{0};
  std::atomic<int> rejected_429_{0};
  mutable std::mutex mutex_;
  std::vector<Request> requests_;
};

}  // namespace pearrl::testing
