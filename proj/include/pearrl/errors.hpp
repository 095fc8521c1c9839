#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pearrl {

/// Broad failure classes. The CLI maps each one to its own exit status.
enum class ErrorKind {
  usage,
  config,
  data,
  domain,
  transport,
  protocol,
  insufficient_data,
  reference_required,
  invalid_trial,
  generation_failed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// A value outside its mathematical domain, e.g. a reward outside [0, 1].
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

// Network-level or retryable server failure. Safe to retry the whole call.
struct TransportError : Error {
  explicit TransportError(const std::string& what, int http_status = 0)
      : Error(ErrorKind::transport, what), http_status(http_status) {}
  int http_status;
};

// The remote side answered, but not in the chat-completion shape we expect.
struct ProtocolError : Error {
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::protocol, what) {}
};

struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::insufficient_data, what) {}
};

struct ReferenceRequiredError : Error {
  explicit ReferenceRequiredError(const std::string& what)
      : Error(ErrorKind::reference_required, what) {}
};

/// No usable preference after the full resampling budget. Carries every raw
/// reply so the trial can be inspected (and patched by hand) later.
struct InvalidTrial : Error {
  InvalidTrial(const std::string& what, std::vector<std::string> raw_replies)
      : Error(ErrorKind::invalid_trial, what), raw_replies(std::move(raw_replies)) {}
  std::vector<std::string> raw_replies;
};

struct GenerationFailed : Error {
  GenerationFailed(const std::string& what, std::vector<std::string> raw_replies)
      : Error(ErrorKind::generation_failed, what), raw_replies(std::move(raw_replies)) {}
  std::vector<std::string> raw_replies;
};

}  // namespace pearrl
