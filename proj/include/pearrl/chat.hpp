#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pearrl/rng.hpp"

namespace pearrl {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct GenerationParams {
  double temperature = 1.0;
  std::optional<double> top_p;

  bool operator==(const GenerationParams&) const = default;
};

/// Anything that turns a transcript into the next assistant message: a
/// remote chat-completion service, a recorded fixture, or a synthetic model.
/// Implementations must tolerate concurrent calls from distinct sessions.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // `rng` is the caller's stream for this session; deterministic backends
  // draw from it, remote ones ignore it.
  virtual std::string complete(std::span<const ChatMessage> messages, Rng& rng) = 0;
  virtual std::string tag() const = 0;
};

}  // namespace pearrl
