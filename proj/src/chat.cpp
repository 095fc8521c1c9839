#include "pearrl/chat.hpp"

#include "pearrl/errors.hpp"

namespace pearrl {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw DataError("unknown chat role '" + std::string(name) + "'");
}

}  // namespace pearrl
