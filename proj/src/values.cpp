#include "pearrl/values.hpp"

#include "pearrl/errors.hpp"

namespace pearrl {

const std::array<std::string_view, kValueCount>& ValueCatalog::labels() {
  static constexpr std::array<std::string_view, kValueCount> kLabels = {
      "American-made products",
      "Battery life concerns",
      "Carbon emission reduction",
      "Charging infrastructure",
      "Economic benefits",
      "Ethical consumption",
      "Government incentives",
      "Status symbol",
  };
  return kLabels;
}

std::string_view ValueCatalog::label(int value_index) {
  if (value_index < 1 || value_index > kValueCount) {
    throw DomainError("value index out of range 1..8: " + std::to_string(value_index));
  }
  return labels()[static_cast<std::size_t>(value_index - 1)];
}

std::optional<int> ValueCatalog::find(std::string_view label) {
  const auto& all = labels();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] == label) {
      return static_cast<int>(i) + 1;
    }
  }
  return std::nullopt;
}

ValuePairArm ValuePairArm::make(int a, int b) {
  if (a < 1 || a > kValueCount || b < 1 || b > kValueCount) {
    throw DomainError("arm value index out of range 1..8");
  }
  if (a == b) {
    throw DomainError("arm needs two distinct values");
  }
  return a < b ? ValuePairArm{a, b} : ValuePairArm{b, a};
}

ValuePairArm ValuePairArm::from_index(std::size_t index) {
  if (index >= kArmCount) {
    throw DomainError("arm index out of range: " + std::to_string(index));
  }
  return all_arms()[index];
}

std::size_t ValuePairArm::index() const {
  // Arms starting below lo: sum over v < lo of (8 - v).
  std::size_t offset = 0;
  for (int v = 1; v < lo; ++v) {
    offset += static_cast<std::size_t>(kValueCount - v);
  }
  return offset + static_cast<std::size_t>(hi - lo - 1);
}

std::vector<std::string> ValuePairArm::labels() const {
  return {std::string(ValueCatalog::label(lo)), std::string(ValueCatalog::label(hi))};
}

const std::array<ValuePairArm, kArmCount>& all_arms() {
  static const auto kArms = [] {
    std::array<ValuePairArm, kArmCount> arms{};
    std::size_t i = 0;
    for (int lo = 1; lo <= kValueCount; ++lo) {
      for (int hi = lo + 1; hi <= kValueCount; ++hi) {
        arms[i++] = ValuePairArm{lo, hi};
      }
    }
    return arms;
  }();
  return kArms;
}

std::size_t BanditContext::index() const {
  return (age == AgeClass::under45 ? 0u : 2u) + (gender == GenderClass::male ? 0u : 1u);
}

BanditContext BanditContext::from_index(std::size_t index) {
  if (index >= kContextCount) {
    throw DomainError("context index out of range: " + std::to_string(index));
  }
  return {index < 2 ? AgeClass::under45 : AgeClass::over45,
          index % 2 == 0 ? GenderClass::male : GenderClass::female};
}

std::string_view to_string(AgeClass age) {
  return age == AgeClass::under45 ? "under45" : "over45";
}

std::string_view to_string(GenderClass gender) {
  return gender == GenderClass::male ? "male" : "female";
}

std::string context_key(const BanditContext& context) {
  return std::string(to_string(context.age)) + "/" + std::string(to_string(context.gender));
}

BanditContext parse_context_key(std::string_view key) {
  for (std::size_t i = 0; i < kContextCount; ++i) {
    const auto ctx = BanditContext::from_index(i);
    if (context_key(ctx) == key) {
      return ctx;
    }
  }
  throw DataError("unknown context key: " + std::string(key));
}

}  // namespace pearrl
