#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pearrl {

inline constexpr int kValueCount = 8;
inline constexpr std::size_t kArmCount = 28;
inline constexpr std::size_t kContextCount = 4;

/// The eight BEV-related values an intervention can target, indexed 1..8.
/// Arm identity depends on these indices, so the order is fixed.
class ValueCatalog {
 public:
  static const std::array<std::string_view, kValueCount>& labels();
  static std::string_view label(int value_index);
  static std::optional<int> find(std::string_view label);
};

/// Unordered pair of distinct values, stored canonically with lo < hi.
struct ValuePairArm {
  int lo = 1;
  int hi = 2;

  // Accepts either order; rejects equal or out-of-range indices.
  static ValuePairArm make(int a, int b);
  // Canonical lexicographic index: (1,2) -> 0, (1,3) -> 1, ..., (7,8) -> 27.
  static ValuePairArm from_index(std::size_t index);

  std::size_t index() const;
  bool contains(int value_index) const { return value_index == lo || value_index == hi; }
  std::vector<std::string> labels() const;

  auto operator<=>(const ValuePairArm&) const = default;
};

const std::array<ValuePairArm, kArmCount>& all_arms();

enum class AgeClass { under45, over45 };
enum class GenderClass { male, female };

struct BanditContext {
  AgeClass age = AgeClass::under45;
  GenderClass gender = GenderClass::male;

  // (under45, male) -> 0, (under45, female) -> 1, (over45, male) -> 2, (over45, female) -> 3.
  std::size_t index() const;
  static BanditContext from_index(std::size_t index);

  auto operator<=>(const BanditContext&) const = default;
};

std::string_view to_string(AgeClass age);
std::string_view to_string(GenderClass gender);
// "under45/male" style key used in logs, configs and plot files.
std::string context_key(const BanditContext& context);
BanditContext parse_context_key(std::string_view key);

}  // namespace pearrl
