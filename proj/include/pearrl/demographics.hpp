#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pearrl/rng.hpp"
#include "pearrl/values.hpp"

namespace pearrl {

/// The census attributes drawn from weighted tables. Name, state and city are
/// drawn from pools instead.
enum class Attribute {
  age,
  ethnicity,
  household_type,
  income,
  education,
  politics,
  gender,
};

inline constexpr std::size_t kAttributeCount = 7;
inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes = {
    Attribute::age,       Attribute::ethnicity, Attribute::household_type, Attribute::income,
    Attribute::education, Attribute::politics,  Attribute::gender,
};

/// Section header used for the attribute in the distribution file.
std::string_view attribute_name(Attribute attribute);

struct AttributeDistribution {
  Attribute attribute = Attribute::age;
  std::vector<std::string> labels;
  std::vector<double> weights;        // as printed (percent)
  std::vector<double> probabilities;  // weights / sum(weights)

  static AttributeDistribution make(Attribute attribute,
                                    std::vector<std::pair<std::string, double>> entries);

  std::optional<std::size_t> find(std::string_view label) const;
  bool contains(std::string_view label) const { return find(label).has_value(); }
};

class DemographicDistributions {
 public:
  // File format: one `[Attribute name]` header per attribute, then
  // `label<TAB>weight` lines. Blank lines and `#` comments are ignored.
  static DemographicDistributions parse(std::string_view text, std::string_view source = "<text>");
  static DemographicDistributions load(const std::filesystem::path& path);
  // The table shipped in data/demographics.tsv.
  static const DemographicDistributions& defaults();

  const AttributeDistribution& get(Attribute attribute) const;

 private:
  std::array<AttributeDistribution, kAttributeCount> attributes_;
};

/// Names keyed by (gender label, ethnicity label).
class NamePool {
 public:
  // `gender<TAB>ethnicity<TAB>name` lines.
  static NamePool parse(std::string_view text, std::string_view source = "<text>");
  static NamePool load(const std::filesystem::path& path);
  static const NamePool& defaults();

  const std::vector<std::string>& names(std::string_view gender, std::string_view ethnicity) const;
  bool empty() const { return names_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, std::vector<std::string>, std::less<>> names_;
};

/// States in file order, each with its cities.
class GeoPool {
 public:
  // `state<TAB>city` lines.
  static GeoPool parse(std::string_view text, std::string_view source = "<text>");
  static GeoPool load(const std::filesystem::path& path);
  static const GeoPool& defaults();

  struct State {
    std::string name;
    std::vector<std::string> cities;
  };
  const std::vector<State>& states() const { return states_; }

 private:
  std::vector<State> states_;
};

struct DemographicProfile {
  std::string age;
  std::string ethnicity;
  std::string household_type;
  std::string income;
  std::string education;
  std::string politics;
  std::string gender;
  std::string name;
  std::string state;
  std::string city;

  const std::string& get(Attribute attribute) const;

  bool operator==(const DemographicProfile&) const = default;
};

/// Throws DataError if any field is empty or, when distributions are given,
/// any census field is not one of their labels.
void validate_profile(const DemographicProfile& profile,
                      const DemographicDistributions* distributions = nullptr);

/// Each census attribute is drawn independently; the name comes from the pool
/// for the sampled (gender, ethnicity); then a state, then a city in it.
DemographicProfile sample_profile(const DemographicDistributions& distributions,
                                  const NamePool& names, const GeoPool& geography, Rng& rng);

/// Age bands below 45 map to under45; gender maps directly.
BanditContext to_context(const DemographicProfile& profile);

/// "Age: ..., Income: ..., ..., City: ..." block spliced into the persona prompt.
std::string format_properties(const DemographicProfile& profile);

/// Reads one field (e.g. "Age") back out of a formatted properties block.
std::optional<std::string> property_value(std::string_view properties, std::string_view field);

}  // namespace pearrl
