#include "pearrl/demographics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "pearrl/embedded_data.hpp"
#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "Age", "Ethnicity", "House hold type", "Income", "Education", "Politics", "Gender",
};

// Field order of the persona properties block.
constexpr std::array<std::string_view, 10> kPropertyFields = {
    "Age",   "Income",    "Education", "Politics", "Gender", "House hold type",
    "Ethnicity", "Name", "State",     "City",
};

std::optional<Attribute> attribute_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAttributeNames.size(); ++i) {
    if (kAttributeNames[i] == name) {
      return kAllAttributes[i];
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view attribute_name(Attribute attribute) {
  return kAttributeNames[static_cast<std::size_t>(attribute)];
}

AttributeDistribution AttributeDistribution::make(
    Attribute attribute, std::vector<std::pair<std::string, double>> entries) {
  if (entries.empty()) {
    throw ConfigError("attribute '" + std::string(attribute_name(attribute)) + "' has no labels");
  }
  AttributeDistribution dist;
  dist.attribute = attribute;
  double total = 0.0;
  std::set<std::string, std::less<>> seen;
  for (auto& [label, weight] : entries) {
    if (label.empty()) {
      throw ConfigError("empty label in attribute '" + std::string(attribute_name(attribute)) + "'");
    }
    if (!seen.insert(label).second) {
      throw ConfigError("duplicate label '" + label + "'");
    }
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw ConfigError("weight for '" + label + "' must be positive");
    }
    total += weight;
    dist.labels.push_back(std::move(label));
    dist.weights.push_back(weight);
  }
  for (double w : dist.weights) {
    dist.probabilities.push_back(w / total);
  }
  return dist;
}

std::optional<std::size_t> AttributeDistribution::find(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      return i;
    }
  }
  return std::nullopt;
}

DemographicDistributions DemographicDistributions::parse(std::string_view text,
                                                         std::string_view source) {
  std::array<std::vector<std::pair<std::string, double>>, kAttributeCount> entries;
  std::array<bool, kAttributeCount> present{};
  std::optional<Attribute> current;

  const auto all_lines = detail::lines(text);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const auto line = all_lines[i];
    if (detail::skippable(line)) {
      continue;
    }
    const auto trimmed = detail::trim(line);
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']') {
        throw ConfigError(detail::where(source, i + 1) + ": malformed section header");
      }
      const auto name = trimmed.substr(1, trimmed.size() - 2);
      current = attribute_from_name(name);
      if (!current) {
        throw ConfigError(detail::where(source, i + 1) + ": unknown attribute '" +
                          std::string(name) + "'");
      }
      const auto idx = static_cast<std::size_t>(*current);
      if (present[idx]) {
        throw ConfigError(detail::where(source, i + 1) + ": duplicate section '" +
                          std::string(name) + "'");
      }
      present[idx] = true;
      continue;
    }
    if (!current) {
      throw ConfigError(detail::where(source, i + 1) + ": entry before any section header");
    }
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) {
      throw ConfigError(detail::where(source, i + 1) + ": expected label<TAB>weight");
    }
    const auto weight = detail::parse_double(line.substr(tab + 1));
    if (!weight) {
      throw ConfigError(detail::where(source, i + 1) + ": bad weight");
    }
    entries[static_cast<std::size_t>(*current)].emplace_back(
        std::string(detail::trim(line.substr(0, tab))), *weight);
  }

  DemographicDistributions out;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    if (!present[i]) {
      throw ConfigError(std::string(source) + ": missing section '" +
                        std::string(kAttributeNames[i]) + "'");
    }
    out.attributes_[i] = AttributeDistribution::make(kAllAttributes[i], std::move(entries[i]));
  }
  return out;
}

DemographicDistributions DemographicDistributions::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path), path.string());
}

const DemographicDistributions& DemographicDistributions::defaults() {
  static const auto kDefaults = parse(embedded::kDemographics, "data/demographics.tsv");
  return kDefaults;
}

const AttributeDistribution& DemographicDistributions::get(Attribute attribute) const {
  return attributes_[static_cast<std::size_t>(attribute)];
}

NamePool NamePool::parse(std::string_view text, std::string_view source) {
  NamePool pool;
  const auto all_lines = detail::lines(text);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    if (detail::skippable(all_lines[i])) {
      continue;
    }
    const auto fields = detail::split(all_lines[i], '\t');
    if (fields.size() != 3 || detail::trim(fields[2]).empty()) {
      throw ConfigError(detail::where(source, i + 1) + ": expected gender<TAB>ethnicity<TAB>name");
    }
    pool.names_[{std::string(detail::trim(fields[0])), std::string(detail::trim(fields[1]))}]
        .emplace_back(detail::trim(fields[2]));
  }
  if (pool.names_.empty()) {
    throw ConfigError(std::string(source) + ": name pool is empty");
  }
  return pool;
}

NamePool NamePool::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path), path.string());
}

const NamePool& NamePool::defaults() {
  static const auto kDefaults = parse(embedded::kNames, "data/names.tsv");
  return kDefaults;
}

const std::vector<std::string>& NamePool::names(std::string_view gender,
                                                std::string_view ethnicity) const {
  const auto it = names_.find(std::pair<std::string, std::string>(gender, ethnicity));
  if (it == names_.end() || it->second.empty()) {
    throw ConfigError("name pool has no entries for (" + std::string(gender) + ", " +
                      std::string(ethnicity) + ")");
  }
  return it->second;
}

GeoPool GeoPool::parse(std::string_view text, std::string_view source) {
  GeoPool pool;
  const auto all_lines = detail::lines(text);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    if (detail::skippable(all_lines[i])) {
      continue;
    }
    const auto fields = detail::split(all_lines[i], '\t');
    if (fields.size() != 2 || detail::trim(fields[0]).empty() || detail::trim(fields[1]).empty()) {
      throw ConfigError(detail::where(source, i + 1) + ": expected state<TAB>city");
    }
    const std::string state(detail::trim(fields[0]));
    auto it = std::find_if(pool.states_.begin(), pool.states_.end(),
                           [&](const State& s) { return s.name == state; });
    if (it == pool.states_.end()) {
      pool.states_.push_back({state, {}});
      it = std::prev(pool.states_.end());
    }
    it->cities.emplace_back(detail::trim(fields[1]));
  }
  if (pool.states_.empty()) {
    throw ConfigError(std::string(source) + ": geography pool is empty");
  }
  return pool;
}

GeoPool GeoPool::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path), path.string());
}

const GeoPool& GeoPool::defaults() {
  static const auto kDefaults = parse(embedded::kGeography, "data/geography.tsv");
  return kDefaults;
}

const std::string& DemographicProfile::get(Attribute attribute) const {
  switch (attribute) {
    case Attribute::age: return age;
    case Attribute::ethnicity: return ethnicity;
    case Attribute::household_type: return household_type;
    case Attribute::income: return income;
    case Attribute::education: return education;
    case Attribute::politics: return politics;
    case Attribute::gender: return gender;
  }
  throw DomainError("unknown attribute");
}

void validate_profile(const DemographicProfile& profile,
                      const DemographicDistributions* distributions) {
  const std::array<std::pair<std::string_view, const std::string*>, 10> fields = {{
      {"age", &profile.age},
      {"ethnicity", &profile.ethnicity},
      {"household_type", &profile.household_type},
      {"income", &profile.income},
      {"education", &profile.education},
      {"politics", &profile.politics},
      {"gender", &profile.gender},
      {"name", &profile.name},
      {"state", &profile.state},
      {"city", &profile.city},
  }};
  for (const auto& [name, value] : fields) {
    if (value->empty()) {
      throw DataError("profile field '" + std::string(name) + "' is empty");
    }
  }
  if (distributions != nullptr) {
    for (auto attribute : kAllAttributes) {
      if (!distributions->get(attribute).contains(profile.get(attribute))) {
        throw DataError("profile " + std::string(attribute_name(attribute)) + " label '" +
                        profile.get(attribute) + "' is not in the distribution table");
      }
    }
  }
}

DemographicProfile sample_profile(const DemographicDistributions& distributions,
                                  const NamePool& names, const GeoPool& geography, Rng& rng) {
  DemographicProfile p;
  const auto draw = [&](Attribute attribute) {
    const auto& dist = distributions.get(attribute);
    return dist.labels[rng.weighted_index(dist.probabilities)];
  };
  p.age = draw(Attribute::age);
  p.ethnicity = draw(Attribute::ethnicity);
  p.household_type = draw(Attribute::household_type);
  p.income = draw(Attribute::income);
  p.education = draw(Attribute::education);
  p.politics = draw(Attribute::politics);
  p.gender = draw(Attribute::gender);

  const auto& candidates = names.names(p.gender, p.ethnicity);
  p.name = candidates[rng.uniform_index(candidates.size())];

  const auto& states = geography.states();
  if (states.empty()) {
    throw ConfigError("geography pool is empty");
  }
  const auto& state = states[rng.uniform_index(states.size())];
  p.state = state.name;
  p.city = state.cities[rng.uniform_index(state.cities.size())];
  return p;
}

BanditContext to_context(const DemographicProfile& profile) {
  BanditContext ctx;
  if (profile.age == "18 to 24 years" || profile.age == "25 to 44 years") {
    ctx.age = AgeClass::under45;
  } else if (profile.age == "45 to 54 years" || profile.age == "55 to 64 years" ||
             profile.age == "65 to 74 years" || profile.age == "75 to 84 years" ||
             profile.age == "85 years or older") {
    ctx.age = AgeClass::over45;
  } else {
    throw DataError("unknown age band '" + profile.age + "'");
  }
  if (profile.gender == "Male") {
    ctx.gender = GenderClass::male;
  } else if (profile.gender == "Female") {
    ctx.gender = GenderClass::female;
  } else {
    throw DataError("unknown gender '" + profile.gender + "'");
  }
  return ctx;
}

std::string format_properties(const DemographicProfile& p) {
  const std::array<const std::string*, 10> values = {
      &p.age,    &p.income,         &p.education, &p.politics, &p.gender,
      &p.household_type, &p.ethnicity, &p.name,   &p.state,    &p.city,
  };
  std::string out;
  for (std::size_t i = 0; i < kPropertyFields.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += kPropertyFields[i];
    out += ": ";
    out += *values[i];
  }
  return out;
}

std::optional<std::string> property_value(std::string_view properties, std::string_view field) {
  const auto it = std::find(kPropertyFields.begin(), kPropertyFields.end(), field);
  if (it == kPropertyFields.end()) {
    return std::nullopt;
  }
  const std::string key = std::string(field) + ": ";
  std::size_t start = properties.find(key);
  while (start != std::string_view::npos && start > 0 && properties[start - 1] != ' ') {
    start = properties.find(key, start + 1);
  }
  if (start == std::string_view::npos) {
    return std::nullopt;
  }
  start += key.size();
  // The value runs to the next known field; labels such as
  // "Female householder, other family" contain commas themselves.
  std::size_t end = properties.size();
  const auto next = std::next(it);
  if (next != kPropertyFields.end()) {
    const auto pos = properties.find(", " + std::string(*next) + ": ", start);
    if (pos != std::string_view::npos) {
      end = pos;
    }
  }
  return std::string(properties.substr(start, end - start));
}

}  // namespace pearrl
