#include "pearrl/config.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

using Section = std::map<std::string, std::string, std::less<>>;

struct Ini {
  std::map<std::string, Section, std::less<>> sections;

  const Section* find(std::string_view name) const {
    const auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  }
};

Ini read_ini(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Ini ini;
  for (const auto& [name, section] : tree) {
    if (section.empty()) {
      throw ConfigError("config key '" + name + "' is outside any section");
    }
    auto& out = ini.sections[name];
    for (const auto& [key, value] : section) {
      out[key] = std::string(detail::trim(value.data()));
    }
  }
  return ini;
}

std::string field(std::string_view section, std::string_view key) {
  return "[" + std::string(section) + "] " + std::string(key);
}

double to_double(std::string_view section, std::string_view key, const std::string& value) {
  const auto v = detail::parse_double(value);
  if (!v) {
    throw ConfigError(field(section, key) + ": expected a number, got '" + value + "'");
  }
  return *v;
}

std::uint64_t to_count(std::string_view section, std::string_view key, const std::string& value) {
  const auto v = detail::parse_int(value);
  if (!v || *v < 0) {
    throw ConfigError(field(section, key) + ": expected a non-negative integer, got '" + value +
                      "'");
  }
  return static_cast<std::uint64_t>(*v);
}

std::filesystem::path to_path(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p{value};
  return p.is_relative() && !base.empty() ? base / p : p;
}

void reject_credentials(std::string_view section, std::string_view key) {
  for (std::string_view bad : {"api_key", "token", "key", "password", "secret", "authorization"}) {
    if (key == bad) {
      throw ConfigError(field(section, key) +
                        ": credentials are read from the environment only; set api_key_env");
    }
  }
}

void apply_run(const Section& s, RunConfig& c) {
  for (const auto& [key, value] : s) {
    if (key == "policy") {
      try {
        c.policy = parse_policy(value);
      } catch (const UsageError& e) {
        throw ConfigError(field("run", key) + ": " + e.what());
      }
    } else if (key == "backend") {
      try {
        c.backend = parse_backend(value);
      } catch (const UsageError& e) {
        throw ConfigError(field("run", key) + ": " + e.what());
      }
    } else if (key == "steps") {
      c.steps = to_count("run", key, value);
    } else if (key == "participants") {
      c.participants = to_count("run", key, value);
    } else if (key == "workers") {
      c.workers = static_cast<std::size_t>(to_count("run", key, value));
    } else {
      throw ConfigError("unknown key " + field("run", key));
    }
  }
}

void apply_seeds(const Section& s, RunConfig& c) {
  for (const auto& [key, value] : s) {
    const auto seed = to_count("seeds", key, value);
    if (key == "demographics") {
      c.demographics_seed = seed;
    } else if (key == "bandit") {
      c.bandit_seed = seed;
    } else if (key == "backend") {
      c.backend_seed = seed;
    } else {
      throw ConfigError("unknown key " + field("seeds", key));
    }
  }
}

void apply_data(const Section& s, const std::filesystem::path& base, RunConfig& c) {
  for (const auto& [key, value] : s) {
    if (key == "demographics") {
      c.demographics_file = to_path(base, value);
    } else if (key == "names") {
      c.names_file = to_path(base, value);
    } else if (key == "geography") {
      c.geography_file = to_path(base, value);
    } else if (key == "interventions") {
      c.catalog_file = to_path(base, value);
    } else {
      throw ConfigError("unknown key " + field("data", key));
    }
  }
}

ValuePairArm parse_arm(std::string_view key, const std::string& value) {
  const auto parts = detail::split(value, ',');
  if (parts.size() == 2) {
    const auto lo = detail::parse_int(detail::trim(parts[0]));
    const auto hi = detail::parse_int(detail::trim(parts[1]));
    if (lo && hi) {
      try {
        return ValuePairArm::make(static_cast<int>(*lo), static_cast<int>(*hi));
      } catch (const Error&) {
      }
    }
  }
  throw ConfigError(field("synthetic", key) + ": expected two distinct values in 1..8, got '" +
                    value + "'");
}

BanditContext context_of(std::string_view key, std::string_view age_gender) {
  try {
    return parse_context_key(age_gender);
  } catch (const Error&) {
    throw ConfigError(field("synthetic", key) +
                      ": context must be under45|over45 . male|female");
  }
}

// Splits "prefix.rest" and returns rest, or nullopt if the key has another prefix.
std::optional<std::string_view> after_prefix(std::string_view key, std::string_view prefix) {
  if (key.size() > prefix.size() + 1 && key.starts_with(prefix) && key[prefix.size()] == '.') {
    return key.substr(prefix.size() + 1);
  }
  return std::nullopt;
}

void apply_synthetic(const Section& s, RunConfig& c) {
  auto planted = SyntheticPersona::default_planted_arms();
  double planted_shift = SyntheticPersona::kPlantedValueShift;
  double other_shift = SyntheticPersona::kOtherValueShift;
  // Planting rebuilds the sensitivity table, so it goes first; the finer
  // overrides below are applied on top of it.
  for (const auto& [key, value] : s) {
    if (key == "planted_shift") {
      planted_shift = to_double("synthetic", key, value);
    } else if (key == "other_shift") {
      other_shift = to_double("synthetic", key, value);
    } else if (const auto rest = after_prefix(key, "planted")) {
      std::string slash(*rest);
      std::replace(slash.begin(), slash.end(), '.', '/');
      planted[context_of(key, slash).index()] = parse_arm(key, value);
    }
  }
  auto persona = SyntheticPersona::with_planted_arms(planted, planted_shift, other_shift);
  persona.base_mean = c.persona.base_mean;
  persona.base_std = c.persona.base_std;
  persona.noise_std = c.persona.noise_std;
  persona.untargeted_shift = c.persona.untargeted_shift;

  std::optional<double> static_all;
  for (const auto& [key, value] : s) {
    if (key == "base_mean") {
      persona.base_mean = to_double("synthetic", key, value);
    } else if (key == "base_std") {
      persona.base_std = to_double("synthetic", key, value);
    } else if (key == "noise_std") {
      persona.noise_std = to_double("synthetic", key, value);
    } else if (key == "untargeted_shift") {
      persona.untargeted_shift = to_double("synthetic", key, value);
    } else if (key == "static_shift") {
      static_all = to_double("synthetic", key, value);
    }
  }
  if (static_all) {
    persona.static_shift.fill(*static_all);
  }

  for (const auto& [key, value] : s) {
    if (key == "planted_shift" || key == "other_shift" || key == "base_mean" ||
        key == "base_std" || key == "noise_std" || key == "untargeted_shift" ||
        key == "static_shift" || after_prefix(key, "planted")) {
      continue;
    }
    if (const auto rest = after_prefix(key, "sensitivity")) {
      const auto parts = detail::split(*rest, '.');
      const auto v = parts.size() == 3 ? detail::parse_int(parts[2]) : std::nullopt;
      if (!v || *v < 1 || *v > static_cast<std::int64_t>(kValueCount)) {
        throw ConfigError(field("synthetic", key) +
                          ": expected sensitivity.<age>.<gender>.<value 1..8>");
      }
      const auto ctx = context_of(key, std::string(parts[0]) + "/" + std::string(parts[1]));
      persona.sensitivity[ctx.index()][static_cast<std::size_t>(*v - 1)] =
          to_double("synthetic", key, value);
    } else if (const auto idx = after_prefix(key, "static_shift")) {
      const auto i = detail::parse_int(*idx);
      if (!i || *i < 1 || *i > static_cast<std::int64_t>(kInterventionCount)) {
        throw ConfigError(field("synthetic", key) + ": intervention index must be 1..35");
      }
      persona.static_shift[static_cast<std::size_t>(*i - 1)] = to_double("synthetic", key, value);
    } else {
      throw ConfigError("unknown key " + field("synthetic", key));
    }
  }
  try {
    persona.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("[synthetic]: ") + e.what());
  }
  c.persona = persona;
}

void apply_endpoint(std::string_view name, const Section& s, const std::filesystem::path& base,
                    RemoteEndpoint& e, std::filesystem::path& fixtures) {
  // style first: it resets the generation parameters explicit keys refine.
  if (const auto it = s.find("style"); it != s.end()) {
    if (it->second == "gpt4") {
      e.params = RemoteEndpoint::gpt4_style("").params;
    } else if (it->second == "llama2") {
      e.params = RemoteEndpoint::llama2_style("").params;
    } else {
      throw ConfigError(field(name, "style") + ": expected gpt4 or llama2");
    }
  }
  for (const auto& [key, value] : s) {
    reject_credentials(name, key);
    if (key == "style") {
      continue;
    } else if (key == "url") {
      e.url = value;
    } else if (key == "model") {
      e.model = value;
    } else if (key == "temperature") {
      e.params.temperature = to_double(name, key, value);
    } else if (key == "top_p") {
      if (value.empty() || value == "none") {
        e.params.top_p.reset();
      } else {
        e.params.top_p = to_double(name, key, value);
      }
    } else if (key == "api_key_env") {
      e.api_key_env = value;
    } else if (key == "timeout_s") {
      e.timeout = std::chrono::seconds(to_count(name, key, value));
    } else if (key == "max_attempts") {
      const auto n = to_count(name, key, value);
      if (n < 1) {
        throw ConfigError(field(name, key) + ": must be at least 1");
      }
      e.retry.max_attempts = static_cast<int>(n);
    } else if (key == "base_delay_ms") {
      e.retry.base_delay = std::chrono::milliseconds(to_count(name, key, value));
    } else if (key == "max_delay_ms") {
      e.retry.max_delay = std::chrono::milliseconds(to_count(name, key, value));
    } else if (key == "fixtures") {
      fixtures = to_path(base, value);
    } else {
      throw ConfigError("unknown key " + field(name, key));
    }
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  const auto ini = read_ini(text);
  for (const auto& [name, section] : ini.sections) {
    if (name != "run" && name != "seeds" && name != "data" && name != "synthetic" &&
        name != "remote" && name != "wizard") {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }
  RunConfig c;
  if (const auto* s = ini.find("run")) apply_run(*s, c);
  if (const auto* s = ini.find("seeds")) apply_seeds(*s, c);
  if (const auto* s = ini.find("data")) apply_data(*s, base_dir, c);
  if (const auto* s = ini.find("synthetic")) apply_synthetic(*s, c);
  if (const auto* s = ini.find("remote")) {
    apply_endpoint("remote", *s, base_dir, c.participant_endpoint, c.participant_fixtures);
  }
  c.wizard_endpoint = c.participant_endpoint;
  if (const auto* s = ini.find("wizard")) {
    apply_endpoint("wizard", *s, base_dir, c.wizard_endpoint, c.wizard_fixtures);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(detail::read_file(path), path.parent_path());
}

}  // namespace pearrl
