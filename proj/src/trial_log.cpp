#include "pearrl/trial_log.hpp"

#include <iterator>

#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

using nlohmann::json;

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    return std::nullopt;
  }
  return it->get<T>();
}

json transcript_json(const std::vector<ChatMessage>& messages) {
  auto out = json::array();
  for (const auto& m : messages) {
    out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return out;
}

std::vector<ChatMessage> transcript_from(const json& j) {
  std::vector<ChatMessage> out;
  for (const auto& m : j) {
    out.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return out;
}

}  // namespace

json to_json(const DemographicProfile& p) {
  return {
      {"age", p.age},         {"ethnicity", p.ethnicity}, {"household_type", p.household_type},
      {"income", p.income},   {"education", p.education}, {"politics", p.politics},
      {"gender", p.gender},   {"name", p.name},           {"state", p.state},
      {"city", p.city},
  };
}

DemographicProfile profile_from_json(const json& j) {
  DemographicProfile p;
  p.age = j.at("age").get<std::string>();
  p.ethnicity = j.at("ethnicity").get<std::string>();
  p.household_type = j.at("household_type").get<std::string>();
  p.income = j.at("income").get<std::string>();
  p.education = j.at("education").get<std::string>();
  p.politics = j.at("politics").get<std::string>();
  p.gender = j.at("gender").get<std::string>();
  p.name = j.at("name").get<std::string>();
  p.state = j.at("state").get<std::string>();
  p.city = j.at("city").get<std::string>();
  return p;
}

json to_json(const TrialRecord& r) {
  json j;
  j["type"] = "trial";
  j["trial"] = r.trial;
  j["policy"] = r.policy;
  j["profile"] = to_json(r.profile);
  j["context"] = context_key(r.context);
  j["arm"] = r.arm ? json::array({r.arm->lo, r.arm->hi}) : json(nullptr);
  j["intervention_index"] = optional_json(r.intervention_index);
  j["intervention"] = r.intervention;
  j["pre"] = optional_json(r.pre);
  j["post"] = optional_json(r.post);
  j["shift"] = optional_json(r.shift);
  j["reward"] = optional_json(r.reward);
  j["valid"] = r.valid;
  j["invalid_reason"] = r.invalid_reason;
  j["rejected_replies"] = r.rejected_replies;
  j["participant_transcript"] = transcript_json(r.participant_transcript);
  j["wizard_transcript"] = transcript_json(r.wizard_transcript);
  return j;
}

TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.trial = j.at("trial").get<std::uint64_t>();
  r.policy = j.at("policy").get<std::string>();
  r.profile = profile_from_json(j.at("profile"));
  r.context = parse_context_key(j.at("context").get<std::string>());
  if (const auto& arm = j.at("arm"); !arm.is_null()) {
    r.arm = ValuePairArm::make(arm.at(0).get<int>(), arm.at(1).get<int>());
  }
  r.intervention_index = optional_from<int>(j, "intervention_index");
  r.intervention = j.at("intervention").get<std::string>();
  r.pre = optional_from<int>(j, "pre");
  r.post = optional_from<int>(j, "post");
  r.shift = optional_from<int>(j, "shift");
  r.reward = optional_from<double>(j, "reward");
  r.valid = j.at("valid").get<bool>();
  r.invalid_reason = j.at("invalid_reason").get<std::string>();
  r.rejected_replies = j.at("rejected_replies").get<std::vector<std::string>>();
  r.participant_transcript = transcript_from(j.at("participant_transcript"));
  r.wizard_transcript = transcript_from(j.at("wizard_transcript"));
  if (r.valid && (!r.pre || !r.post || !r.shift || !r.reward)) {
    throw DataError("valid trial without readings");
  }
  return r;
}

json bandit_state_to_json(const BanditState& state) {
  auto rows = json::array();
  for (const auto& row : state.to_rows()) {
    const auto arm = ValuePairArm::from_index(row.arm);
    rows.push_back({{"context", context_key(BanditContext::from_index(row.context))},
                    {"arm_lo", arm.lo},
                    {"arm_hi", arm.hi},
                    {"n", row.pulls},
                    {"mean", row.mean}});
  }
  return {{"type", "bandit_state"}, {"rows", rows}};
}

BanditState bandit_state_from_json(const json& j) {
  std::vector<BanditStateRow> rows;
  for (const auto& row : j.at("rows")) {
    const auto arm = ValuePairArm::make(row.at("arm_lo").get<int>(), row.at("arm_hi").get<int>());
    rows.push_back({parse_context_key(row.at("context").get<std::string>()).index(), arm.index(),
                    row.at("n").get<std::uint64_t>(), row.at("mean").get<double>()});
  }
  return BanditState::from_rows(kContextCount, kArmCount, rows);
}

TrialLog read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open log " + path.string());
  }
  TrialLog log;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto where = detail::where(path.string(), line_number);
    if (detail::trim(line).empty()) {
      throw DataError(where + ": corrupt log line (blank)");
    }
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw DataError(where + ": corrupt log line (not a JSON object)");
    }
    const auto type = doc.value("type", std::string());
    try {
      if (line_number == 1) {
        if (type != "header" || doc.value("schema", std::string()) != kLogSchema) {
          throw DataError("missing log header");
        }
        if (doc.value("version", 0) != kLogSchemaVersion) {
          throw DataError("unsupported log version");
        }
        log.header = doc;
      } else if (log.final_state) {
        throw DataError("content after the final bandit state");
      } else if (type == "trial") {
        auto record = record_from_json(doc);
        if (record.trial != log.records.size()) {
          throw DataError("trial index " + std::to_string(record.trial) + " out of sequence");
        }
        log.records.push_back(std::move(record));
      } else if (type == "bandit_state") {
        log.final_state = bandit_state_from_json(doc);
      } else {
        throw DataError("unknown line type '" + type + "'");
      }
    } catch (const Error& e) {
      throw DataError(where + ": corrupt log line: " + e.what());
    } catch (const json::exception& e) {
      throw DataError(where + ": corrupt log line: " + e.what());
    }
  }
  if (line_number == 0) {
    throw DataError(path.string() + ": empty log");
  }
  return log;
}

std::uintmax_t drop_torn_tail(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open log " + path.string());
  }
  const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  in.close();
  if (content.empty() || content.back() == '\n') {
    return 0;
  }
  const auto keep = content.find_last_of('\n');
  const std::uintmax_t new_size = keep == std::string::npos ? 0 : keep + 1;
  std::filesystem::resize_file(path, new_size);
  return content.size() - new_size;
}

json header_run_description(const json& header) {
  json out = header;
  out.erase("type");
  out.erase("schema");
  out.erase("version");
  return out;
}

TrialLogWriter::TrialLogWriter(std::ofstream out) : out_(std::move(out)) {}

TrialLogWriter TrialLogWriter::create(const std::filesystem::path& path, json header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot create log " + path.string());
  }
  TrialLogWriter writer(std::move(out));
  header["type"] = "header";
  header["schema"] = kLogSchema;
  header["version"] = kLogSchemaVersion;
  writer.write_line(header);
  return writer;
}

TrialLogWriter TrialLogWriter::append_to(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) {
    throw ConfigError("cannot append to log " + path.string());
  }
  return TrialLogWriter(std::move(out));
}

void TrialLogWriter::append(const TrialRecord& record) { write_line(to_json(record)); }

void TrialLogWriter::write_final_state(const BanditState& state) {
  write_line(bandit_state_to_json(state));
}

void TrialLogWriter::write_line(const json& line) {
  out_ << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  out_.flush();
  if (!out_) {
    throw DataError("log write failed");
  }
}

}  // namespace pearrl
