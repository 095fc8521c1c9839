#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pearrl/bandit.hpp"
#include "pearrl/chat.hpp"
#include "pearrl/demographics.hpp"
#include "pearrl/values.hpp"

namespace pearrl {

inline constexpr std::string_view kLogSchema = "pearrl.trial_log";
inline constexpr int kLogSchemaVersion = 1;

/// One intervention trial. Invalid trials keep their raw replies but carry no
/// post reading, shift or reward.
struct TrialRecord {
  std::uint64_t trial = 0;
  std::string policy;  // "ucb", "random", "pure-llm" or "static"
  DemographicProfile profile;
  BanditContext context;
  std::optional<ValuePairArm> arm;
  std::optional<int> intervention_index;  // static catalog index, 1..35
  std::string intervention;
  std::optional<int> pre;
  std::optional<int> post;
  std::optional<int> shift;
  std::optional<double> reward;
  bool valid = false;
  std::string invalid_reason;
  std::vector<std::string> rejected_replies;
  std::vector<ChatMessage> participant_transcript;
  std::vector<ChatMessage> wizard_transcript;

  bool operator==(const TrialRecord&) const = default;
};

nlohmann::json to_json(const DemographicProfile& profile);
DemographicProfile profile_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrialRecord& record);
TrialRecord record_from_json(const nlohmann::json& j);

/// Flat (context, arm_lo, arm_hi, n, mean) table for the 4 x 28 bandit.
nlohmann::json bandit_state_to_json(const BanditState& state);
BanditState bandit_state_from_json(const nlohmann::json& j);

struct TrialLog {
  nlohmann::json header;
  std::vector<TrialRecord> records;
  std::optional<BanditState> final_state;  // present once a bandit run completed
};

/// Parses a log; errors name the offending line.
TrialLog read_trial_log(const std::filesystem::path& path);

/// Cuts a partially written final line (no trailing newline) left by an
/// interrupted writer. Returns the number of bytes removed.
std::uintmax_t drop_torn_tail(const std::filesystem::path& path);

/// Header fields that describe the run, without type/schema/version.
nlohmann::json header_run_description(const nlohmann::json& header);

/// Append-only writer. Every line is flushed before append() returns, so an
/// aborted run leaves a valid prefix.
class TrialLogWriter {
 public:
  // Creates a new log with `header` (the "type"/"schema"/"version" keys are added).
  static TrialLogWriter create(const std::filesystem::path& path, nlohmann::json header);
  // Reopens an existing log for appending.
  static TrialLogWriter append_to(const std::filesystem::path& path);

  void append(const TrialRecord& record);
  void write_final_state(const BanditState& state);

 private:
  explicit TrialLogWriter(std::ofstream out);
  void write_line(const nlohmann::json& line);

  std::ofstream out_;
};

}  // namespace pearrl
