#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pearrl/bandit.hpp"
#include "pearrl/chat.hpp"
#include "pearrl/demographics.hpp"
#include "pearrl/participants.hpp"
#include "pearrl/remote_chat.hpp"
#include "pearrl/trial_log.hpp"
#include "pearrl/wizard.hpp"

namespace pearrl {

enum class Policy { ucb, random, pure_llm };

std::string_view to_string(Policy policy);  // "ucb", "random", "pure-llm"
Policy parse_policy(std::string_view name);

enum class BackendKind { synthetic, remote, replay };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend(std::string_view name);

struct RunConfig {
  Policy policy = Policy::ucb;
  std::uint64_t steps = 1000;          // bandit study
  std::uint64_t participants = 4000;   // replication study
  std::size_t workers = 4;             // replication fan-out

  std::uint64_t demographics_seed = 0;
  std::uint64_t bandit_seed = 0;
  std::uint64_t backend_seed = 0;

  BackendKind backend = BackendKind::synthetic;
  SyntheticPersona persona = SyntheticPersona::defaults();
  RemoteEndpoint participant_endpoint;
  RemoteEndpoint wizard_endpoint;
  // Recorded exchanges for BackendKind::replay.
  std::filesystem::path participant_fixtures;
  std::filesystem::path wizard_fixtures;

  // Empty paths select the built-in tables.
  std::filesystem::path demographics_file;
  std::filesystem::path names_file;
  std::filesystem::path geography_file;
  std::filesystem::path catalog_file;

  void set_seed(std::uint64_t seed) { demographics_seed = bandit_seed = backend_seed = seed; }
  void validate() const;
};

/// Everything that determines a run's output, minus credentials. Stored in
/// the log header and compared on resume.
nlohmann::json describe_run(const RunConfig& config, std::string_view study);

struct StudyData {
  DemographicDistributions distributions;
  NamePool names;
  GeoPool geography;
  InterventionCatalog catalog;

  static StudyData load(const RunConfig& config);
};

struct Backends {
  std::unique_ptr<ChatBackend> participant;
  std::unique_ptr<ChatBackend> wizard;
};

Backends make_backends(const RunConfig& config, const StudyData& data);

struct RunOptions {
  // Records already in the log; the run continues after them.
  std::vector<TrialRecord> completed;
  TrialLogWriter* log = nullptr;
};

struct BanditRunResult {
  std::vector<TrialRecord> records;
  BanditState state;
};

/// Per step: sample a participant, measure, pick values (ucb/random) or none
/// (pure-llm), generate and deliver the intervention, measure again, and for
/// ucb feed the normalized shift back to the bandit. Each record reaches the
/// log before the next step starts.
BanditRunResult run_bandit_experiment(const RunConfig& config, const StudyData& data,
                                      ChatBackend& participant, ChatBackend& wizard,
                                      const RunOptions& options = {});

/// Fixed-intervention survey: measure, show a random catalog intervention,
/// measure again. Participants run on a bounded worker pool; records are
/// logged in index order by one writer.
std::vector<TrialRecord> run_replication(const RunConfig& config, const StudyData& data,
                                         ChatBackend& participant, const RunOptions& options = {});

/// Bandit state implied by a record prefix (ucb updates from valid trials).
BanditState replay_bandit_updates(std::span<const TrialRecord> records);

struct SeriesPoint {
  std::uint64_t step = 0;
  double accumulated_shift = 0.0;
};

/// Prefix sums of raw shifts; invalid trials add zero.
std::vector<SeriesPoint> cumulative_shift_series(std::span<const TrialRecord> records);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

struct PreferenceSummary {
  MeanStd post;
  MeanStd shift;
  std::size_t valid = 0;
};

/// Throws InsufficientDataError below two valid records.
PreferenceSummary summarize_preferences(std::span<const TrialRecord> records);

/// Mean shift per (context, value), crediting an arm's shift to both values.
struct MeanShiftMatrix {
  std::array<std::array<std::optional<double>, kValueCount>, kContextCount> mean{};
  std::array<std::array<std::uint64_t, kValueCount>, kContextCount> count{};
};

MeanShiftMatrix mean_shift_matrix(std::span<const TrialRecord> records);

}  // namespace pearrl
