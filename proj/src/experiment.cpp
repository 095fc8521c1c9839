#include "pearrl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>

#include "pearrl/errors.hpp"

namespace pearrl {

namespace {

using nlohmann::json;

json endpoint_json(const RemoteEndpoint& e) {
  json j = {{"url", e.url},
            {"model", e.model},
            {"temperature", e.params.temperature},
            {"api_key_env", e.api_key_env}};
  j["top_p"] = e.params.top_p ? json(*e.params.top_p) : json(nullptr);
  return j;
}

json persona_json(const SyntheticPersona& p) {
  json sensitivity = json::object();
  for (std::size_t ctx = 0; ctx < kContextCount; ++ctx) {
    sensitivity[context_key(BanditContext::from_index(ctx))] = p.sensitivity[ctx];
  }
  return {{"base_mean", p.base_mean},
          {"base_std", p.base_std},
          {"noise_std", p.noise_std},
          {"untargeted_shift", p.untargeted_shift},
          {"static_shift", p.static_shift},
          {"sensitivity", sensitivity}};
}

void check_resume_prefix(std::span<const TrialRecord> completed, std::uint64_t total) {
  if (completed.size() > total) {
    throw DataError("log already holds more trials than the run asks for");
  }
  for (std::size_t i = 0; i < completed.size(); ++i) {
    if (completed[i].trial != i) {
      throw DataError("resume log is not a contiguous trial prefix");
    }
  }
}

void mark_invalid(TrialRecord& record, const Error& error, std::vector<std::string> raw) {
  record.valid = false;
  record.post.reset();
  record.shift.reset();
  record.reward.reset();
  record.invalid_reason = error.what();
  record.rejected_replies.insert(record.rejected_replies.end(), raw.begin(), raw.end());
}

void fill_outcome(TrialRecord& record, int pre, int post) {
  record.pre = pre;
  record.post = post;
  record.shift = post - pre;
  record.reward = normalize_reward(static_cast<double>(*record.shift));
  record.valid = true;
}

}  // namespace

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::ucb: return "ucb";
    case Policy::random: return "random";
    case Policy::pure_llm: return "pure-llm";
  }
  return "ucb";
}

Policy parse_policy(std::string_view name) {
  if (name == "ucb") return Policy::ucb;
  if (name == "random") return Policy::random;
  if (name == "pure-llm") return Policy::pure_llm;
  throw UsageError("unknown policy '" + std::string(name) + "' (expected ucb, random or pure-llm)");
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::synthetic: return "synthetic";
    case BackendKind::remote: return "remote";
    case BackendKind::replay: return "replay";
  }
  return "synthetic";
}

BackendKind parse_backend(std::string_view name) {
  if (name == "synthetic") return BackendKind::synthetic;
  if (name == "remote") return BackendKind::remote;
  if (name == "replay") return BackendKind::replay;
  throw UsageError("unknown backend '" + std::string(name) +
                   "' (expected synthetic, remote or replay)");
}

void RunConfig::validate() const {
  if (steps < 1) {
    throw ConfigError("steps must be at least 1");
  }
  if (participants < 1) {
    throw ConfigError("participants must be at least 1");
  }
  if (workers < 1) {
    throw ConfigError("workers must be at least 1");
  }
  persona.validate();
  if (backend == BackendKind::remote && participant_endpoint.url.empty()) {
    throw ConfigError("remote backend needs [remote] url");
  }
  if (backend == BackendKind::replay && participant_fixtures.empty()) {
    throw ConfigError("replay backend needs [remote] fixtures");
  }
}

json describe_run(const RunConfig& config, std::string_view study) {
  json j;
  j["study"] = study;
  j["policy"] = study == "replication" ? "static" : to_string(config.policy);
  j["steps"] = study == "replication" ? config.participants : config.steps;
  j["seeds"] = {{"demographics", config.demographics_seed},
                {"bandit", config.bandit_seed},
                {"backend", config.backend_seed}};
  j["backend"] = to_string(config.backend);
  if (config.backend == BackendKind::synthetic) {
    j["persona"] = persona_json(config.persona);
  } else {
    j["participant_endpoint"] = endpoint_json(config.participant_endpoint);
    j["wizard_endpoint"] = endpoint_json(config.wizard_endpoint);
  }
  if (config.backend == BackendKind::replay) {
    j["participant_fixtures"] = config.participant_fixtures.string();
    j["wizard_fixtures"] = config.wizard_fixtures.string();
  }
  j["data"] = {{"demographics", config.demographics_file.string()},
               {"names", config.names_file.string()},
               {"geography", config.geography_file.string()},
               {"interventions", config.catalog_file.string()}};
  return j;
}

StudyData StudyData::load(const RunConfig& config) {
  return StudyData{
      config.demographics_file.empty() ? DemographicDistributions::defaults()
                                       : DemographicDistributions::load(config.demographics_file),
      config.names_file.empty() ? NamePool::defaults() : NamePool::load(config.names_file),
      config.geography_file.empty() ? GeoPool::defaults() : GeoPool::load(config.geography_file),
      config.catalog_file.empty() ? InterventionCatalog::defaults()
                                  : InterventionCatalog::load(config.catalog_file),
  };
}

Backends make_backends(const RunConfig& config, const StudyData& data) {
  Backends b;
  switch (config.backend) {
    case BackendKind::synthetic:
      b.participant = std::make_unique<SyntheticParticipantBackend>(config.persona, data.catalog);
      b.wizard = std::make_unique<TemplateWizardBackend>();
      break;
    case BackendKind::remote:
      b.participant = std::make_unique<RemoteChatBackend>(config.participant_endpoint);
      b.wizard = std::make_unique<RemoteChatBackend>(config.wizard_endpoint);
      break;
    case BackendKind::replay:
      b.participant = std::make_unique<ReplayBackend>(load_fixtures(config.participant_fixtures),
                                                      config.participant_endpoint.model,
                                                      config.participant_endpoint.params);
      b.wizard = std::make_unique<ReplayBackend>(
          load_fixtures(config.wizard_fixtures.empty() ? config.participant_fixtures
                                                       : config.wizard_fixtures),
          config.wizard_endpoint.model, config.wizard_endpoint.params);
      break;
  }
  return b;
}

BanditState replay_bandit_updates(std::span<const TrialRecord> records) {
  BanditState state;
  for (const auto& r : records) {
    if (r.valid && r.policy == "ucb" && r.arm && r.reward) {
      update(state, r.context, *r.arm, *r.reward);
    }
  }
  return state;
}

BanditRunResult run_bandit_experiment(const RunConfig& config, const StudyData& data,
                                      ChatBackend& participant, ChatBackend& wizard,
                                      const RunOptions& options) {
  config.validate();
  check_resume_prefix(options.completed, config.steps);

  BanditRunResult result{options.completed, replay_bandit_updates(options.completed)};
  const auto selection =
      config.policy == Policy::random ? SelectionPolicy::random : SelectionPolicy::ucb;

  for (std::uint64_t step = options.completed.size(); step < config.steps; ++step) {
    auto demo_rng = Rng::stream(config.demographics_seed, StreamPurpose::demographics, step);
    auto bandit_rng = Rng::stream(config.bandit_seed, StreamPurpose::bandit, step);
    auto wizard_rng = Rng::stream(config.backend_seed, StreamPurpose::wizard, step);

    TrialRecord record;
    record.trial = step;
    record.policy = std::string(to_string(config.policy));
    record.profile = sample_profile(data.distributions, data.names, data.geography, demo_rng);
    record.context = to_context(record.profile);

    auto session = open_session(record.profile, participant,
                                Rng::stream(config.backend_seed, StreamPurpose::backend, step));
    try {
      const auto pre = session.measure_preference();
      record.pre = pre.value;
      record.rejected_replies = pre.rejected;

      WizardPrompts prompts;
      if (config.policy == Policy::pure_llm) {
        prompts = build_untargeted_prompts(pre.value);
      } else {
        record.arm = select_arm(result.state, record.context, selection, bandit_rng);
        prompts = build_wizard_prompts({pre.value, record.arm->labels()});
      }
      record.wizard_transcript = {{Role::system, prompts.system}, {Role::user, prompts.user}};
      const auto generated = generate_intervention(prompts, wizard, wizard_rng);
      record.wizard_transcript.push_back({Role::assistant, generated.text});
      record.intervention = generated.text;

      session.deliver_intervention(generated.text);
      const auto post = session.measure_preference();
      record.rejected_replies.insert(record.rejected_replies.end(), post.rejected.begin(),
                                     post.rejected.end());
      fill_outcome(record, pre.value, post.value);
      if (config.policy == Policy::ucb) {
        update(result.state, record.context, *record.arm, *record.reward);
      }
    } catch (const InvalidTrial& e) {
      mark_invalid(record, e, e.raw_replies);
    } catch (const GenerationFailed& e) {
      for (const auto& raw : e.raw_replies) {
        record.wizard_transcript.push_back({Role::assistant, raw});
      }
      mark_invalid(record, e, {});
    }
    record.participant_transcript = session.transcript();

    if (options.log != nullptr) {
      options.log->append(record);
    }
    result.records.push_back(std::move(record));
  }
  if (options.log != nullptr) {
    options.log->write_final_state(result.state);
  }
  return result;
}

std::vector<TrialRecord> run_replication(const RunConfig& config, const StudyData& data,
                                         ChatBackend& participant, const RunOptions& options) {
  config.validate();
  check_resume_prefix(options.completed, config.participants);

  const auto run_one = [&](std::uint64_t i) {
    auto demo_rng = Rng::stream(config.demographics_seed, StreamPurpose::demographics, i);
    auto pick_rng = Rng::stream(config.bandit_seed, StreamPurpose::static_pick, i);
    TrialRecord record;
    record.trial = i;
    record.policy = "static";
    record.profile = sample_profile(data.distributions, data.names, data.geography, demo_rng);
    record.context = to_context(record.profile);
    const auto pick = pick_static_intervention(data.catalog, pick_rng);
    record.intervention_index = pick.index;
    record.intervention = pick.text;

    auto session = open_session(record.profile, participant,
                                Rng::stream(config.backend_seed, StreamPurpose::backend, i));
    try {
      const auto pre = session.measure_preference();
      record.pre = pre.value;
      record.rejected_replies = pre.rejected;
      session.deliver_intervention(pick.text);
      const auto post = session.measure_preference();
      record.rejected_replies.insert(record.rejected_replies.end(), post.rejected.begin(),
                                     post.rejected.end());
      fill_outcome(record, pre.value, post.value);
    } catch (const InvalidTrial& e) {
      mark_invalid(record, e, e.raw_replies);
    }
    record.participant_transcript = session.transcript();
    return record;
  };

  const std::uint64_t start = options.completed.size();
  const std::uint64_t total = config.participants;
  std::vector<TrialRecord> records = options.completed;
  records.reserve(total);

  std::vector<std::optional<TrialRecord>> slots(total - start);
  std::vector<std::exception_ptr> errors(total - start);
  std::atomic<std::uint64_t> next{start};
  std::atomic<bool> abort{false};
  std::mutex mutex;
  std::condition_variable ready;

  const auto worker = [&] {
    while (!abort.load()) {
      const auto i = next.fetch_add(1);
      if (i >= total) {
        return;
      }
      std::optional<TrialRecord> record;
      std::exception_ptr error;
      try {
        record = run_one(i);
      } catch (...) {
        error = std::current_exception();
        abort.store(true);
      }
      {
        std::lock_guard lock(mutex);
        slots[i - start] = std::move(record);
        errors[i - start] = error;
      }
      ready.notify_all();
    }
  };

  const auto pool_size = static_cast<std::size_t>(
      std::min<std::uint64_t>(config.workers, std::max<std::uint64_t>(total - start, 1)));
  std::vector<std::jthread> pool;
  pool.reserve(pool_size);
  for (std::size_t w = 0; w < pool_size; ++w) {
    pool.emplace_back(worker);
  }

  // Single writer: emit records strictly in index order.
  std::exception_ptr failure;
  for (std::uint64_t i = start; i < total; ++i) {
    std::unique_lock lock(mutex);
    ready.wait(lock, [&] { return slots[i - start].has_value() || errors[i - start] != nullptr; });
    if (errors[i - start] != nullptr) {
      failure = errors[i - start];
      break;
    }
    auto record = std::move(*slots[i - start]);
    slots[i - start].reset();
    lock.unlock();
    if (options.log != nullptr) {
      options.log->append(record);
    }
    records.push_back(std::move(record));
  }
  abort.store(true);
  pool.clear();
  if (failure) {
    std::rethrow_exception(failure);
  }
  return records;
}

std::vector<SeriesPoint> cumulative_shift_series(std::span<const TrialRecord> records) {
  std::vector<SeriesPoint> series;
  series.reserve(records.size());
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0 && records[i].trial <= records[i - 1].trial) {
      throw DataError("records are not ordered by step");
    }
    if (records[i].valid && records[i].shift) {
      total += *records[i].shift;
    }
    series.push_back({records[i].trial, total});
  }
  return series;
}

PreferenceSummary summarize_preferences(std::span<const TrialRecord> records) {
  std::vector<double> posts;
  std::vector<double> shifts;
  for (const auto& r : records) {
    if (r.valid) {
      posts.push_back(*r.post);
      shifts.push_back(*r.shift);
    }
  }
  if (posts.size() < 2) {
    throw InsufficientDataError("need at least two valid trials, have " +
                                std::to_string(posts.size()));
  }
  const auto mean_std = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return MeanStd{mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
  };
  return {mean_std(posts), mean_std(shifts), posts.size()};
}

MeanShiftMatrix mean_shift_matrix(std::span<const TrialRecord> records) {
  MeanShiftMatrix m;
  std::array<std::array<double, kValueCount>, kContextCount> sums{};
  for (const auto& r : records) {
    if (!r.valid || !r.arm) {
      continue;
    }
    const auto ctx = r.context.index();
    for (int v : {r.arm->lo, r.arm->hi}) {
      const auto col = static_cast<std::size_t>(v - 1);
      sums[ctx][col] += *r.shift;
      m.count[ctx][col] += 1;
    }
  }
  for (std::size_t ctx = 0; ctx < kContextCount; ++ctx) {
    for (std::size_t col = 0; col < kValueCount; ++col) {
      if (m.count[ctx][col] > 0) {
        m.mean[ctx][col] = sums[ctx][col] / static_cast<double>(m.count[ctx][col]);
      }
    }
  }
  return m;
}

}  // namespace pearrl
