#include "pearrl/cli.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pearrl/config.hpp"
#include "pearrl/experiment.hpp"
#include "pearrl/stats.hpp"
#include "pearrl/trial_log.hpp"

namespace pearrl::cli {

namespace {

namespace fs = std::filesystem;

void ensure_writable(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw UsageError(path.string() + " exists; pass --force to overwrite");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> demographics_seed;
  std::optional<std::uint64_t> bandit_seed;
  std::optional<std::uint64_t> backend_seed;
  std::string backend;
  std::string out;
  bool force = false;
  bool resume = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "seed for every random stream")->required();
  cmd->add_option("--demographics-seed", f.demographics_seed, "override the profile stream seed");
  cmd->add_option("--bandit-seed", f.bandit_seed, "override the selection stream seed");
  cmd->add_option("--backend-seed", f.backend_seed, "override the model stream seed");
  cmd->add_option("--backend", f.backend, "synthetic, remote or replay");
  cmd->add_option("--out", f.out, "trial log path")->required();
  cmd->add_flag("--force", f.force, "overwrite an existing log");
  cmd->add_flag("--resume", f.resume, "continue an interrupted log");
}

RunConfig base_config(const RunFlags& f) {
  RunConfig config = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  config.set_seed(*f.seed);
  if (f.demographics_seed) config.demographics_seed = *f.demographics_seed;
  if (f.bandit_seed) config.bandit_seed = *f.bandit_seed;
  if (f.backend_seed) config.backend_seed = *f.backend_seed;
  if (!f.backend.empty()) config.backend = parse_backend(f.backend);
  return config;
}

// Opens the log for a fresh or resumed run and returns the records to skip.
std::vector<TrialRecord> open_log(const RunFlags& f, const nlohmann::json& header,
                                  std::optional<TrialLogWriter>& writer, bool& finished,
                                  std::ostream& err) {
  const fs::path path = f.out;
  if (f.resume && f.force) {
    throw UsageError("--resume and --force are mutually exclusive");
  }
  if (f.resume && fs::exists(path)) {
    if (const auto cut = drop_torn_tail(path); cut > 0) {
      err << "dropped " << cut << " bytes of a partial final line\n";
    }
    auto log = read_trial_log(path);
    if (header_run_description(log.header) != header) {
      throw ConfigError(path.string() + " was written by a run with a different configuration");
    }
    finished = log.final_state.has_value();
    writer.emplace(TrialLogWriter::append_to(path));
    return std::move(log.records);
  }
  ensure_writable(path, f.force);
  writer.emplace(TrialLogWriter::create(path, header));
  finished = false;
  return {};
}

int run_bandit(const RunFlags& f, const std::string& policy, std::optional<std::uint64_t> steps,
               std::ostream& out, std::ostream& err) {
  auto config = base_config(f);
  if (!policy.empty()) config.policy = parse_policy(policy);
  if (steps) config.steps = *steps;
  config.validate();
  const auto data = StudyData::load(config);
  auto backends = make_backends(config, data);

  std::optional<TrialLogWriter> writer;
  bool finished = false;
  auto completed = open_log(f, describe_run(config, "bandit"), writer, finished, err);
  if (finished) {
    out << "log already complete: " << completed.size() << " trials\n";
    return kOk;
  }
  const auto done = completed.size();
  const auto result = run_bandit_experiment(config, data, *backends.participant, *backends.wizard,
                                            {std::move(completed), &*writer});
  std::size_t invalid = 0;
  for (const auto& r : result.records) invalid += r.valid ? 0 : 1;
  out << fmt::format("{} trials ({} new, {} invalid) -> {}\n", result.records.size(),
                     result.records.size() - done, invalid, f.out);
  return kOk;
}

int run_replication_cmd(const RunFlags& f, std::optional<std::uint64_t> n,
                        std::optional<std::size_t> workers, std::ostream& out,
                        std::ostream& err) {
  auto config = base_config(f);
  if (n) config.participants = *n;
  if (workers) config.workers = *workers;
  config.validate();
  const auto data = StudyData::load(config);
  auto backends = make_backends(config, data);

  std::optional<TrialLogWriter> writer;
  bool finished = false;
  auto completed = open_log(f, describe_run(config, "replication"), writer, finished, err);
  const auto done = completed.size();
  const auto records =
      run_replication(config, data, *backends.participant, {std::move(completed), &*writer});
  std::size_t invalid = 0;
  for (const auto& r : records) invalid += r.valid ? 0 : 1;
  out << fmt::format("{} participants ({} new, {} invalid) -> {}\n", records.size(),
                     records.size() - done, invalid, f.out);
  return kOk;
}

int sample_demographics(std::uint64_t n, std::uint64_t seed, const std::string& config_path,
                        const std::string& out_path, bool force, std::ostream& out) {
  RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  config.set_seed(seed);
  const auto data = StudyData::load(config);
  std::ostringstream lines;
  for (std::uint64_t k = 0; k < n; ++k) {
    auto rng = Rng::stream(seed, StreamPurpose::demographics, k);
    lines << to_json(sample_profile(data.distributions, data.names, data.geography, rng)).dump()
          << '\n';
  }
  if (out_path.empty() || out_path == "-") {
    out << lines.str();
  } else {
    ensure_writable(out_path, force);
    write_text(out_path, lines.str());
  }
  return kOk;
}

std::string setting_label(const TrialLog& log) {
  const auto& h = log.header;
  const auto backend = h.value("backend", std::string("unknown"));
  const auto policy = h.value("policy", std::string("unknown"));
  return backend + "-" + policy;
}

int analyze(const std::string& log_path, const std::string& reference_path,
            std::string setting, const std::string& table_out, const std::string& long_out,
            bool force, std::ostream& out, std::ostream& err) {
  const auto log = read_trial_log(log_path);
  if (setting.empty()) setting = setting_label(log);
  std::optional<ReferenceData> reference;
  if (!reference_path.empty()) reference = ReferenceData::load(reference_path);

  const auto summary = summarize_preferences(log.records);
  const auto report =
      comparison_report(setting, log.records, reference ? &*reference : nullptr);

  std::ostringstream table;
  write_report_table(table, report);
  std::ostringstream long_form;
  write_report_long(long_form, report);

  out << "setting,valid,post_mean,post_std,shift_mean,shift_std\n"
      << fmt::format("{},{},{:.2f},{:.2f},{:.2f},{:.2f}\n\n", setting, summary.valid,
                     summary.post.mean, summary.post.std, summary.shift.mean, summary.shift.std)
      << table.str();
  if (!table_out.empty()) {
    ensure_writable(table_out, force);
    write_text(table_out, table.str());
  }
  if (!long_out.empty()) {
    ensure_writable(long_out, force);
    write_text(long_out, long_form.str());
  }
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  require_reference(report);
  return kOk;
}

std::string csv_histogram_rows(std::string_view name, const Histogram& h) {
  std::string s;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    s += fmt::format("{},{},{},{}\n", name, h.bin_lo(i), h.bin_lo(i) + kBinWidth, h.counts[i]);
  }
  return s;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::config: return kConfig;
    case ErrorKind::data:
    case ErrorKind::domain:
    case ErrorKind::invalid_trial:
    case ErrorKind::generation_failed: return kData;
    case ErrorKind::transport:
    case ErrorKind::protocol: return kTransport;
    case ErrorKind::insufficient_data: return kInsufficientData;
    case ErrorKind::reference_required: return kReferenceRequired;
  }
  return kFailure;
}

void export_plots(const fs::path& log_path, const fs::path& out_dir, bool force) {
  const auto log = read_trial_log(log_path);
  if (log.records.empty()) {
    throw InsufficientDataError(log_path.string() + " holds no trials");
  }

  std::string series = "step,shift,accumulated_shift\n";
  const auto points = cumulative_shift_series(log.records);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& r = log.records[i];
    series += fmt::format("{},{},{}\n", points[i].step,
                          r.valid && r.shift ? std::to_string(*r.shift) : std::string(),
                          points[i].accumulated_shift);
  }

  std::string matrix = "context,age,gender,value_index,value,mean_shift,count\n";
  const auto m = mean_shift_matrix(log.records);
  for (std::size_t ctx = 0; ctx < kContextCount; ++ctx) {
    const auto c = BanditContext::from_index(ctx);
    for (int v = 1; v <= kValueCount; ++v) {
      const auto col = static_cast<std::size_t>(v - 1);
      matrix += fmt::format("{},{},{},{},{},{},{}\n", context_key(c), to_string(c.age),
                            to_string(c.gender), v, ValueCatalog::label(v),
                            format_number(m.mean[ctx][col]), m.count[ctx][col]);
    }
  }

  std::string means = "index,mean_shift,count\n";
  const auto table = per_intervention_means(log.records, InterventionCatalog::defaults());
  for (int i = 1; i <= kInterventionCount; ++i) {
    means += fmt::format("{},{},{}\n", i, format_number(table.at(i).mean), table.at(i).count);
  }

  std::vector<double> pre;
  std::vector<double> post;
  std::vector<double> shift;
  for (const auto& r : log.records) {
    if (r.pre) pre.push_back(*r.pre);
    if (r.valid) {
      post.push_back(*r.post);
      shift.push_back(*r.shift);
    }
  }
  std::string hist = "histogram,bin_lo,bin_hi,count\n";
  hist += csv_histogram_rows("initial", discretize(pre, HistogramDomain::preference));
  hist += csv_histogram_rows("post", discretize(post, HistogramDomain::preference));
  hist += csv_histogram_rows("shift", discretize(shift, HistogramDomain::shift));

  const std::string* contents[] = {&series, &matrix, &means, &hist};
  fs::create_directories(out_dir);
  for (const char* name : kPlotFiles) {
    ensure_writable(out_dir / name, force);
  }
  for (std::size_t i = 0; i < std::size(kPlotFiles); ++i) {
    write_text(out_dir / kPlotFiles[i], *contents[i]);
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-shift experiments with simulated survey participants", "pearrl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pearrl 0.1.0");

  std::uint64_t n_profiles = 0;
  std::optional<std::uint64_t> sample_seed;
  std::string sample_config;
  std::string sample_out;
  bool sample_force = false;
  auto* sample = app.add_subcommand("sample-demographics", "draw participant profiles");
  sample->add_option("--n", n_profiles, "number of profiles")->required();
  sample->add_option("--seed", sample_seed, "seed")->required();
  sample->add_option("--config", sample_config, "INI file with [data] overrides")
      ->check(CLI::ExistingFile);
  sample->add_option("--out", sample_out, "output file (default stdout)");
  sample->add_flag("--force", sample_force, "overwrite an existing file");

  RunFlags bandit_flags;
  std::string policy;
  std::optional<std::uint64_t> steps;
  auto* bandit = app.add_subcommand("run-bandit", "run the contextual bandit study");
  add_run_flags(bandit, bandit_flags);
  bandit->add_option("--policy", policy, "ucb, random or pure-llm");
  bandit->add_option("--steps", steps, "number of steps T");

  RunFlags rep_flags;
  std::optional<std::uint64_t> participants;
  std::optional<std::size_t> workers;
  auto* rep = app.add_subcommand("run-replication", "run the fixed-intervention survey");
  add_run_flags(rep, rep_flags);
  rep->add_option("--n", participants, "number of participants");
  rep->add_option("--workers", workers, "concurrent participants");

  std::string analyze_log;
  std::string reference;
  std::string setting;
  std::string table_out;
  std::string long_out;
  bool analyze_force = false;
  auto* an = app.add_subcommand("analyze", "summary and distribution comparison of a log");
  an->add_option("--log", analyze_log, "trial log")->required()->check(CLI::ExistingFile);
  an->add_option("--reference", reference, "reference CSV (domain,bin_lo,count)")
      ->check(CLI::ExistingFile);
  an->add_option("--setting", setting, "row label (default backend-policy)");
  an->add_option("--out", table_out, "also write the report table here");
  an->add_option("--long-out", long_out, "write the long-format report here");
  an->add_flag("--force", analyze_force, "overwrite existing outputs");

  std::string export_log;
  std::string export_dir;
  bool export_force = false;
  auto* ex = app.add_subcommand("export-plots", "write plot-ready CSV files");
  ex->add_option("--log", export_log, "trial log")->required()->check(CLI::ExistingFile);
  ex->add_option("--out-dir", export_dir, "output directory")->required();
  ex->add_flag("--force", export_force, "overwrite existing files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (sample->parsed()) {
      return sample_demographics(n_profiles, *sample_seed, sample_config, sample_out,
                                 sample_force, out);
    }
    if (bandit->parsed()) {
      return run_bandit(bandit_flags, policy, steps, out, err);
    }
    if (rep->parsed()) {
      return run_replication_cmd(rep_flags, participants, workers, out, err);
    }
    if (an->parsed()) {
      return analyze(analyze_log, reference, setting, table_out, long_out, analyze_force, out,
                     err);
    }
    export_plots(export_log, export_dir, export_force);
    out << "wrote " << std::size(kPlotFiles) << " files to " << export_dir << '\n';
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace pearrl::cli
