#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pearrl/bandit.hpp"
#include "pearrl/config.hpp"
#include "pearrl/demographics.hpp"
#include "pearrl/errors.hpp"
#include "pearrl/experiment.hpp"
#include "pearrl/participants.hpp"
#include "pearrl/stats.hpp"
#include "pearrl/trial_log.hpp"
#include "pearrl/wizard.hpp"

namespace py = pybind11;
using namespace pearrl;

namespace {

// Records and profiles cross the boundary as JSON text; the Python side
// turns them into dicts.
std::string records_json(const std::vector<TrialRecord>& records) {
  auto arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return arr.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

RunConfig make_config(const std::optional<std::string>& config_path, std::uint64_t seed,
                      const std::optional<std::string>& backend) {
  RunConfig config = config_path ? load_run_config(*config_path) : RunConfig{};
  config.set_seed(seed);
  if (backend) config.backend = parse_backend(*backend);
  return config;
}

Histogram histogram_from(const std::vector<std::uint64_t>& counts, const std::string& domain) {
  auto h = Histogram::empty(parse_histogram_domain(domain));
  if (counts.size() != h.bins()) {
    throw UsageError("expected " + std::to_string(h.bins()) + " counts for the " + domain +
                     " domain");
  }
  h.counts = counts;
  for (auto c : counts) h.total += c;
  return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the pearrl experiment library";

  auto base = py::register_exception<Error>(m, "PearrlError", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<ReferenceRequiredError>(m, "ReferenceRequiredError", base.ptr());

  m.attr("VALUE_LABELS") = [] {
    std::vector<std::string> out;
    for (auto l : ValueCatalog::labels()) out.emplace_back(l);
    return out;
  }();
  m.attr("ARM_COUNT") = kArmCount;
  m.attr("CONTEXT_COUNT") = kContextCount;

  m.def("normalize_reward", &normalize_reward, py::arg("shift"));
  m.def("arm_index", [](int a, int b) { return ValuePairArm::make(a, b).index(); });
  m.def("arm_values", [](std::size_t index) {
    const auto arm = ValuePairArm::from_index(index);
    return std::pair{arm.lo, arm.hi};
  });

  py::class_<BanditState>(m, "BanditState")
      .def(py::init<std::size_t, std::size_t>(), py::arg("num_contexts") = kContextCount,
           py::arg("num_arms") = kArmCount)
      .def_property_readonly("step", &BanditState::step)
      .def("pulls", &BanditState::pulls)
      .def("mean", &BanditState::mean)
      .def("ucb_score", [](const BanditState& s, std::size_t c, std::size_t a) {
        return ucb_score(s, c, a);
      })
      .def("select_arm",
           [](const BanditState& s, std::size_t context, const std::string& policy,
              std::uint64_t seed, std::uint64_t step) {
             auto rng = Rng::stream(seed, StreamPurpose::bandit, step);
             const auto p = policy == "random" ? SelectionPolicy::random : SelectionPolicy::ucb;
             return select_arm(s, context, p, rng);
           },
           py::arg("context"), py::arg("policy") = "ucb", py::arg("seed") = 0,
           py::arg("step") = 0)
      .def("update", [](BanditState& s, std::size_t c, std::size_t a, double r) {
        update(s, c, a, r);
      });

  m.def("sample_profiles",
        [](std::uint64_t n, std::uint64_t seed, std::optional<std::string> config) {
          const auto data = StudyData::load(make_config(config, seed, std::nullopt));
          auto arr = nlohmann::json::array();
          for (std::uint64_t k = 0; k < n; ++k) {
            auto rng = Rng::stream(seed, StreamPurpose::demographics, k);
            arr.push_back(to_json(sample_profile(data.distributions, data.names, data.geography, rng)));
          }
          return arr.dump();
        },
        py::arg("n"), py::arg("seed"), py::arg("config") = py::none());
  m.def("format_properties", [](const std::string& profile_json) {
    return format_properties(profile_from_json(nlohmann::json::parse(profile_json)));
  });
  m.def("persona_system_prompt", [](const std::string& profile_json) {
    return persona_system_prompt(profile_from_json(nlohmann::json::parse(profile_json)));
  });
  m.def("extract_preference", &extract_preference, py::arg("reply"));
  m.def("wizard_prompts", [](int initial, const std::vector<std::string>& values) {
    const auto p = values.empty() ? build_untargeted_prompts(initial)
                                  : build_wizard_prompts({initial, values});
    return std::pair{p.system, p.user};
  });
  m.def("interventions", [] {
    const auto& c = InterventionCatalog::defaults();
    std::vector<std::string> out;
    for (int i = 1; i <= static_cast<int>(c.size()); ++i) out.push_back(c.text(i));
    return out;
  });

  m.def("run_bandit",
        [](const std::string& policy, std::uint64_t steps, std::uint64_t seed,
           std::optional<std::string> config, std::optional<std::string> backend,
           std::optional<std::filesystem::path> log) {
          auto cfg = make_config(config, seed, backend);
          cfg.policy = parse_policy(policy);
          cfg.steps = steps;
          cfg.validate();
          const auto data = StudyData::load(cfg);
          auto backends = make_backends(cfg, data);
          std::optional<TrialLogWriter> writer;
          if (log) writer.emplace(TrialLogWriter::create(*log, describe_run(cfg, "bandit")));
          py::gil_scoped_release release;
          auto result = run_bandit_experiment(cfg, data, *backends.participant, *backends.wizard,
                                              {{}, writer ? &*writer : nullptr});
          return records_json(result.records);
        },
        py::arg("policy") = "ucb", py::arg("steps") = 1000, py::arg("seed") = 0,
        py::arg("config") = py::none(), py::arg("backend") = py::none(),
        py::arg("log") = py::none());
  m.def("run_replication",
        [](std::uint64_t n, std::uint64_t seed, std::size_t workers,
           std::optional<std::string> config, std::optional<std::string> backend,
           std::optional<std::filesystem::path> log) {
          auto cfg = make_config(config, seed, backend);
          cfg.participants = n;
          cfg.workers = workers;
          cfg.validate();
          const auto data = StudyData::load(cfg);
          auto backends = make_backends(cfg, data);
          std::optional<TrialLogWriter> writer;
          if (log) writer.emplace(TrialLogWriter::create(*log, describe_run(cfg, "replication")));
          py::gil_scoped_release release;
          auto records =
              run_replication(cfg, data, *backends.participant, {{}, writer ? &*writer : nullptr});
          return records_json(records);
        },
        py::arg("n") = 4000, py::arg("seed") = 0, py::arg("workers") = 4,
        py::arg("config") = py::none(), py::arg("backend") = py::none(),
        py::arg("log") = py::none());
  m.def("read_log", [](const std::filesystem::path& path) {
    return records_json(read_trial_log(path).records);
  });
  m.def("summarize_log", [](const std::filesystem::path& path) {
    const auto s = summarize_preferences(read_trial_log(path).records);
    py::dict d;
    d["valid"] = s.valid;
    d["post_mean"] = s.post.mean;
    d["post_std"] = s.post.std;
    d["shift_mean"] = s.shift.mean;
    d["shift_std"] = s.shift.std;
    return d;
  });
  m.def("cumulative_shift", [](const std::filesystem::path& path) {
    std::vector<double> out;
    for (const auto& p : cumulative_shift_series(read_trial_log(path).records)) {
      out.push_back(p.accumulated_shift);
    }
    return out;
  });

  m.def("discretize", [](const std::vector<double>& samples, const std::string& domain) {
    return discretize(samples, parse_histogram_domain(domain)).counts;
  });
  m.def("kl_divergence",
        [](const std::vector<std::uint64_t>& p, const std::vector<std::uint64_t>& q,
           const std::string& domain) {
          return kl_divergence(histogram_from(p, domain), histogram_from(q, domain));
        },
        py::arg("p"), py::arg("q"), py::arg("domain") = "shift");
  m.def("skewness",
        [](const std::vector<std::uint64_t>& counts, const std::string& domain) {
          return skewness(histogram_from(counts, domain));
        },
        py::arg("counts"), py::arg("domain") = "shift");
  m.def("mann_whitney_u", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = mann_whitney_u(a, b);
    return std::pair{r.u, r.p};
  });
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(x, y);
  });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    return spearman(x, y);
  });
}
