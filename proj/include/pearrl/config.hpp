#pragma once

#include <filesystem>
#include <string_view>

#include "pearrl/experiment.hpp"

namespace pearrl {

/// Reads an INI run configuration. Sections:
///
///   [run]        policy, steps, participants, workers, backend
///   [seeds]      demographics, bandit, backend
///   [data]       demographics, names, geography, interventions
///   [synthetic]  base_mean, base_std, noise_std, untargeted_shift, static_shift,
///                planted_shift, other_shift, planted.<age>.<gender> = lo,hi,
///                sensitivity.<age>.<gender>.<value>, static_shift.<index>
///   [remote]     url, model, style (gpt4 | llama2), temperature, top_p,
///                api_key_env, timeout_s, max_attempts, base_delay_ms,
///                max_delay_ms, fixtures
///   [wizard]     same keys as [remote]; unset keys fall back to [remote]
///
/// Relative data and fixture paths resolve against the file's directory.
/// Unknown sections or keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view text,
                           const std::filesystem::path& base_dir = std::filesystem::path{});

}  // namespace pearrl
