#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pearrl/errors.hpp"

namespace pearrl::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // unexpected internal error
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kTransport = 5,
  kInsufficientData = 6,
  kReferenceRequired = 7,
};

int exit_code_for(ErrorKind kind);

/// Runs one subcommand: sample-demographics, run-bandit, run-replication,
/// analyze or export-plots. Results go to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

inline constexpr const char* kPlotFiles[] = {"cumulative_shift.csv", "mean_shift_matrix.csv",
                                             "intervention_means.csv", "histograms.csv"};

/// Writes the four plot files into `out_dir`. Everything is computed before
/// the first file is touched, so a failure leaves no partial output.
void export_plots(const std::filesystem::path& log, const std::filesystem::path& out_dir,
                  bool force);

}  // namespace pearrl::cli
