#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pearrl/trial_log.hpp"
#include "pearrl/wizard.hpp"

namespace pearrl {

enum class HistogramDomain { preference, shift };

std::string_view to_string(HistogramDomain domain);
HistogramDomain parse_histogram_domain(std::string_view name);

inline constexpr int kBinWidth = 10;

/// Width-10 bins, left-closed, with the domain maximum folded into the top
/// bin: preference [0, 100] has 10 bins, shift [-100, 100] has 20.
struct Histogram {
  HistogramDomain domain = HistogramDomain::preference;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  static Histogram empty(HistogramDomain domain);

  std::size_t bins() const { return counts.size(); }
  int bin_lo(std::size_t bin) const;
  double midpoint(std::size_t bin) const;
  // Bin holding `value`; nullopt outside the domain.
  std::optional<std::size_t> bin_of(double value) const;
  void add(double value, std::uint64_t count = 1);

  bool operator==(const Histogram&) const = default;
};

int domain_min(HistogramDomain domain);
int domain_max(HistogramDomain domain);
std::size_t bin_count(HistogramDomain domain);

/// DataError naming the first out-of-domain sample.
Histogram discretize(std::span<const double> samples, HistogramDomain domain);
Histogram uniform_histogram(HistogramDomain domain, std::uint64_t per_bin = 1);

inline constexpr double kKlPseudoCount = 0.5;

/// KL(p || q) in nats after adding kKlPseudoCount to every bin of both.
/// UsageError when the domains differ.
double kl_divergence(const Histogram& p, const Histogram& q);

/// m3 / m2^1.5 over bin midpoints. nullopt when the variance is zero;
/// InsufficientDataError below three samples.
std::optional<double> skewness(const Histogram& hist);

/// 1-based ranks, ties get the average of the ranks they span.
std::vector<double> midranks(std::span<const double> xs);

struct MannWhitneyResult {
  double u = 0.0;  // U of the first sample
  double p = 1.0;  // two-sided
};

inline constexpr std::size_t kMannWhitneyMinSample = 8;

/// Normal approximation with tie-corrected variance and continuity
/// correction. Identical pooled values give p = 1.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// nullopt when either side has zero variance. UsageError unless both have
/// the same length of at least 3.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct InterventionEffect {
  std::optional<double> mean;  // absent when no valid trial used it
  std::uint64_t count = 0;

  bool operator==(const InterventionEffect&) const = default;
};

/// Indexed by intervention index - 1.
struct InterventionEffectTable {
  std::array<InterventionEffect, kInterventionCount> effects{};

  const InterventionEffect& at(int index) const;
  bool operator==(const InterventionEffectTable&) const = default;
};

/// Records without an index are matched to the catalog by text; records
/// that match neither are skipped.
InterventionEffectTable per_intervention_means(std::span<const TrialRecord> records,
                                               const InterventionCatalog& catalog);

struct CorrelationPair {
  std::vector<int> indices;  // interventions present in both tables
  std::optional<double> pearson;
  std::optional<double> spearman;
};

CorrelationPair correlate_effects(const InterventionEffectTable& setting,
                                  const InterventionEffectTable& reference);

/// Human (or other) cohort loaded from `domain,bin_lo,count` rows. Domains:
/// preference and shift hold histogram counts; intervention_mean holds the
/// mean shift of intervention `bin_lo` (1..35) in the count column.
struct ReferenceData {
  std::optional<Histogram> preference;
  std::optional<Histogram> shift;
  std::optional<InterventionEffectTable> intervention_means;

  static ReferenceData parse(std::string_view text, std::string_view source = "<reference>");
  static ReferenceData load(const std::filesystem::path& path);
};

struct ReportRow {
  std::string panel;    // "shift" or "initial"
  std::string setting;  // setting label, or "reference" for the reference row
  std::optional<double> kl_s;
  std::optional<double> kl_u;
  std::optional<double> skew;
  std::optional<double> p;
  std::optional<double> c_p;  // shift panel only
  std::optional<double> c_s;  // shift panel only
  std::optional<int> range_min;  // initial panel only
  std::optional<int> range_max;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
  bool reference_missing = false;
};

/// Comparison rows for the shift panel (valid shifts) and the initial
/// panel (every recorded pre preference). Without a reference only KL^U and
/// Skew are filled and reference_missing is set.
ComparisonReport comparison_report(std::string_view setting, std::span<const TrialRecord> records,
                                   const ReferenceData* reference,
                                   const InterventionCatalog& catalog = InterventionCatalog::defaults());

/// ReferenceRequiredError when the report was built without a reference.
void require_reference(const ComparisonReport& report);

/// panel,setting,KL_S,KL_U,Skew,p_value,c_P,c_S,range_min,range_max
void write_report_table(std::ostream& out, const ComparisonReport& report);
/// panel,setting,measure,value
void write_report_long(std::ostream& out, const ComparisonReport& report);

/// Shortest round-trip text for `value`; empty for nullopt.
std::string format_number(std::optional<double> value);

}  // namespace pearrl
