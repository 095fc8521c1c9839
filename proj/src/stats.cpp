#include "pearrl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

std::string_view to_string(HistogramDomain domain) {
  return domain == HistogramDomain::preference ? "preference" : "shift";
}

HistogramDomain parse_histogram_domain(std::string_view name) {
  if (name == "preference") return HistogramDomain::preference;
  if (name == "shift") return HistogramDomain::shift;
  throw UsageError("unknown histogram domain '" + std::string(name) + "'");
}

int domain_min(HistogramDomain domain) { return domain == HistogramDomain::preference ? 0 : -100; }
int domain_max(HistogramDomain) { return 100; }

std::size_t bin_count(HistogramDomain domain) {
  return static_cast<std::size_t>((domain_max(domain) - domain_min(domain)) / kBinWidth);
}

Histogram Histogram::empty(HistogramDomain domain) {
  return Histogram{domain, std::vector<std::uint64_t>(bin_count(domain), 0), 0};
}

int Histogram::bin_lo(std::size_t bin) const {
  return domain_min(domain) + static_cast<int>(bin) * kBinWidth;
}

double Histogram::midpoint(std::size_t bin) const { return bin_lo(bin) + kBinWidth / 2.0; }

std::optional<std::size_t> Histogram::bin_of(double value) const {
  const double lo = domain_min(domain);
  const double hi = domain_max(domain);
  if (!(value >= lo && value <= hi)) {
    return std::nullopt;
  }
  const auto bin = static_cast<std::size_t>(std::floor((value - lo) / kBinWidth));
  return std::min(bin, bins() - 1);
}

void Histogram::add(double value, std::uint64_t count) {
  const auto bin = bin_of(value);
  if (!bin) {
    throw DataError(fmt::format("sample {} is outside the {} domain [{}, {}]", value,
                                to_string(domain), domain_min(domain), domain_max(domain)));
  }
  counts[*bin] += count;
  total += count;
}

Histogram discretize(std::span<const double> samples, HistogramDomain domain) {
  auto hist = Histogram::empty(domain);
  for (double s : samples) {
    hist.add(s);
  }
  return hist;
}

Histogram uniform_histogram(HistogramDomain domain, std::uint64_t per_bin) {
  auto hist = Histogram::empty(domain);
  std::fill(hist.counts.begin(), hist.counts.end(), per_bin);
  hist.total = per_bin * hist.bins();
  return hist;
}

double kl_divergence(const Histogram& p, const Histogram& q) {
  if (p.domain != q.domain || p.bins() != q.bins()) {
    throw UsageError("KL divergence needs histograms over the same domain");
  }
  const double k = static_cast<double>(p.bins());
  const double p_total = static_cast<double>(p.total) + kKlPseudoCount * k;
  const double q_total = static_cast<double>(q.total) + kKlPseudoCount * k;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double pi = (static_cast<double>(p.counts[i]) + kKlPseudoCount) / p_total;
    const double qi = (static_cast<double>(q.counts[i]) + kKlPseudoCount) / q_total;
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

std::optional<double> skewness(const Histogram& hist) {
  if (hist.total < 3) {
    throw InsufficientDataError("skew needs at least three samples, have " +
                                std::to_string(hist.total));
  }
  if (std::count_if(hist.counts.begin(), hist.counts.end(), [](auto c) { return c > 0; }) < 2) {
    return std::nullopt;
  }
  const double n = static_cast<double>(hist.total);
  double mean = 0.0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    mean += static_cast<double>(hist.counts[i]) * hist.midpoint(i);
  }
  mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    const double d = hist.midpoint(i) - mean;
    const double c = static_cast<double>(hist.counts[i]);
    m2 += c * d * d;
    m3 += c * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

std::vector<double> midranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.size() < kMannWhitneyMinSample || b.size() < kMannWhitneyMinSample) {
    throw InsufficientDataError(fmt::format(
        "Mann-Whitney U needs at least {} samples per side, have {} and {}",
        kMannWhitneyMinSample, a.size(), b.size()));
  }
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);

  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(a.size()), 0.0);
  const double u1 = r1 - n1 * (n1 + 1.0) / 2.0;

  // Tie term: sum of t^3 - t over groups of equal values.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double variance = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (variance <= 0.0) {
    return {u1, 1.0};
  }
  const double z = std::max(std::abs(u1 - n1 * n2 / 2.0) - 0.5, 0.0) / std::sqrt(variance);
  return {u1, std::min(1.0, std::erfc(z / std::sqrt(2.0)))};
}

namespace {

void check_pair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw UsageError(fmt::format("correlation needs equal lengths, got {} and {}", xs.size(),
                                 ys.size()));
  }
  if (xs.size() < 3) {
    throw UsageError("correlation needs at least three pairs");
  }
}

}  // namespace

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    return std::nullopt;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const auto rx = midranks(xs);
  const auto ry = midranks(ys);
  return pearson(rx, ry);
}

const InterventionEffect& InterventionEffectTable::at(int index) const {
  if (index < 1 || index > kInterventionCount) {
    throw DomainError("intervention index " + std::to_string(index) + " is outside 1..35");
  }
  return effects[static_cast<std::size_t>(index - 1)];
}

InterventionEffectTable per_intervention_means(std::span<const TrialRecord> records,
                                               const InterventionCatalog& catalog) {
  std::array<double, kInterventionCount> sums{};
  InterventionEffectTable table;
  for (const auto& r : records) {
    if (!r.valid || !r.shift) {
      continue;
    }
    std::optional<int> index = r.intervention_index;
    if (!index) {
      index = catalog.find(r.intervention);
    }
    if (!index || *index < 1 || *index > kInterventionCount) {
      continue;
    }
    const auto slot = static_cast<std::size_t>(*index - 1);
    sums[slot] += *r.shift;
    table.effects[slot].count += 1;
  }
  for (std::size_t i = 0; i < table.effects.size(); ++i) {
    if (table.effects[i].count > 0) {
      table.effects[i].mean = sums[i] / static_cast<double>(table.effects[i].count);
    }
  }
  return table;
}

CorrelationPair correlate_effects(const InterventionEffectTable& setting,
                                  const InterventionEffectTable& reference) {
  CorrelationPair pair;
  std::vector<double> xs;
  std::vector<double> ys;
  for (int i = 1; i <= kInterventionCount; ++i) {
    if (setting.at(i).mean && reference.at(i).mean) {
      pair.indices.push_back(i);
      xs.push_back(*setting.at(i).mean);
      ys.push_back(*reference.at(i).mean);
    }
  }
  if (xs.size() >= 3) {
    pair.pearson = pearson(xs, ys);
    pair.spearman = spearman(xs, ys);
  }
  return pair;
}

ReferenceData ReferenceData::parse(std::string_view text, std::string_view source) {
  ReferenceData ref;
  std::array<double, kInterventionCount> means{};
  std::array<bool, kInterventionCount> seen_mean{};
  std::map<std::pair<std::string, int>, std::size_t> seen;
  bool header_allowed = true;
  std::size_t line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    if (detail::skippable(line)) {
      continue;
    }
    const auto cells = detail::split(line, ',');
    const auto at = detail::where(source, line_no);
    if (cells.size() != 3) {
      throw DataError(at + ": expected domain,bin_lo,count");
    }
    const auto domain = std::string(detail::trim(cells[0]));
    if (header_allowed && domain == "domain") {
      header_allowed = false;
      continue;
    }
    header_allowed = false;
    const auto lo = detail::parse_int(cells[1]);
    const auto value = detail::parse_double(cells[2]);
    if (!lo || !value) {
      throw DataError(at + ": bin_lo must be an integer and count a number");
    }
    if (!seen.emplace(std::pair{domain, static_cast<int>(*lo)}, line_no).second) {
      throw DataError(at + ": duplicate row for " + domain + " " + std::to_string(*lo));
    }
    if (domain == "intervention_mean") {
      if (*lo < 1 || *lo > kInterventionCount) {
        throw DataError(at + ": intervention index must be 1..35");
      }
      means[static_cast<std::size_t>(*lo - 1)] = *value;
      seen_mean[static_cast<std::size_t>(*lo - 1)] = true;
      continue;
    }
    HistogramDomain hd;
    try {
      hd = parse_histogram_domain(domain);
    } catch (const UsageError&) {
      throw DataError(at + ": unknown domain '" + domain +
                      "' (expected preference, shift or intervention_mean)");
    }
    auto& hist = hd == HistogramDomain::preference ? ref.preference : ref.shift;
    if (!hist) {
      hist = Histogram::empty(hd);
    }
    const auto offset = *lo - domain_min(hd);
    if (offset < 0 || offset % kBinWidth != 0 ||
        static_cast<std::size_t>(offset / kBinWidth) >= hist->bins()) {
      throw DataError(at + ": bin_lo " + std::to_string(*lo) + " is not a " + domain +
                      " bin boundary");
    }
    if (*value < 0 || *value != std::floor(*value)) {
      throw DataError(at + ": histogram count must be a non-negative integer");
    }
    const auto count = static_cast<std::uint64_t>(*value);
    hist->counts[static_cast<std::size_t>(offset / kBinWidth)] = count;
    hist->total += count;
  }
  if (std::any_of(seen_mean.begin(), seen_mean.end(), [](bool b) { return b; })) {
    InterventionEffectTable table;
    for (std::size_t i = 0; i < means.size(); ++i) {
      if (seen_mean[i]) {
        table.effects[i] = {means[i], 1};
      }
    }
    ref.intervention_means = table;
  }
  return ref;
}

ReferenceData ReferenceData::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path), path.string());
}

namespace {

std::vector<double> expand_midpoints(const Histogram& hist) {
  std::vector<double> out;
  out.reserve(hist.total);
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    out.insert(out.end(), hist.counts[i], hist.midpoint(i));
  }
  return out;
}

ReportRow describe(std::string_view panel, std::string_view setting, const Histogram& hist) {
  ReportRow row;
  row.panel = panel;
  row.setting = setting;
  row.kl_u = kl_divergence(hist, uniform_histogram(hist.domain));
  row.skew = skewness(hist);
  return row;
}

}  // namespace

ComparisonReport comparison_report(std::string_view setting, std::span<const TrialRecord> records,
                                   const ReferenceData* reference,
                                   const InterventionCatalog& catalog) {
  ComparisonReport report;
  std::vector<double> shifts;
  std::vector<double> pres;
  for (const auto& r : records) {
    if (r.valid && r.shift) shifts.push_back(*r.shift);
    if (r.pre) pres.push_back(*r.pre);
  }
  report.reference_missing =
      reference == nullptr || (!reference->shift && !reference->preference);

  const auto panel = [&](std::string_view name, const std::vector<double>& samples,
                         HistogramDomain domain, const std::optional<Histogram>& ref_hist) {
    if (ref_hist && ref_hist->total >= 3) {
      report.rows.push_back(describe(name, "reference", *ref_hist));
    }
    const auto hist = discretize(samples, domain);
    auto row = describe(name, setting, hist);
    if (ref_hist) {
      row.kl_s = kl_divergence(hist, *ref_hist);
      const auto ref_samples = expand_midpoints(*ref_hist);
      if (samples.size() >= kMannWhitneyMinSample && ref_samples.size() >= kMannWhitneyMinSample) {
        row.p = mann_whitney_u(samples, ref_samples).p;
      } else {
        report.warnings.push_back(std::string(name) +
                                  ": too few samples for the Mann-Whitney test");
      }
    } else if (reference != nullptr) {
      report.warnings.push_back("reference has no " + std::string(to_string(domain)) +
                                " histogram");
    }
    return row;
  };

  auto shift_row = panel("shift", shifts, HistogramDomain::shift,
                         reference ? reference->shift : std::nullopt);
  if (reference != nullptr && reference->intervention_means) {
    const auto pair =
        correlate_effects(per_intervention_means(records, catalog), *reference->intervention_means);
    shift_row.c_p = pair.pearson;
    shift_row.c_s = pair.spearman;
    if (pair.indices.size() < 3) {
      report.warnings.push_back("fewer than three interventions shared with the reference");
    } else if (!pair.pearson) {
      report.warnings.push_back("per-intervention means have zero variance");
    }
  }
  report.rows.push_back(std::move(shift_row));

  auto initial_row = panel("initial", pres, HistogramDomain::preference,
                           reference ? reference->preference : std::nullopt);
  const auto [lo, hi] = std::minmax_element(pres.begin(), pres.end());
  initial_row.range_min = static_cast<int>(*lo);
  initial_row.range_max = static_cast<int>(*hi);
  report.rows.push_back(std::move(initial_row));
  return report;
}

void require_reference(const ComparisonReport& report) {
  if (report.reference_missing) {
    throw ReferenceRequiredError(
        "no reference distribution: KL^S and p-value need --reference (KL^U and Skew computed)");
  }
}

std::string format_number(std::optional<double> value) {
  return value ? fmt::format("{}", *value) : std::string();
}

namespace {

std::string format_int(std::optional<int> value) {
  return value ? std::to_string(*value) : std::string();
}

}  // namespace

void write_report_table(std::ostream& out, const ComparisonReport& report) {
  out << "panel,setting,KL_S,KL_U,Skew,p_value,c_P,c_S,range_min,range_max\n";
  for (const auto& r : report.rows) {
    out << r.panel << ',' << r.setting << ',' << format_number(r.kl_s) << ','
        << format_number(r.kl_u) << ',' << format_number(r.skew) << ',' << format_number(r.p)
        << ',' << format_number(r.c_p) << ',' << format_number(r.c_s) << ','
        << format_int(r.range_min) << ',' << format_int(r.range_max) << '\n';
  }
}

void write_report_long(std::ostream& out, const ComparisonReport& report) {
  out << "panel,setting,measure,value\n";
  for (const auto& r : report.rows) {
    const std::pair<std::string_view, std::optional<double>> measures[] = {
        {"KL_S", r.kl_s}, {"KL_U", r.kl_u}, {"Skew", r.skew}, {"p_value", r.p},
        {"c_P", r.c_p},   {"c_S", r.c_s}};
    for (const auto& [name, value] : measures) {
      if (value) {
        out << r.panel << ',' << r.setting << ',' << name << ',' << format_number(value) << '\n';
      }
    }
  }
}

}  // namespace pearrl
