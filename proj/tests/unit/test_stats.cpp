#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "pearrl/errors.hpp"
#include "pearrl/stats.hpp"
#include "stat_oracles.hpp"

namespace pearrl {
namespace {

using namespace oracle;

Histogram random_histogram(std::mt19937_64& gen, HistogramDomain d) {
  auto h = Histogram::empty(d);
  std::uniform_int_distribution<std::uint64_t> count(0, 60);
  for (auto& c : h.counts) {
    c = count(gen);
    h.total += c;
  }
  if (h.counts[0] == h.total) {
    h.counts[1] += 1;
    h.total += 1;
  }
  return h;
}

// ---- discretize ---------------------------------------------------------

TEST(Discretize, PreferenceEdges) {
  const std::vector<double> xs = {0, 9, 10, 100};
  const auto h = discretize(xs, HistogramDomain::preference);
  ASSERT_EQ(h.bins(), 10u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[9], 1u);
  EXPECT_EQ(h.total, 4u);
}

TEST(Discretize, ShiftEdges) {
  const std::vector<double> xs = {-100, 0, 99};
  const auto h = discretize(xs, HistogramDomain::shift);
  ASSERT_EQ(h.bins(), 20u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[10], 1u);
  EXPECT_EQ(h.counts[19], 1u);
  EXPECT_EQ(discretize(std::vector<double>{100}, HistogramDomain::shift).counts[19], 1u);
}

TEST(Discretize, OutOfDomainNamesSample) {
  try {
    discretize(std::vector<double>{50, 101}, HistogramDomain::preference);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("101"), std::string::npos);
  }
  EXPECT_THROW(discretize(std::vector<double>{-1}, HistogramDomain::preference), DataError);
  EXPECT_THROW(discretize(std::vector<double>{std::nan("")}, HistogramDomain::shift), DataError);
}

TEST(Discretize, UniformDrawLawOfLargeNumbers) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = u(gen);
  const auto h = discretize(xs, HistogramDomain::preference);
  for (auto c : h.counts) EXPECT_LT(std::abs(static_cast<double>(c) / 1e5 - 0.1), 0.01);
}

TEST(Discretize, MidpointsPreserveCountAndMeanWithinHalfBin) {
  std::mt19937_64 gen(2);
  std::uniform_int_distribution<int> u(-100, 100);
  std::vector<double> xs(5000);
  double mean = 0.0;
  for (auto& x : xs) {
    x = u(gen);
    mean += x;
  }
  mean /= static_cast<double>(xs.size());
  const auto h = discretize(xs, HistogramDomain::shift);
  double mid_mean = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) mid_mean += static_cast<double>(h.counts[i]) * h.midpoint(i);
  mid_mean /= static_cast<double>(h.total);
  EXPECT_EQ(h.total, xs.size());
  EXPECT_LE(std::abs(mid_mean - mean), 5.0);
}

// ---- KL -------------------------------------------------------------------

TEST(Kl, IdentityIsZero) {
  std::mt19937_64 gen(3);
  const auto h = random_histogram(gen, HistogramDomain::shift);
  EXPECT_NEAR(kl_divergence(h, h), 0.0, 1e-12);
}

TEST(Kl, PointMassAgainstUniform) {
  auto point = Histogram::empty(HistogramDomain::shift);
  point.counts[0] = 100;
  point.total = 100;
  const auto uniform = uniform_histogram(HistogramDomain::shift);
  // Closed form with 0.5 pseudo-counts: p0 = 100.5/110, others 0.5/110, q = 1/20.
  const double p0 = 100.5 / 110.0;
  const double pi = 0.5 / 110.0;
  const double closed = p0 * std::log(p0 * 20.0) + 19.0 * pi * std::log(pi * 20.0);
  EXPECT_NEAR(kl_divergence(point, uniform), closed, 1e-12);
  // With enough mass the smoothing washes out and the value tends to ln 20.
  point.counts[0] = 1000000;
  point.total = 1000000;
  EXPECT_NEAR(kl_divergence(point, uniform), std::log(20.0), 0.01);
}

TEST(Kl, Asymmetric) {
  auto p = Histogram::empty(HistogramDomain::preference);
  auto q = Histogram::empty(HistogramDomain::preference);
  p.counts = {50, 30, 10, 5, 3, 1, 1, 0, 0, 0};
  q.counts = {10, 10, 10, 10, 10, 10, 10, 10, 10, 10};
  p.total = 100;
  q.total = 100;
  EXPECT_GT(std::abs(kl_divergence(p, q) - kl_divergence(q, p)), 1e-3);
}

TEST(Kl, MismatchedDomainsIsUsageError) {
  EXPECT_THROW(kl_divergence(Histogram::empty(HistogramDomain::shift),
                             Histogram::empty(HistogramDomain::preference)),
               UsageError);
}

TEST(Kl, MatchesOracleAndIsNonnegative) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_histogram(gen, HistogramDomain::shift);
    const auto q = random_histogram(gen, HistogramDomain::shift);
    const double kl = kl_divergence(p, q);
    EXPECT_NEAR(kl, kl_oracle(p.counts, q.counts), 1e-9);
    EXPECT_GE(kl, 0.0);
  }
}

// ---- skew -----------------------------------------------------------------

TEST(Skew, SymmetricIsZero) {
  auto h = Histogram::empty(HistogramDomain::preference);
  h.counts = {1, 2, 3, 4, 5, 5, 4, 3, 2, 1};
  h.total = 30;
  EXPECT_NEAR(*skewness(h), 0.0, 1e-12);
}

TEST(Skew, UpperMassIsNegative) {
  auto h = Histogram::empty(HistogramDomain::preference);
  h.counts = {1, 1, 1, 2, 3, 5, 8, 12, 20, 25};
  h.total = 78;
  EXPECT_LT(*skewness(h), 0.0);
}

TEST(Skew, MatchesOracle) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 50; ++i) {
    const auto h = random_histogram(gen, i % 2 ? HistogramDomain::shift : HistogramDomain::preference);
    EXPECT_NEAR(*skewness(h), skew_oracle(h), 1e-9);
  }
}

TEST(Skew, DegenerateCases) {
  auto h = Histogram::empty(HistogramDomain::shift);
  h.counts[4] = 10;
  h.total = 10;
  EXPECT_FALSE(skewness(h).has_value());
  h.counts[4] = 2;
  h.total = 2;
  EXPECT_THROW(skewness(h), InsufficientDataError);
}

// ---- Mann-Whitney ---------------------------------------------------------

TEST(MannWhitney, IdenticalSamples) {
  std::vector<double> a = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
  EXPECT_GE(mann_whitney_u(a, a).p, 0.99);
}

TEST(MannWhitney, ExtremeSeparation) {
  std::vector<double> a, b;
  for (int i = 1; i <= 20; ++i) a.push_back(i);
  for (int i = 21; i <= 40; ++i) b.push_back(i);
  const auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_LT(r.p, 0.001);
  EXPECT_EQ(mann_whitney_u(b, a).u, 400.0);
}

TEST(MannWhitney, AllEqualIsDegenerate) {
  std::vector<double> a(10, 7.0);
  EXPECT_EQ(mann_whitney_u(a, a).p, 1.0);
}

TEST(MannWhitney, TooSmall) {
  std::vector<double> a(7, 1.0), b(8, 2.0);
  EXPECT_THROW(mann_whitney_u(a, b), InsufficientDataError);
}

TEST(MannWhitney, ShiftInvariant) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(30), b(40);
  for (auto& x : a) x = n(gen);
  for (auto& x : b) x = n(gen) + 0.5;
  auto a2 = a, b2 = b;
  for (auto& x : a2) x += 1000.0;
  for (auto& x : b2) x += 1000.0;
  EXPECT_DOUBLE_EQ(mann_whitney_u(a, b).p, mann_whitney_u(a2, b2).p);
}

TEST(MannWhitney, AgreesWithExactEnumeration) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> v(0, 20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = v(gen);
    for (auto& x : b) x = v(gen) + trial % 5;
    EXPECT_NEAR(mann_whitney_u(a, b).p, exact_mwu_p(a, b), 0.02) << "trial " << trial;
  }
}

// ---- correlations ---------------------------------------------------------

TEST(Correlation, AffineRelation) {
  std::vector<double> x = {1, 2, 3, 5, 8, 13};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  EXPECT_NEAR(*pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(*spearman(x, y), 1.0, 1e-12);
  std::vector<double> rev(x.rbegin(), x.rend());
  EXPECT_NEAR(*spearman(x, rev), -1.0, 1e-12);
}

TEST(Correlation, MatchesOracles) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0, 10);
  std::uniform_int_distribution<int> tie(0, 6);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(35), y(35);
    for (std::size_t k = 0; k < 35; ++k) {
      x[k] = i % 2 ? tie(gen) : n(gen);
      y[k] = 0.5 * x[k] + n(gen);
    }
    EXPECT_NEAR(*pearson(x, y), pearson_oracle(x, y), 1e-9);
    EXPECT_NEAR(*spearman(x, y), pearson_oracle(rank_oracle(x), rank_oracle(y)), 1e-9);
  }
}

TEST(Correlation, SpearmanMonotoneInvariant) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x(35), y(35);
  for (std::size_t k = 0; k < 35; ++k) {
    x[k] = n(gen);
    y[k] = x[k] + n(gen);
  }
  std::vector<double> ex;
  for (double v : x) ex.push_back(std::exp(v));
  EXPECT_NEAR(*spearman(x, y), *spearman(ex, y), 1e-12);
}

TEST(Correlation, Degenerate) {
  std::vector<double> flat(5, 1.0);
  std::vector<double> x = {1, 2, 3, 4, 5};
  EXPECT_FALSE(pearson(flat, x).has_value());
  EXPECT_FALSE(spearman(x, flat).has_value());
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), UsageError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2, 3}), UsageError);
}

TEST(Midranks, Ties) {
  EXPECT_EQ(midranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

// ---- per-intervention means ----------------------------------------------

TrialRecord static_record(std::uint64_t trial, int index, int shift, bool valid = true) {
  TrialRecord r;
  r.trial = trial;
  r.policy = "static";
  r.intervention_index = index;
  r.intervention = InterventionCatalog::defaults().text(index);
  r.valid = valid;
  if (valid) {
    r.pre = 50;
    r.post = 50 + shift;
    r.shift = shift;
    r.reward = normalize_reward(shift);
  }
  return r;
}

TEST(InterventionMeans, SingletonMeans) {
  std::vector<TrialRecord> records;
  for (int i = 1; i <= 35; ++i) records.push_back(static_record(static_cast<std::uint64_t>(i), i, i));
  const auto t = per_intervention_means(records, InterventionCatalog::defaults());
  for (int i = 1; i <= 35; ++i) {
    EXPECT_EQ(t.at(i).mean, static_cast<double>(i));
    EXPECT_EQ(t.at(i).count, 1u);
  }
  std::reverse(records.begin(), records.end());
  EXPECT_EQ(per_intervention_means(records, InterventionCatalog::defaults()), t);
}

TEST(InterventionMeans, InvalidAndMissingIndices) {
  std::vector<TrialRecord> records = {static_record(0, 3, 10), static_record(1, 3, 20),
                                      static_record(2, 4, 0, false)};
  auto by_text = static_record(3, 5, -6);
  by_text.intervention_index.reset();
  records.push_back(by_text);
  const auto t = per_intervention_means(records, InterventionCatalog::defaults());
  EXPECT_EQ(t.at(3).mean, 15.0);
  EXPECT_FALSE(t.at(4).mean.has_value());
  EXPECT_EQ(t.at(5).mean, -6.0);
  EXPECT_FALSE(t.at(1).mean.has_value());
}

// ---- reference file and report -------------------------------------------

TEST(Reference, ParseRows) {
  const auto ref = ReferenceData::parse(
      "domain,bin_lo,count\n"
      "# comment\n"
      "preference,0,5\npreference,90,7\n"
      "shift,-100,2\nshift,90,1\n"
      "intervention_mean,21,4.5\n");
  ASSERT_TRUE(ref.preference && ref.shift && ref.intervention_means);
  EXPECT_EQ(ref.preference->counts[9], 7u);
  EXPECT_EQ(ref.preference->total, 12u);
  EXPECT_EQ(ref.shift->counts[0], 2u);
  EXPECT_EQ(ref.intervention_means->at(21).mean, 4.5);
}

TEST(Reference, ParseErrors) {
  EXPECT_THROW(ReferenceData::parse("shift,-95,2\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("shift,100,2\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("mood,0,2\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("shift,0,2.5\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("shift,0,2\nshift,0,3\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("intervention_mean,36,1\n"), DataError);
  EXPECT_THROW(ReferenceData::parse("shift,0\n"), DataError);
}

std::vector<TrialRecord> replication_records(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> pre(20, 90);
  std::uniform_int_distribution<int> idx(1, 35);
  std::normal_distribution<double> noise(3, 8);
  std::vector<TrialRecord> out;
  for (int i = 0; i < n; ++i) {
    const int p = pre(gen);
    const int post = std::clamp(p + static_cast<int>(std::lround(noise(gen))), 0, 100);
    auto r = static_record(static_cast<std::uint64_t>(i), idx(gen), post - p);
    r.pre = p;
    r.post = post;
    out.push_back(r);
  }
  return out;
}

ReferenceData reference_from(const std::vector<TrialRecord>& records) {
  std::vector<double> pre, shift;
  for (const auto& r : records) {
    pre.push_back(*r.pre);
    shift.push_back(*r.shift);
  }
  ReferenceData ref;
  ref.preference = discretize(pre, HistogramDomain::preference);
  ref.shift = discretize(shift, HistogramDomain::shift);
  ref.intervention_means = per_intervention_means(records, InterventionCatalog::defaults());
  return ref;
}

TEST(Report, SelfComparison) {
  // A histogram reference is expanded at bin midpoints, so put the samples there.
  auto records = replication_records(600, 10);
  for (auto& r : records) {
    r.pre = *r.pre / 10 * 10 + 5;
    const auto shift = Histogram::empty(HistogramDomain::shift);
    r.shift = static_cast<int>(shift.midpoint(*shift.bin_of(*r.shift)));
  }
  const auto ref = reference_from(records);
  const auto report = comparison_report("self", records, &ref);
  EXPECT_FALSE(report.reference_missing);
  ASSERT_EQ(report.rows.size(), 4u);
  const auto& shift = report.rows[1];
  EXPECT_EQ(shift.panel, "shift");
  EXPECT_EQ(shift.setting, "self");
  EXPECT_NEAR(*shift.kl_s, 0.0, 1e-12);
  EXPECT_GE(*shift.p, 0.99);
  EXPECT_NEAR(*shift.c_p, 1.0, 1e-12);
  EXPECT_NEAR(*shift.c_s, 1.0, 1e-12);
  const auto& initial = report.rows[3];
  EXPECT_EQ(initial.panel, "initial");
  EXPECT_NEAR(*initial.kl_s, 0.0, 1e-12);
  EXPECT_TRUE(initial.range_min && initial.range_max);
  EXPECT_FALSE(initial.c_p.has_value());
  EXPECT_EQ(report.rows[0].setting, "reference");
  EXPECT_FALSE(report.rows[0].kl_s.has_value());
}

TEST(Report, UniformSettingHasZeroKlU) {
  std::vector<TrialRecord> records;
  std::uint64_t t = 0;
  for (int bin = 0; bin < 20; ++bin) {
    for (int k = 0; k < 5; ++k) {
      // pre 50 keeps every shift in range; pre itself is not under test.
      auto r = static_record(t++, 1, -100 + bin * 10 + 5 >= 50 ? 45 : -45);
      r.shift = -100 + bin * 10 + k;
      records.push_back(r);
    }
  }
  const auto report = comparison_report("u", records, nullptr);
  EXPECT_NEAR(*report.rows[0].kl_u, 0.0, 1e-12);
}

TEST(Report, MissingReference) {
  const auto records = replication_records(100, 11);
  const auto report = comparison_report("x", records, nullptr);
  EXPECT_TRUE(report.reference_missing);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& r : report.rows) {
    EXPECT_TRUE(r.kl_u.has_value());
    EXPECT_TRUE(r.skew.has_value());
    EXPECT_FALSE(r.kl_s.has_value());
    EXPECT_FALSE(r.p.has_value());
  }
  EXPECT_THROW(require_reference(report), ReferenceRequiredError);
}

TEST(Report, TableSchemaHasTheSixMeasures) {
  const auto records = replication_records(200, 12);
  const auto ref = reference_from(replication_records(200, 13));
  const auto report = comparison_report("s", records, &ref);
  std::ostringstream table;
  write_report_table(table, report);
  std::string header;
  std::getline(std::istringstream(table.str()) >> std::ws, header);
  EXPECT_EQ(header, "panel,setting,KL_S,KL_U,Skew,p_value,c_P,c_S,range_min,range_max");
  std::ostringstream long_form;
  write_report_long(long_form, report);
  for (const char* m : {"KL_S", "KL_U", "Skew", "p_value", "c_P", "c_S"}) {
    EXPECT_NE(long_form.str().find(std::string(",") + m + ","), std::string::npos) << m;
  }
}

}  // namespace
}  // namespace pearrl
