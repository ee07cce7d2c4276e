// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/evaluation.hpp"

#include "golden_data.hpp"
#include "testing.hpp"

namespace {

namespace ge = golden::evaluation;
using grafiq::ComparisonRecord;
using grafiq::ErrorCode;
using grafiq::Label;

ComparisonRecord rec(double sim, bool genuine, double q) {
  ComparisonRecord r;
  r.similarity = sim;
  r.label = genuine ? Label::Genuine : Label::Impostor;
  r.pair_quality = q;
  return r;
}

TEST(Cosine, MatchesOracle) {
  const auto a = ge::cos_a.values;
  const auto b = ge::cos_b.values;
  EXPECT_LE(testing_support::rel_error(grafiq::cosine_similarity(std::span<const double>(a), std::span<const double>(b)),
                                       ge::cos_ab),
            1e-14);
}

TEST(Cosine, SelfSimilarityIsOne) {
  const std::vector<float> v{0.3f, -1.2f, 4.0f};
  EXPECT_DOUBLE_EQ(grafiq::cosine_similarity(std::span<const float>(v), std::span<const float>(v)), 1.0);
}

TEST(Cosine, AllPairsMatchOracle) {
  const auto& e = ge::pairs_embeddings;
  const std::size_t dim = e.shape[1];
  std::size_t k = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = i + 1; j < 10; ++j, ++k) {
      std::vector<float> a(dim), b(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        a[d] = static_cast<float>(e.values[i * dim + d]);
        b[d] = static_cast<float>(e.values[j * dim + d]);
      }
      EXPECT_NEAR(grafiq::cosine_similarity(std::span<const float>(a), std::span<const float>(b)),
                  ge::pairs_similarities[k], 1e-12);
    }
  }
  EXPECT_EQ(k, 45u);
}

TEST(Cosine, DegenerateAndMismatched) {
  const std::vector<float> z(4, 0.0f), v{1, 2, 3, 4}, w{1, 2};
  EXPECT_GRAFIQ_ERROR(grafiq::cosine_similarity(std::span<const float>(z), std::span<const float>(v)),
                      ErrorCode::DegenerateEmbedding);
  EXPECT_GRAFIQ_ERROR(grafiq::cosine_similarity(std::span<const float>(v), std::span<const float>(w)),
                      ErrorCode::Dimension);
}

TEST(Threshold, MatchesOracle) {
  for (const auto& c : ge::thr_cases) {
    const auto t = grafiq::threshold_at_fmr(ge::thr_impostors, c.fmr);
    EXPECT_EQ(t.threshold, c.threshold) << c.fmr;
    EXPECT_EQ(t.insufficient_impostors, c.insufficient) << c.fmr;
    EXPECT_EQ(grafiq::fnmr_at(ge::thr_genuine, t.threshold).fnmr, c.fnmr) << c.fmr;
  }
}

TEST(Threshold, SmallHandCases) {
  const std::vector<double> imp{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(grafiq::threshold_at_fmr(imp, 0.25).threshold, 0.4);
  EXPECT_EQ(grafiq::threshold_at_fmr(imp, 0.5).threshold, 0.3);
  const auto strict = grafiq::threshold_at_fmr(imp, 0.1);
  EXPECT_GT(strict.threshold, 0.4);
  EXPECT_EQ(strict.threshold, std::nextafter(0.4, 1.0));
  EXPECT_TRUE(strict.insufficient_impostors);
  const std::vector<double> ties{0.5, 0.5, 0.1, 0.0};
  EXPECT_EQ(grafiq::threshold_at_fmr(ties, 0.25).threshold, std::nextafter(0.5, 1.0));
  EXPECT_GRAFIQ_ERROR(grafiq::threshold_at_fmr(imp, 0.0), ErrorCode::Usage);
  EXPECT_GRAFIQ_ERROR(grafiq::threshold_at_fmr(std::vector<double>{}, 0.1), ErrorCode::Usage);
}

TEST(Fnmr, StrictlyBelowThresholdIsRejected) {
  const std::vector<double> gen{0.1, 0.5, 0.5, 0.9};
  EXPECT_EQ(grafiq::fnmr_at(gen, 0.5).fnmr, 0.25);
  EXPECT_TRUE(grafiq::fnmr_at(std::vector<double>{}, 0.5).empty);
}

TEST(DiscardGrid, DefaultGrid) {
  const auto g = grafiq::discard_grid({});
  ASSERT_EQ(g.size(), 96u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 0.95);
  const auto odd = grafiq::discard_grid({0.5, 0.2});
  EXPECT_EQ(odd, (std::vector<double>{0.0, 0.2, 0.4, 0.5}));
  EXPECT_GRAFIQ_ERROR(grafiq::discard_grid({1.0, 0.1}), ErrorCode::Usage);
}

TEST(DiscardCount, FloorWithRoundingGuard) {
  EXPECT_EQ(grafiq::discard_count(0.0, 100), 0u);
  EXPECT_EQ(grafiq::discard_count(0.07, 100), 7u);  // 0.07 * 100 = 7.000000000000001
  EXPECT_EQ(grafiq::discard_count(0.29, 100), 29u); // 0.29 * 100 = 28.999999999999996
  EXPECT_EQ(grafiq::discard_count(0.5, 3), 1u);
}

TEST(Edc, MatchesBruteForceGolden) {
  std::vector<ComparisonRecord> records;
  for (const auto& c : ge::edc200_records) records.push_back(rec(c.similarity, c.genuine != 0, c.pair_quality));
  const auto check = [&](double fmr, double thr, double auc, const std::vector<double>& fnmr) {
    const auto curve = grafiq::edc(records, fmr);
    EXPECT_EQ(curve.threshold, thr);
    ASSERT_EQ(curve.points.size(), fnmr.size());
    for (std::size_t i = 0; i < fnmr.size(); ++i) EXPECT_NEAR(curve.points[i].fnmr, fnmr[i], 1e-12) << i;
    EXPECT_NEAR(curve.auc, auc, 1e-12);
  };
  check(0.1, ge::edc200_fmr0_1_threshold, ge::edc200_fmr0_1_auc, ge::edc200_fmr0_1_fnmr);
  check(0.01, ge::edc200_fmr0_01_threshold, ge::edc200_fmr0_01_auc, ge::edc200_fmr0_01_fnmr);
}

TEST(Edc, ConstantQualityGivesFlatCurve) {
  // Ties go in input order, so the curve is flat when every discarded
  // prefix keeps the label mix: period-3 input, 3-record grid steps.
  std::vector<ComparisonRecord> r;
  for (int i = 0; i < 100; ++i) {
    r.push_back(rec(-0.5, true, 0.5));
    r.push_back(rec(0.9, true, 0.5));
    r.push_back(rec(0.001 * i, false, 0.5));
  }
  const auto curve = grafiq::edc(r, 0.05);
  ASSERT_EQ(curve.points.size(), 96u);
  for (const auto& p : curve.points) EXPECT_EQ(p.fnmr, curve.points.front().fnmr);
  EXPECT_DOUBLE_EQ(curve.points.front().fnmr, 0.5);
  EXPECT_DOUBLE_EQ(curve.auc, curve.points.front().fnmr);
}

TEST(Edc, OracleQualityDrivesCurveToZero) {
  std::vector<ComparisonRecord> r;
  for (int i = 0; i < 50; ++i) r.push_back(rec(0.0 + 0.001 * i, false, 0.5));
  r.push_back(rec(0.01, true, -1.0));  // false non-match, worst quality
  for (int i = 0; i < 20; ++i) r.push_back(rec(0.8, true, 1.0));
  const auto curve = grafiq::edc(r, 0.1, {0.5, 0.01});
  for (std::size_t i = 1; i < curve.points.size(); ++i) EXPECT_LE(curve.points[i].fnmr, curve.points[i - 1].fnmr);
  EXPECT_EQ(curve.points.back().fnmr, 0.0);
  EXPECT_GT(curve.points.front().fnmr, 0.0);
}

TEST(Edc, ThresholdFixedAcrossDiscards) {
  // Discarding impostors must not move the threshold.
  std::vector<ComparisonRecord> r{rec(0.3, false, -5), rec(0.2, false, -4), rec(0.1, false, 1), rec(0.0, false, 1),
                                  rec(0.25, true, 2), rec(0.15, true, 2)};
  const auto curve = grafiq::edc(r, 0.25, {0.5, 0.25});
  EXPECT_EQ(curve.threshold, 0.3);
  for (const auto& p : curve.points) EXPECT_EQ(p.fnmr, 1.0);
}

TEST(Edc, StableOrderOnTies) {
  // Equal qualities: the earlier record is discarded first.
  std::vector<ComparisonRecord> r{rec(0.01, true, 0.0), rec(0.9, true, 0.0), rec(0.0, false, 0.0),
                                  rec(0.05, false, 1.0)};
  const auto curve = grafiq::edc(r, 0.5, {0.25, 0.25});
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.points[0].fnmr, 0.5);
  EXPECT_EQ(curve.points[1].fnmr, 0.0);
}

TEST(Edc, EmptyGenuineFlagged) {
  std::vector<ComparisonRecord> r{rec(0.1, true, -1), rec(0.0, false, 1), rec(0.2, false, 1), rec(0.3, false, 1)};
  const auto curve = grafiq::edc(r, 0.5, {0.5, 0.25});
  EXPECT_TRUE(curve.empty_genuine);
  EXPECT_EQ(curve.points.back().genuine_retained, 0u);
}

TEST(Edc, NeedsBothLabels) {
  std::vector<ComparisonRecord> r{rec(0.1, true, 1)};
  EXPECT_GRAFIQ_ERROR(grafiq::edc(r, 0.1), ErrorCode::Usage);
}

TEST(EdcAuc, Trapezoid) {
  std::vector<grafiq::EdcPoint> p{{0.0, 0.2, 0}, {0.5, 0.1, 0}, {1.0, 0.0, 0}};
  EXPECT_DOUBLE_EQ(grafiq::edc_auc(p), 0.1);
}

TEST(AucTable, MeanAndLayout) {
  const std::vector<grafiq::AucEntry> entries{{"grad", "a", 0.001, 0.02}, {"grad", "b", 0.001, 0.04},
                                              {"grad", "a", 0.0001, 0.05}, {"mse", "b", 0.001, 0.07}};
  const auto table = grafiq::edc_table(entries);
  EXPECT_EQ(table.benchmarks, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(table.rows[0].mean, 0.03);
  const std::string csv = grafiq::format_auc_table_csv(table);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,fmr,a,b,mean");
  const auto back = grafiq::parse_auc_table_csv(csv);
  EXPECT_EQ(back.benchmarks, table.benchmarks);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].method, table.rows[i].method);
    EXPECT_EQ(back.rows[i].aucs, table.rows[i].aucs);
    EXPECT_EQ(back.rows[i].mean, table.rows[i].mean);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(grafiq::format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(grafiq::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

}  // namespace
