// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grafiq/error.hpp"

namespace grafiq {

enum class Label { Impostor = 0, Genuine = 1 };

struct ComparisonRecord {
  std::string id_a;
  std::string id_b;
  double similarity = 0.0;
  Label label = Label::Impostor;
  double pair_quality = 0.0;  // min of the two image qualities
};

inline double pair_quality(double quality_a, double quality_b) { return quality_a < quality_b ? quality_a : quality_b; }

// dot(a, b) / (|a| |b|). Throws DegenerateEmbedding for a zero vector and
// Dimension for a length mismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ThresholdResult {
  double threshold = 0.0;
  // Fewer than 1/fmr impostors: the FMR grid is too coarse for the target.
  bool insufficient_impostors = false;
};

// Smallest observed impostor score t with fraction(impostor >= t) <= fmr;
// just above the largest impostor when no observed score qualifies.
// Comparisons are accepted when similarity >= threshold.
ThresholdResult threshold_at_fmr(std::span<const double> impostor_scores, double fmr_target);

struct FnmrResult {
  double fnmr = 0.0;
  bool empty = false;  // no genuine scores; fnmr reported as 0
};

// fraction(genuine < threshold)
FnmrResult fnmr_at(std::span<const double> genuine_scores, double threshold);

struct EdcGrid {
  double max_discard = 0.95;
  double step = 0.01;
};

// {0, step, 2*step, ...} up to max_discard, which is always the last point.
std::vector<double> discard_grid(const EdcGrid& grid);

// Number of comparisons removed at discard fraction d out of n.
std::size_t discard_count(double fraction, std::size_t n);

struct EdcPoint {
  double discard_fraction = 0.0;
  double fnmr = 0.0;
  std::size_t genuine_retained = 0;
};

struct EdcCurve {
  double fmr_target = 0.0;
  double threshold = 0.0;
  std::vector<EdcPoint> points;
  double auc = 0.0;  // trapezoidal area divided by max_discard
  bool insufficient_impostors = false;
  bool empty_genuine = false;  // some grid point kept no genuine comparison
};

// Error-versus-discard curve. The threshold is fixed once from all impostor
// scores; at every grid point the lowest-quality fraction of comparisons
// (stable in input order on ties) is removed and FNMR is recomputed on the
// surviving genuine comparisons. Throws Usage when either label is missing.
EdcCurve edc(std::span<const ComparisonRecord> records, double fmr_target, const EdcGrid& grid = {});

// Normalized trapezoidal area of a curve.
double edc_auc(std::span<const EdcPoint> points);

struct AucEntry {
  std::string method;
  std::string benchmark;
  double fmr = 0.0;
  double auc = 0.0;
};

struct AucTable {
  struct Row {
    std::string method;
    double fmr = 0.0;
    std::vector<std::optional<double>> aucs;  // aligned with benchmarks
    double mean = 0.0;                        // over present cells
  };
  std::vector<std::string> benchmarks;
  std::vector<Row> rows;
};

// One row per (method, fmr), one column per benchmark, plus the row mean.
AucTable edc_table(std::span<const AucEntry> entries);

// CSV header: method,fmr,<benchmark...>,mean
std::string format_auc_table_csv(const AucTable& table);
AucTable parse_auc_table_csv(std::string_view csv);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace grafiq
