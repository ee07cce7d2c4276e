// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace grafiq {

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty())
    throw Error(ErrorCode::Dimension, "cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                                          std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::DegenerateEmbedding, "cosine_similarity: zero embedding");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_similarity(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

ThresholdResult threshold_at_fmr(std::span<const double> impostor_scores, double fmr_target) {
  if (impostor_scores.empty()) throw Error(ErrorCode::Usage, "threshold_at_fmr: no impostor scores");
  if (!(fmr_target > 0.0 && fmr_target < 1.0)) throw Error(ErrorCode::Usage, "threshold_at_fmr: fmr must be in (0,1)");
  std::vector<double> sorted(impostor_scores.begin(), impostor_scores.end());
  for (double s : sorted) {
    if (std::isnan(s)) throw Error(ErrorCode::Usage, "threshold_at_fmr: NaN score");
  }
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());

  ThresholdResult result;
  result.insufficient_impostors = n * fmr_target < 1.0;
  // Walk distinct values from the top; count(>= v) only grows, so the last
  // admissible value is the smallest one.
  double best = std::nextafter(sorted.front(), std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (static_cast<double>(j) / n > fmr_target) break;
    best = sorted[i];
    i = j;
  }
  result.threshold = best;
  return result;
}

FnmrResult fnmr_at(std::span<const double> genuine_scores, double threshold) {
  if (genuine_scores.empty()) return {0.0, true};
  std::size_t rejected = 0;
  for (double s : genuine_scores) rejected += s < threshold;
  return {static_cast<double>(rejected) / static_cast<double>(genuine_scores.size()), false};
}

std::vector<double> discard_grid(const EdcGrid& grid) {
  if (!(grid.step > 0.0) || !(grid.max_discard > 0.0) || grid.max_discard >= 1.0 || grid.step > grid.max_discard)
    throw Error(ErrorCode::Usage, "discard grid needs 0 < step <= max_discard < 1");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double d = static_cast<double>(i) * grid.step;
    if (d > grid.max_discard + 1e-12) break;
    out.push_back(std::min(d, grid.max_discard));
  }
  if (out.back() < grid.max_discard - 1e-12) out.push_back(grid.max_discard);
  else out.back() = grid.max_discard;
  return out;
}

std::size_t discard_count(double fraction, std::size_t n) {
  const double raw = std::floor(fraction * static_cast<double>(n) + 1e-9);
  if (raw <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(raw));
}

double edc_auc(std::span<const EdcPoint> points) {
  if (points.size() < 2) return points.empty() ? 0.0 : points.front().fnmr;
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double w = points[i].discard_fraction - points[i - 1].discard_fraction;
    area += w * (points[i].fnmr + points[i - 1].fnmr) / 2.0;
  }
  return area / points.back().discard_fraction;
}

EdcCurve edc(std::span<const ComparisonRecord> records, double fmr_target, const EdcGrid& grid) {
  std::vector<double> genuine, impostor;
  for (const auto& r : records) {
    if (std::isnan(r.pair_quality) || std::isnan(r.similarity))
      throw Error(ErrorCode::Usage, "edc: NaN quality or similarity for " + r.id_a + "," + r.id_b);
    (r.label == Label::Genuine ? genuine : impostor).push_back(r.similarity);
  }
  if (genuine.empty() || impostor.empty()) throw Error(ErrorCode::Usage, "edc: need both genuine and impostor comparisons");

  EdcCurve curve;
  curve.fmr_target = fmr_target;
  const ThresholdResult thr = threshold_at_fmr(impostor, fmr_target);
  curve.threshold = thr.threshold;
  curve.insufficient_impostors = thr.insufficient_impostors;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].pair_quality < records[b].pair_quality; });

  // prefix[k]: genuine / false-non-match counts among the k lowest-quality comparisons
  std::vector<std::size_t> gen_prefix(records.size() + 1, 0), fnm_prefix(records.size() + 1, 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = records[order[k]];
    const bool g = r.label == Label::Genuine;
    gen_prefix[k + 1] = gen_prefix[k] + g;
    fnm_prefix[k + 1] = fnm_prefix[k] + (g && r.similarity < curve.threshold);
  }
  const std::size_t total_gen = gen_prefix.back(), total_fnm = fnm_prefix.back();

  for (double d : discard_grid(grid)) {
    const std::size_t removed = discard_count(d, records.size());
    const std::size_t kept = total_gen - gen_prefix[removed];
    const std::size_t misses = total_fnm - fnm_prefix[removed];
    EdcPoint p;
    p.discard_fraction = d;
    p.genuine_retained = kept;
    if (kept == 0) {
      curve.empty_genuine = true;
      p.fnmr = 0.0;
    } else {
      p.fnmr = static_cast<double>(misses) / static_cast<double>(kept);
    }
    curve.points.push_back(p);
  }
  curve.auc = edc_auc(curve.points);
  return curve;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

AucTable edc_table(std::span<const AucEntry> entries) {
  AucTable table;
  for (const auto& e : entries) {
    if (std::find(table.benchmarks.begin(), table.benchmarks.end(), e.benchmark) == table.benchmarks.end())
      table.benchmarks.push_back(e.benchmark);
  }
  for (const auto& e : entries) {
    auto row = std::find_if(table.rows.begin(), table.rows.end(),
                            [&](const AucTable::Row& r) { return r.method == e.method && r.fmr == e.fmr; });
    if (row == table.rows.end()) {
      table.rows.push_back({e.method, e.fmr, std::vector<std::optional<double>>(table.benchmarks.size()), 0.0});
      row = std::prev(table.rows.end());
    }
    const auto col = std::find(table.benchmarks.begin(), table.benchmarks.end(), e.benchmark) - table.benchmarks.begin();
    row->aucs[static_cast<std::size_t>(col)] = e.auc;
  }
  // Methods keep first-appearance order; within a method the larger FMR comes first.
  std::vector<std::string> methods;
  for (const auto& r : table.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [&](const AucTable::Row& a, const AucTable::Row& b) {
    const auto ma = std::find(methods.begin(), methods.end(), a.method);
    const auto mb = std::find(methods.begin(), methods.end(), b.method);
    if (ma != mb) return ma < mb;
    return a.fmr > b.fmr;
  });
  for (auto& r : table.rows) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : r.aucs) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    r.mean = n ? sum / static_cast<double>(n) : 0.0;
  }
  return table;
}

std::string format_auc_table_csv(const AucTable& table) {
  std::ostringstream os;
  os << "method,fmr";
  for (const auto& b : table.benchmarks) os << ',' << b;
  os << ",mean\n";
  for (const auto& r : table.rows) {
    os << r.method << ',' << format_double(r.fmr);
    for (const auto& v : r.aucs) {
      os << ',';
      if (v) os << format_double(*v);
    }
    os << ',' << format_double(r.mean) << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::Usage, "AUC table line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

AucTable parse_auc_table_csv(std::string_view csv) {
  AucTable table;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (line_no == 1) {
      if (cells.size() < 3 || cells[0] != "method" || cells[1] != "fmr" || cells.back() != "mean")
        throw Error(ErrorCode::Usage, "AUC table: unexpected header");
      table.benchmarks.assign(cells.begin() + 2, cells.end() - 1);
      continue;
    }
    if (cells.size() != table.benchmarks.size() + 3)
      throw Error(ErrorCode::Usage, "AUC table line " + std::to_string(line_no) + ": wrong column count");
    AucTable::Row row;
    row.method = cells[0];
    row.fmr = parse_number(cells[1], line_no);
    for (std::size_t i = 0; i < table.benchmarks.size(); ++i) {
      const std::string& c = cells[2 + i];
      row.aucs.push_back(c.empty() ? std::nullopt : std::optional<double>(parse_number(c, line_no)));
    }
    row.mean = parse_number(cells.back(), line_no);
    table.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw Error(ErrorCode::Usage, "AUC table: empty input");
  return table;
}

}  // namespace grafiq
