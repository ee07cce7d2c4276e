// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

// grafiq command-line front end. Talks to the engine only through the C API.

#include <glob.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "grafiq/grafiq.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace grafiq::cli;

namespace {

struct ApiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(grafiq_status s, const std::string& context) {
  if (s != GRAFIQ_OK)
    throw ApiError(context + ": " + grafiq_status_name(s) + ": " + grafiq_last_error());
}

struct NetworkDeleter {
  void operator()(grafiq_network* n) const { grafiq_network_free(n); }
};
struct EmbeddingsDeleter {
  void operator()(grafiq_embeddings* e) const { grafiq_embeddings_free(e); }
};
struct CurveDeleter {
  void operator()(grafiq_edc_curve* c) const { grafiq_edc_free(c); }
};
using NetworkPtr = std::unique_ptr<grafiq_network, NetworkDeleter>;
using EmbeddingsPtr = std::unique_ptr<grafiq_embeddings, EmbeddingsDeleter>;
using CurvePtr = std::unique_ptr<grafiq_edc_curve, CurveDeleter>;

const char* const kTapNames[GRAFIQ_TAP_COUNT] = {"image", "b1", "b2", "b3", "b4"};

grafiq_tap parse_tap(const std::string& s) {
  for (int i = 0; i < GRAFIQ_TAP_COUNT; ++i) {
    if (s == kTapNames[i]) return static_cast<grafiq_tap>(i);
  }
  throw ConfigError("unknown tap '" + s + "' (expected image, b1, b2, b3, b4 or all)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

unsigned parse_tap_mask(const std::string& s) {
  if (s == "all") return GRAFIQ_ALL_TAPS;
  unsigned mask = 0;
  for (const auto& part : split(s, ',')) mask |= GRAFIQ_TAP_BIT(parse_tap(part));
  return mask;
}

grafiq_precision parse_precision(const std::string& s) {
  if (s == "f32") return GRAFIQ_F32;
  if (s == "f64") return GRAFIQ_F64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

// Options shared by the subcommands. Only flags that were given on the
// command line take part in precedence resolution.
struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> values;
  std::map<std::string, std::vector<CLI::Option*>> options;

  void add(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help) {
    options[key].push_back(app->add_option(flag, values[key], help));
  }

  void add_flag(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help,
                const char* value_when_set) {
    auto* store = &values[key];
    options[key].push_back(app->add_flag_callback(flag, [store, value_when_set] { *store = value_when_set; }, help));
  }

  Settings settings() const {
    std::map<std::string, std::string> given;
    for (const auto& [key, opts] : options) {
      for (const CLI::Option* opt : opts) {
        if (opt->count() > 0) given[key] = values.at(key);
      }
    }
    std::map<std::string, std::string> file;
    if (!config.empty()) {
      file = read_config_file(config);
    } else if (const char* env = std::getenv("GRAFIQ_CONFIG"); env != nullptr && *env != '\0') {
      file = read_config_file(env);
    }
    return Settings(std::move(given), std::move(file));
  }
};

void add_config_option(CLI::App* app, CommonFlags& flags) {
  app->add_option("--config", flags.config, "key=value settings file (overridden by GRAFIQ_* and flags)");
}

std::string require(const Settings& s, const std::string& key, const std::string& flag) {
  auto v = s.get(key);
  if (!v || v->empty()) throw ConfigError("missing " + flag);
  return *v;
}

std::size_t jobs_of(const Settings& s) {
  const std::size_t jobs = parse_count(s.get_or("jobs", "1"), "--jobs");
  if (jobs < 1) throw ConfigError("--jobs must be at least 1");
  return jobs;
}

NetworkPtr load_network(const std::string& path) {
  grafiq_network* raw = nullptr;
  check(grafiq_network_load(path.c_str(), &raw), "loading model '" + path + "'");
  return NetworkPtr(raw);
}

std::vector<const char*> c_paths(const std::vector<ImageEntry>& images) {
  std::vector<const char*> out;
  out.reserve(images.size());
  for (const auto& e : images) out.push_back(e.path.c_str());
  return out;
}

// ---- score ---------------------------------------------------------------

int cmd_score(const CommonFlags& flags, const std::string& list) {
  const Settings s = flags.settings();
  grafiq_score_options o;
  grafiq_score_options_init(&o);
  o.tap_mask = parse_tap_mask(s.get_or("tap", "b2"));
  if (auto sel = s.get("select")) {
    o.selected_tap = parse_tap(*sel);
  } else if (!(o.tap_mask & GRAFIQ_TAP_BIT(GRAFIQ_TAP_B2))) {
    for (int i = 0; i < GRAFIQ_TAP_COUNT; ++i) {
      if (o.tap_mask & GRAFIQ_TAP_BIT(i)) {
        o.selected_tap = static_cast<grafiq_tap>(i);
        break;
      }
    }
  }
  o.tap_mask |= GRAFIQ_TAP_BIT(o.selected_tap);
  o.precision = parse_precision(s.get_or("precision", "f32"));
  o.jobs = jobs_of(s);
  o.observe_head = parse_bool(s.get_or("head_bn", "true"), "head_bn") ? 1 : 0;
  const std::string method = s.get_or("method", "gradient");
  if (method == "gradient") o.method = GRAFIQ_METHOD_GRADIENT;
  else if (method == "mse-bns") o.method = GRAFIQ_METHOD_MSE_BNS;
  else throw ConfigError("unknown method '" + method + "' (expected gradient or mse-bns)");
  const bool deterministic = parse_bool(s.get_or("deterministic", "false"), "deterministic");

  const NetworkPtr net = load_network(require(s, "model", "--model"));
  const std::vector<ImageEntry> images = read_image_list(list);

  const auto start = std::chrono::steady_clock::now();
  std::vector<grafiq_quality_report> reports(images.size());
  const auto paths = c_paths(images);
  check(grafiq_score_files(net.get(), paths.data(), paths.size(), &o, reports.data()), "scoring");

  std::vector<std::string> header{"image_id", "loss_bns"};
  std::vector<int> taps;
  for (int i = 0; i < GRAFIQ_TAP_COUNT; ++i) {
    if (o.tap_mask & GRAFIQ_TAP_BIT(i)) {
      taps.push_back(i);
      header.push_back(std::string("raw_") + kTapNames[i]);
    }
  }
  header.push_back("quality_selected");
  header.push_back("error");

  std::string out = join_csv(header) + "\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& r = reports[i];
    std::vector<std::string> row{images[i].id};
    if (r.status == GRAFIQ_OK) {
      row.push_back(number(r.loss_bns));
      // The baseline has no gradients; its raw columns stay empty.
      for (int t : taps) row.push_back(number(r.raw_magnitude[t]));
      row.push_back(number(r.selected_quality));
      row.push_back("");
    } else {
      ++failures;
      row.insert(row.end(), taps.size() + 2, "");
      row.push_back(std::string(grafiq_status_name(r.status)) + ": " + r.error);
      std::cerr << "grafiq: " << images[i].id << ": " << r.error << "\n";
    }
    out += join_csv(row) + "\n";
  }
  write_text_file(s.get_or("out", "-"), out);
  if (!deterministic) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "grafiq: scored " << images.size() - failures << "/" << images.size() << " images in " << secs
              << " s\n";
  }
  return failures ? kExitPartial : kExitOk;
}

// ---- embed / pairs -------------------------------------------------------

int cmd_embed(const CommonFlags& flags, const std::string& list) {
  const Settings s = flags.settings();
  const std::string out_path = require(s, "out", "--out");
  const NetworkPtr net = load_network(require(s, "model", "--model"));
  grafiq_network_info info{};
  check(grafiq_network_get_info(net.get(), &info), "model info");
  const std::vector<ImageEntry> images = read_image_list(list);
  std::set<std::string> seen;
  for (const auto& e : images) {
    if (!seen.insert(e.id).second) throw ConfigError("duplicate image id '" + e.id + "' in " + list);
  }

  std::vector<float> rows(images.size() * info.embedding_dim);
  std::vector<grafiq_item_result> results(images.size());
  const auto paths = c_paths(images);
  check(grafiq_embed_files(net.get(), paths.data(), paths.size(), parse_precision(s.get_or("precision", "f32")),
                           jobs_of(s), rows.data(), results.data()),
        "embedding");

  grafiq_embeddings* raw = nullptr;
  check(grafiq_embeddings_create(info.embedding_dim, &raw), "embeddings");
  EmbeddingsPtr set(raw);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (results[i].status != GRAFIQ_OK) {
      ++failures;
      std::cerr << "grafiq: " << images[i].id << ": " << results[i].error << "\n";
      continue;
    }
    check(grafiq_embeddings_add(set.get(), images[i].id.c_str(), rows.data() + i * info.embedding_dim), "embeddings");
  }
  check(grafiq_embeddings_save(set.get(), out_path.c_str()), "writing '" + out_path + "'");
  return failures ? kExitPartial : kExitOk;
}

int parse_label(const std::string& s, const std::string& where) {
  if (s == "1" || s == "genuine" || s == "mated") return 1;
  if (s == "0" || s == "impostor" || s == "non-mated") return 0;
  throw ConfigError(where + ": unknown label '" + s + "'");
}

std::string location(const std::string& file, const CsvRow& row) { return file + ":" + std::to_string(row.line); }

int cmd_pairs(const CommonFlags& flags, const std::string& embeddings_path, const std::string& pair_list) {
  const Settings s = flags.settings();
  grafiq_embeddings* raw = nullptr;
  check(grafiq_embeddings_load(embeddings_path.c_str(), &raw), "loading embeddings '" + embeddings_path + "'");
  EmbeddingsPtr set(raw);
  const std::size_t dim = grafiq_embeddings_dim(set.get());

  const auto rows = read_csv_file(pair_list);
  std::string out = "id_a,id_b,label,similarity\n";
  std::set<std::string> missing;
  std::size_t failures = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && f.size() >= 3 && f[0] == "id_a" && f[1] == "id_b" && f[2] == "label") continue;
    if (f.size() != 3) throw ConfigError(location(pair_list, rows[r]) + ": expected id_a,id_b,label");
    const int label = parse_label(f[2], location(pair_list, rows[r]));
    const float* a = grafiq_embeddings_find(set.get(), f[0].c_str());
    const float* b = grafiq_embeddings_find(set.get(), f[1].c_str());
    if (!a) missing.insert(f[0]);
    if (!b) missing.insert(f[1]);
    if (!a || !b) {
      ++failures;
      continue;
    }
    double sim = 0.0;
    if (grafiq_cosine_similarity(a, b, dim, &sim) != GRAFIQ_OK) {
      ++failures;
      std::cerr << "grafiq: " << location(pair_list, rows[r]) << ": " << grafiq_last_error() << "\n";
      continue;
    }
    out += join_csv({f[0], f[1], label ? "genuine" : "impostor", number(sim)}) + "\n";
  }
  if (!missing.empty()) {
    std::cerr << "grafiq: unknown image ids:";
    for (const auto& id : missing) std::cerr << " " << id;
    std::cerr << "\n";
  }
  write_text_file(s.get_or("out", "-"), out);
  return failures ? kExitPartial : kExitOk;
}

// ---- edc / table ---------------------------------------------------------

std::map<std::string, std::size_t> header_index(const std::vector<CsvRow>& rows, const std::string& file,
                                                const std::vector<std::string>& required) {
  if (rows.empty()) throw ConfigError(file + ": missing header");
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) idx.emplace(rows[0].fields[i], i);
  for (const auto& name : required) {
    if (!idx.count(name)) throw ConfigError(file + ":1: missing column '" + name + "'");
  }
  return idx;
}

const std::string& field_at(const CsvRow& row, std::size_t i, std::size_t width, const std::string& file) {
  if (row.fields.size() != width)
    throw ConfigError(location(file, row) + ": expected " + std::to_string(width) + " fields, got " +
                      std::to_string(row.fields.size()));
  return row.fields[i];
}

std::vector<double> parse_fmrs(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    const double v = parse_number(part, "--fmr");
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("--fmr must lie in (0, 1)");
    out.push_back(v);
  }
  return out;
}

int cmd_edc(const CommonFlags& flags, const std::string& sim_path, const std::string& quality_path,
            const std::string& quality_column) {
  const Settings s = flags.settings();
  const std::string prefix = require(s, "out", "--out");
  const std::vector<double> fmrs = parse_fmrs(s.get_or("fmr", "0.001,0.0001"));
  const double max_discard = parse_number(s.get_or("max_discard", "0.95"), "--max-discard");
  const double step = parse_number(s.get_or("step", "0.01"), "--step");

  const auto sims = read_csv_file(sim_path);
  const bool inline_quality = quality_path.empty();
  const auto sidx = header_index(sims, sim_path,
                                 inline_quality ? std::vector<std::string>{"label", "similarity", "pair_quality"}
                                                : std::vector<std::string>{"id_a", "id_b", "label", "similarity"});
  const std::size_t swidth = sims[0].fields.size();

  std::map<std::string, double> quality;
  if (!inline_quality) {
    const auto qrows = read_csv_file(quality_path);
    const auto qidx = header_index(qrows, quality_path, {"image_id", quality_column});
    const std::size_t qwidth = qrows[0].fields.size();
    for (std::size_t r = 1; r < qrows.size(); ++r) {
      const std::string& id = field_at(qrows[r], qidx.at("image_id"), qwidth, quality_path);
      const std::string& q = field_at(qrows[r], qidx.at(quality_column), qwidth, quality_path);
      if (q.empty()) continue;  // failed image
      quality[id] = parse_number(q, location(quality_path, qrows[r]));
    }
  }

  std::vector<grafiq_comparison> records;
  std::set<std::string> missing;
  for (std::size_t r = 1; r < sims.size(); ++r) {
    const auto& row = sims[r];
    grafiq_comparison c{};
    c.similarity = parse_number(field_at(row, sidx.at("similarity"), swidth, sim_path), location(sim_path, row));
    c.genuine = parse_label(field_at(row, sidx.at("label"), swidth, sim_path), location(sim_path, row));
    if (inline_quality) {
      c.pair_quality =
          parse_number(field_at(row, sidx.at("pair_quality"), swidth, sim_path), location(sim_path, row));
    } else {
      const std::string& a = field_at(row, sidx.at("id_a"), swidth, sim_path);
      const std::string& b = field_at(row, sidx.at("id_b"), swidth, sim_path);
      const auto qa = quality.find(a);
      const auto qb = quality.find(b);
      if (qa == quality.end()) missing.insert(a);
      if (qb == quality.end()) missing.insert(b);
      if (qa == quality.end() || qb == quality.end()) continue;
      c.pair_quality = std::min(qa->second, qb->second);
    }
    records.push_back(c);
  }
  if (!missing.empty()) {
    std::cerr << "grafiq: comparisons skipped, no quality for:";
    for (const auto& id : missing) std::cerr << " " << id;
    std::cerr << "\n";
  }

  const std::string method = s.get_or("method", quality_column);
  const std::string benchmark = s.get_or("benchmark", fs::path(sim_path).stem().string());
  for (double fmr : fmrs) {
    grafiq_edc_curve* raw = nullptr;
    check(grafiq_edc_compute(records.data(), records.size(), fmr, max_discard, step, &raw), "edc");
    CurvePtr curve(raw);
    std::string csv = "discard_fraction,fnmr\n";
    for (std::size_t i = 0; i < grafiq_edc_point_count(curve.get()); ++i) {
      double d = 0.0, f = 0.0;
      check(grafiq_edc_point(curve.get(), i, &d, &f), "edc");
      csv += number(d) + "," + number(f) + "\n";
    }
    const std::string base = prefix + "_fmr" + number(fmr);
    write_text_file(base + ".csv", csv);
    const unsigned bits = grafiq_edc_flags(curve.get());
    json side;
    side["method"] = method;
    side["benchmark"] = benchmark;
    side["fmr_target"] = fmr;
    side["threshold"] = grafiq_edc_threshold(curve.get());
    side["auc"] = grafiq_edc_auc(curve.get());
    side["max_discard"] = max_discard;
    side["step"] = step;
    side["comparisons"] = records.size();
    side["insufficient_impostors"] = (bits & GRAFIQ_EDC_INSUFFICIENT_IMPOSTORS) != 0;
    side["empty_genuine"] = (bits & GRAFIQ_EDC_EMPTY_GENUINE) != 0;
    write_text_file(base + ".json", side.dump(2) + "\n");
    if (bits & GRAFIQ_EDC_INSUFFICIENT_IMPOSTORS)
      std::cerr << "grafiq: fewer than 1/fmr impostor comparisons at fmr " << number(fmr) << "\n";
  }
  return missing.empty() ? kExitOk : kExitPartial;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    glob_t g{};
    const int rc = ::glob(p.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc == GLOB_NOMATCH) throw ConfigError("no sidecar matches '" + p + "'");
    if (rc != 0 && rc != GLOB_NOMATCH) throw ConfigError("cannot expand '" + p + "'");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_table(const CommonFlags& flags, const std::vector<std::string>& patterns) {
  const Settings s = flags.settings();
  const std::vector<std::string> files = expand_globs(patterns);
  std::vector<json> docs;
  std::vector<grafiq_auc_entry> entries;
  docs.reserve(files.size());
  for (const auto& file : files) {
    json j = json::parse(read_text_file(file), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError(file + ": not a JSON object");
    for (const char* key : {"method", "benchmark"}) {
      if (!j.contains(key) || !j[key].is_string()) throw ConfigError(file + ": missing string '" + key + "'");
    }
    for (const char* key : {"fmr_target", "auc"}) {
      if (!j.contains(key) || !j[key].is_number()) throw ConfigError(file + ": missing number '" + key + "'");
    }
    docs.push_back(std::move(j));
  }
  std::vector<std::string> methods(docs.size()), benchmarks(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    methods[i] = docs[i]["method"].get<std::string>();
    benchmarks[i] = docs[i]["benchmark"].get<std::string>();
    entries.push_back({methods[i].c_str(), benchmarks[i].c_str(), docs[i]["fmr_target"].get<double>(),
                       docs[i]["auc"].get<double>()});
  }
  char* csv = nullptr;
  check(grafiq_auc_table_csv(entries.data(), entries.size(), &csv), "table");
  const std::string text(csv);
  grafiq_string_free(csv);
  write_text_file(s.get_or("out", "-"), text);
  return kExitOk;
}

// ---- selfcheck -----------------------------------------------------------

int cmd_selfcheck(const CommonFlags& flags, const std::string& corrupt) {
  const Settings s = flags.settings();
  const std::uint64_t seed = parse_count(s.get_or("seed", "1"), "--seed");
  const grafiq_precision precision = parse_precision(s.get_or("precision", "f64"));
  const std::size_t networks = parse_count(s.get_or("networks", "10"), "--networks");
  std::vector<grafiq_check_result> results(64);
  std::size_t count = 0;
  int passed = 0;
  check(grafiq_selfcheck(seed, precision, networks, corrupt.empty() ? nullptr : corrupt.c_str(), results.data(),
                         results.size(), &count, &passed),
        "selfcheck");
  if (count > results.size()) {
    results.resize(count);
    check(grafiq_selfcheck(seed, precision, networks, corrupt.empty() ? nullptr : corrupt.c_str(), results.data(),
                           results.size(), &count, &passed),
          "selfcheck");
  }
  std::string first_failure;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = results[i];
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " max_rel_error=" << number(r.max_error)
              << " tolerance=" << number(r.tolerance) << "\n";
    if (!r.passed && first_failure.empty()) first_failure = r.name;
  }
  if (!passed) {
    std::cerr << "grafiq: selfcheck failed: " << first_failure << "\n";
    return kExitSelfCheck;
  }
  std::cout << "selfcheck passed (" << count << " checks)\n";
  return kExitOk;
}

// ---- model management ----------------------------------------------------

json preset_spec(const std::string& preset, const Settings& s) {
  json j;
  if (preset == "resnet100") {
    j = {{"stage_depths", {3, 4, 23, 3}}, {"stem_width", 64}, {"embedding_dim", 512}, {"input_size", {112, 112}}};
  } else if (preset == "tiny") {
    const std::size_t size = parse_count(s.get_or("input_size", "16"), "--input-size");
    j = {{"stage_depths", {1, 1, 1, 1}},
         {"stem_width", parse_count(s.get_or("stem_width", "8"), "--stem-width")},
         {"embedding_dim", parse_count(s.get_or("embedding_dim", "16"), "--embedding-dim")},
         {"input_size", {size, size}}};
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected tiny or resnet100)");
  }
  j["width_multipliers"] = {1, 2, 4, 8};
  j["activation"] = "prelu";
  j["bn_epsilon"] = 1e-5;
  j["head_pool"] = "flatten";
  return j;
}

int cmd_build_model(const CommonFlags& flags, const std::string& spec_file, bool zeros) {
  const Settings s = flags.settings();
  const std::string out = require(s, "out", "--out");
  const std::string spec =
      spec_file.empty() ? preset_spec(s.get_or("preset", "tiny"), s).dump() : read_text_file(spec_file);
  const std::uint64_t seed = parse_count(s.get_or("seed", "0"), "--seed");
  grafiq_network* raw = nullptr;
  check(grafiq_network_build(spec.c_str(), zeros ? 0 : 1, seed, &raw), "building model");
  NetworkPtr net(raw);
  check(grafiq_network_save(net.get(), out.c_str()), "writing '" + out + "'");
  return kExitOk;
}

int cmd_calibrate(const CommonFlags& flags, const std::string& list) {
  const Settings s = flags.settings();
  const std::string out = require(s, "out", "--out");
  NetworkPtr net = load_network(require(s, "model", "--model"));
  const std::vector<ImageEntry> images = read_image_list(list);
  const auto paths = c_paths(images);
  check(grafiq_network_calibrate(net.get(), paths.data(), paths.size()), "calibrating");
  check(grafiq_network_save(net.get(), out.c_str()), "writing '" + out + "'");
  return kExitOk;
}

int cmd_info(const CommonFlags& flags) {
  const Settings s = flags.settings();
  const NetworkPtr net = load_network(require(s, "model", "--model"));
  grafiq_network_info info{};
  check(grafiq_network_get_info(net.get(), &info), "model info");
  char* spec = nullptr;
  check(grafiq_network_spec_json(net.get(), &spec), "model info");
  json j;
  j["spec"] = json::parse(spec);
  grafiq_string_free(spec);
  j["parameters"] = info.parameter_count;
  j["bn_layers"] = info.bn_layers;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grafiq: gradient-based face image quality from batch-norm statistics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", grafiq_version());

  CommonFlags flags;
  std::string list, embeddings, pairs, sims, qualities, quality_column = "quality_selected", spec_file, corrupt;
  std::vector<std::string> sidecars;
  bool zeros = false;

  auto* score = app.add_subcommand("score", "Score every image of a list into a CSV");
  add_config_option(score, flags);
  flags.add(score, "model", "--model", "GRFQ1 network file");
  flags.add(score, "tap", "--tap", "image, b1, b2, b3, b4, a comma list or all (default b2)");
  flags.add(score, "select", "--select", "tap reported as quality_selected (default b2)");
  flags.add(score, "precision", "--precision", "f32 or f64 (default f32)");
  flags.add(score, "jobs", "--jobs", "images scored concurrently (default 1)");
  flags.add_flag(score, "deterministic", "--deterministic", "reproducible output only, no timing on stderr", "true");
  flags.add_flag(score, "head_bn", "--no-head-bn", "leave the embedding-head BN layers out of the loss", "false");
  flags.add(score, "method", "--method", "gradient or mse-bns (default gradient)");
  flags.add(score, "out", "--out", "output CSV (default stdout)");
  score->add_option("images", list, "image list: one 'path' or 'id,path' per line")->required();

  auto* embed = app.add_subcommand("embed", "Compute embeddings into a GRFQ1 container");
  add_config_option(embed, flags);
  flags.add(embed, "model", "--model", "GRFQ1 network file");
  flags.add(embed, "precision", "--precision", "f32 or f64 (default f32)");
  flags.add(embed, "jobs", "--jobs", "images processed concurrently (default 1)");
  flags.add_flag(embed, "deterministic", "--deterministic", "accepted for symmetry; output never varies", "true");
  flags.add(embed, "out", "--out", "output container");
  embed->add_option("images", list, "image list")->required();

  auto* pair = app.add_subcommand("pairs", "Cosine similarity for a list of id_a,id_b,label pairs");
  add_config_option(pair, flags);
  pair->add_option("--embeddings", embeddings, "embeddings container")->required();
  flags.add(pair, "out", "--out", "output CSV (default stdout)");
  pair->add_option("pairs", pairs, "pair list CSV")->required();

  auto* edc = app.add_subcommand("edc", "Error-versus-discard curve for each FMR target");
  add_config_option(edc, flags);
  edc->add_option("--similarities", sims, "CSV with id_a,id_b,label,similarity [,pair_quality]")->required();
  edc->add_option("--qualities", qualities, "score CSV; omit to use the pair_quality column");
  edc->add_option("--quality-column", quality_column, "column of the score CSV holding the quality");
  flags.add(edc, "fmr", "--fmr", "comma-separated FMR targets (default 0.001,0.0001)");
  flags.add(edc, "max_discard", "--max-discard", "largest discard fraction (default 0.95)");
  flags.add(edc, "step", "--step", "discard grid step (default 0.01)");
  flags.add(edc, "method", "--method", "method name stored in the sidecar");
  flags.add(edc, "benchmark", "--benchmark", "benchmark name stored in the sidecar");
  flags.add_flag(edc, "deterministic", "--deterministic", "accepted for symmetry; output never varies", "true");
  flags.add(edc, "out", "--out", "output prefix; writes <prefix>_fmr<target>.csv and .json");

  auto* table = app.add_subcommand("table", "AUC table from EDC sidecars");
  add_config_option(table, flags);
  flags.add(table, "out", "--out", "output CSV (default stdout)");
  table->add_option("sidecars", sidecars, "sidecar files or glob patterns")->required();

  auto* self = app.add_subcommand("selfcheck", "Finite-difference gradient checks on seeded tiny networks");
  add_config_option(self, flags);
  flags.add(self, "seed", "--seed", "base seed (default 1)");
  flags.add(self, "precision", "--precision", "f32 or f64 (default f64)");
  flags.add(self, "networks", "--networks", "number of seeded networks (default 10)");
  self->add_option("--corrupt-kernel", corrupt, "")->group("");

  auto* build = app.add_subcommand("build-model", "Write a seeded network");
  add_config_option(build, flags);
  flags.add(build, "preset", "--preset", "tiny or resnet100 (default tiny)");
  build->add_option("--spec", spec_file, "network spec JSON instead of a preset");
  flags.add(build, "stem_width", "--stem-width", "tiny preset stem width (default 8)");
  flags.add(build, "input_size", "--input-size", "tiny preset input side (default 16)");
  flags.add(build, "embedding_dim", "--embedding-dim", "tiny preset embedding size (default 16)");
  flags.add(build, "seed", "--seed", "weight seed (default 0)");
  build->add_flag("--zeros", zeros, "all-zero weights instead of seeded ones");
  flags.add(build, "out", "--out", "output network file");

  auto* calib = app.add_subcommand("calibrate", "Set running statistics from a list of images");
  add_config_option(calib, flags);
  flags.add(calib, "model", "--model", "GRFQ1 network file");
  flags.add(calib, "out", "--out", "output network file");
  calib->add_option("images", list, "image list")->required();

  auto* info = app.add_subcommand("info", "Print a network's spec and size");
  add_config_option(info, flags);
  flags.add(info, "model", "--model", "GRFQ1 network file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*score) return cmd_score(flags, list);
    if (*embed) return cmd_embed(flags, list);
    if (*pair) return cmd_pairs(flags, embeddings, pairs);
    if (*edc) return cmd_edc(flags, sims, qualities, quality_column);
    if (*table) return cmd_table(flags, sidecars);
    if (*self) return cmd_selfcheck(flags, corrupt);
    if (*build) return cmd_build_model(flags, spec_file, zeros);
    if (*calib) return cmd_calibrate(flags, list);
    if (*info) return cmd_info(flags);
  } catch (const ConfigError& e) {
    std::cerr << "grafiq: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ApiError& e) {
    std::cerr << "grafiq: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "grafiq: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
