// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/grafiq.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <string>
#include <vector>

#include "grafiq/container.hpp"
#include "grafiq/error.hpp"
#include "grafiq/evaluation.hpp"
#include "grafiq/imageio.hpp"
#include "grafiq/network.hpp"
#include "grafiq/scorer.hpp"
#include "grafiq/selfcheck.hpp"

struct grafiq_network {
  grafiq::Network net;
  mutable std::mutex mu;
  mutable std::shared_ptr<const grafiq::Network64> wide;

  explicit grafiq_network(grafiq::Network n) : net(std::move(n)) {}

  std::shared_ptr<const grafiq::Network64> as_f64() const {
    std::lock_guard lock(mu);
    if (!wide) wide = std::make_shared<const grafiq::Network64>(net.cast<double>());
    return wide;
  }
};

struct grafiq_embeddings {
  std::size_t dim = 0;
  std::map<std::string, std::vector<float>> rows;
};

struct grafiq_edc_curve {
  grafiq::EdcCurve curve;
};

namespace {

thread_local std::string last_error;

grafiq_status to_status(grafiq::ErrorCode code) { return static_cast<grafiq_status>(static_cast<int>(code)); }

grafiq_status fail(grafiq_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
grafiq_status guarded(F&& fn) {
  try {
    fn();
    return GRAFIQ_OK;
  } catch (const grafiq::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(GRAFIQ_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GRAFIQ_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(GRAFIQ_ERROR_INTERNAL, "unknown failure");
  }
}

void copy_message(char* dst, std::size_t size, const std::string& msg) {
  const std::size_t n = std::min(size - 1, msg.size());
  std::memcpy(dst, msg.data(), n);
  dst[n] = '\0';
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define GRAFIQ_REQUIRE(cond, msg) \
  if (!(cond)) return fail(GRAFIQ_ERROR_USAGE, msg)

grafiq::ScoreOptions core_options(const grafiq_score_options& o) {
  grafiq::ScoreOptions out;
  out.taps = grafiq::TapSet{};
  for (grafiq::Tap t : grafiq::kAllTaps) {
    if (o.tap_mask & GRAFIQ_TAP_BIT(static_cast<unsigned>(t))) out.taps.insert(t);
  }
  out.selected = static_cast<grafiq::Tap>(o.selected_tap);
  out.taps.insert(out.selected);
  out.observe_head = o.observe_head != 0;
  return out;
}

grafiq_status check_options(const grafiq_score_options* o) {
  GRAFIQ_REQUIRE(o != nullptr, "options must not be null");
  GRAFIQ_REQUIRE(o->selected_tap >= GRAFIQ_TAP_IMAGE && o->selected_tap <= GRAFIQ_TAP_B4, "invalid selected tap");
  GRAFIQ_REQUIRE((o->tap_mask & ~GRAFIQ_ALL_TAPS) == 0, "invalid tap mask");
  GRAFIQ_REQUIRE(o->precision == GRAFIQ_F32 || o->precision == GRAFIQ_F64, "invalid precision");
  GRAFIQ_REQUIRE(o->method == GRAFIQ_METHOD_GRADIENT || o->method == GRAFIQ_METHOD_MSE_BNS, "invalid method");
  GRAFIQ_REQUIRE(o->jobs >= 1, "jobs must be at least 1");
  return GRAFIQ_OK;
}

void clear_report(grafiq_quality_report& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.status = GRAFIQ_OK;
  r.loss_bns = nan;
  for (std::size_t i = 0; i < GRAFIQ_TAP_COUNT; ++i) {
    r.raw_magnitude[i] = nan;
    r.quality[i] = nan;
  }
  r.selected_quality = nan;
  r.forward_passes = 0;
  r.backward_passes = 0;
  r.error[0] = '\0';
}

void fill_report(const grafiq::QualityReport& q, const grafiq::PassCounter& counter, grafiq_quality_report& r) {
  r.loss_bns = q.loss_bns;
  for (std::size_t i = 0; i < GRAFIQ_TAP_COUNT; ++i) {
    if (q.raw_magnitude[i]) r.raw_magnitude[i] = *q.raw_magnitude[i];
    if (q.quality[i]) r.quality[i] = *q.quality[i];
  }
  r.selected_quality = q.selected_quality;
  r.forward_passes = counter.forward;
  r.backward_passes = counter.backward;
}

template <typename T>
void score_one(const grafiq::BasicNetwork<T>& net, const grafiq::BasicTensor<T>& image,
               const grafiq_score_options& o, grafiq_quality_report& r) {
  grafiq::PassCounter counter;
  grafiq::ScoreOptions opts = core_options(o);
  opts.counter = &counter;
  const grafiq::QualityReport q = o.method == GRAFIQ_METHOD_MSE_BNS ? grafiq::mse_bns_score(net, image, opts)
                                                                   : grafiq::grafiqs_score(net, image, opts);
  fill_report(q, counter, r);
}

template <typename T>
grafiq::BasicTensor<T> load_input(const grafiq::NetworkSpec& spec, const char* path) {
  if (path == nullptr) throw grafiq::Error(grafiq::ErrorCode::Usage, "null image path");
  return grafiq::preprocess<T>(grafiq::load_image(path), spec.input_height, spec.input_width);
}

template <typename F>
void record_item(grafiq_status& status, char* message, F&& fn) {
  status = guarded(std::forward<F>(fn));
  if (status != GRAFIQ_OK) copy_message(message, GRAFIQ_MESSAGE_SIZE, last_error);
}

template <typename T>
void score_files_as(const grafiq::BasicNetwork<T>& net, const char* const* paths, std::size_t count,
                    const grafiq_score_options& o, grafiq_quality_report* reports) {
  grafiq::parallel_for(count, o.jobs, [&](std::size_t i) {
    grafiq_quality_report& r = reports[i];
    clear_report(r);
    record_item(r.status, r.error, [&] { score_one(net, load_input<T>(net.spec(), paths[i]), o, r); });
  });
}

template <typename T>
void embed_files_as(const grafiq::BasicNetwork<T>& net, const char* const* paths, std::size_t count,
                    std::size_t jobs, float* out, grafiq_item_result* results) {
  const std::size_t dim = net.spec().embedding_dim;
  grafiq::parallel_for(count, jobs, [&](std::size_t i) {
    float* row = out + i * dim;
    std::fill(row, row + dim, std::numeric_limits<float>::quiet_NaN());
    grafiq_item_result& r = results[i];
    r.error[0] = '\0';
    record_item(r.status, r.error, [&] {
      grafiq::ForwardOptions fo;
      fo.record_stats = false;
      const auto trace = grafiq::forward(net, load_input<T>(net.spec(), paths[i]), fo);
      const auto v = trace.embedding.data();
      for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<float>(v[k]);
    });
  });
}

}  // namespace

extern "C" {

const char* grafiq_version(void) { return "0.1.0"; }

const char* grafiq_status_name(grafiq_status status) {
  switch (status) {
    case GRAFIQ_OK:
      return "ok";
    case GRAFIQ_ERROR_INTERNAL:
      return "internal";
    default:
      if (status >= GRAFIQ_ERROR_DIMENSION && status <= GRAFIQ_ERROR_DEGENERATE_EMBEDDING)
        return grafiq::error_code_name(static_cast<grafiq::ErrorCode>(status));
      return "unknown";
  }
}

const char* grafiq_last_error(void) { return last_error.c_str(); }

void grafiq_string_free(char* s) { delete[] s; }

grafiq_status grafiq_network_load(const char* path, grafiq_network** out) {
  GRAFIQ_REQUIRE(path != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new grafiq_network(grafiq::load_weights<float>(path)); });
}

grafiq_status grafiq_network_build(const char* spec_json, int random_init, uint64_t seed, grafiq_network** out) {
  GRAFIQ_REQUIRE(spec_json != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] {
    const grafiq::NetworkSpec spec = grafiq::spec_from_json(spec_json);
    *out = new grafiq_network(
        grafiq::build_network(spec, random_init ? grafiq::Init::SeededRandom : grafiq::Init::Zeros, seed));
  });
}

grafiq_status grafiq_network_save(const grafiq_network* net, const char* path) {
  GRAFIQ_REQUIRE(net != nullptr && path != nullptr, "null argument");
  return guarded([&] { grafiq::save_weights(net->net, path); });
}

void grafiq_network_free(grafiq_network* net) { delete net; }

grafiq_status grafiq_network_get_info(const grafiq_network* net, grafiq_network_info* out) {
  GRAFIQ_REQUIRE(net != nullptr && out != nullptr, "null argument");
  const auto& spec = net->net.spec();
  out->input_height = spec.input_height;
  out->input_width = spec.input_width;
  out->embedding_dim = spec.embedding_dim;
  out->bn_layers = net->net.bn_layers().size();
  out->parameter_count = net->net.parameter_count();
  return GRAFIQ_OK;
}

grafiq_status grafiq_network_spec_json(const grafiq_network* net, char** out) {
  GRAFIQ_REQUIRE(net != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] { *out = dup_string(grafiq::spec_to_json(net->net.spec())); });
}

grafiq_status grafiq_network_calibrate(grafiq_network* net, const char* const* image_paths, size_t count) {
  GRAFIQ_REQUIRE(net != nullptr, "null network");
  GRAFIQ_REQUIRE(count > 0 && image_paths != nullptr, "calibration needs at least one image");
  return guarded([&] {
    std::vector<grafiq::Tensor> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) images.push_back(load_input<float>(net->net.spec(), image_paths[i]));
    grafiq::Network updated = net->net;
    grafiq::calibrate_running_stats(updated, std::span<const grafiq::Tensor>(images));
    std::lock_guard lock(net->mu);
    net->net = std::move(updated);
    net->wide.reset();
  });
}

void grafiq_score_options_init(grafiq_score_options* options) {
  if (options == nullptr) return;
  options->tap_mask = GRAFIQ_TAP_BIT(GRAFIQ_TAP_B2);
  options->selected_tap = GRAFIQ_TAP_B2;
  options->precision = GRAFIQ_F32;
  options->method = GRAFIQ_METHOD_GRADIENT;
  options->jobs = 1;
  options->observe_head = 1;
}

grafiq_status grafiq_score_files(const grafiq_network* net, const char* const* paths, size_t count,
                                 const grafiq_score_options* options, grafiq_quality_report* reports) {
  GRAFIQ_REQUIRE(net != nullptr, "null network");
  GRAFIQ_REQUIRE(count == 0 || (paths != nullptr && reports != nullptr), "null argument");
  if (grafiq_status s = check_options(options); s != GRAFIQ_OK) return s;
  return guarded([&] {
    if (options->precision == GRAFIQ_F64) {
      const auto wide = net->as_f64();
      score_files_as(*wide, paths, count, *options, reports);
    } else {
      score_files_as(net->net, paths, count, *options, reports);
    }
  });
}

grafiq_status grafiq_score_tensor(const grafiq_network* net, const float* chw, size_t length,
                                  const grafiq_score_options* options, grafiq_quality_report* report) {
  GRAFIQ_REQUIRE(net != nullptr && chw != nullptr && report != nullptr, "null argument");
  if (grafiq_status s = check_options(options); s != GRAFIQ_OK) return s;
  clear_report(*report);
  const grafiq_status status = guarded([&] {
    const auto& spec = net->net.spec();
    grafiq::Tensor image({3, spec.input_height, spec.input_width}, std::vector<float>(chw, chw + length));
    if (options->precision == GRAFIQ_F64) {
      score_one(*net->as_f64(), image.cast<double>(), *options, *report);
    } else {
      score_one(net->net, image, *options, *report);
    }
  });
  report->status = status;
  if (status != GRAFIQ_OK) copy_message(report->error, GRAFIQ_MESSAGE_SIZE, last_error);
  return status;
}

grafiq_status grafiq_embed_files(const grafiq_network* net, const char* const* paths, size_t count,
                                 grafiq_precision precision, size_t jobs, float* out, grafiq_item_result* results) {
  GRAFIQ_REQUIRE(net != nullptr, "null network");
  GRAFIQ_REQUIRE(count == 0 || (paths != nullptr && out != nullptr && results != nullptr), "null argument");
  GRAFIQ_REQUIRE(jobs >= 1, "jobs must be at least 1");
  GRAFIQ_REQUIRE(precision == GRAFIQ_F32 || precision == GRAFIQ_F64, "invalid precision");
  return guarded([&] {
    if (precision == GRAFIQ_F64) {
      const auto wide = net->as_f64();
      embed_files_as(*wide, paths, count, jobs, out, results);
    } else {
      embed_files_as(net->net, paths, count, jobs, out, results);
    }
  });
}

grafiq_status grafiq_embeddings_create(size_t dim, grafiq_embeddings** out) {
  GRAFIQ_REQUIRE(out != nullptr, "null argument");
  GRAFIQ_REQUIRE(dim > 0, "embedding dimension must be positive");
  *out = nullptr;
  return guarded([&] {
    *out = new grafiq_embeddings;
    (*out)->dim = dim;
  });
}

grafiq_status grafiq_embeddings_add(grafiq_embeddings* set, const char* id, const float* values) {
  GRAFIQ_REQUIRE(set != nullptr && id != nullptr && values != nullptr, "null argument");
  GRAFIQ_REQUIRE(id[0] != '\0', "empty embedding id");
  return guarded([&] { set->rows[id] = std::vector<float>(values, values + set->dim); });
}

grafiq_status grafiq_embeddings_save(const grafiq_embeddings* set, const char* path) {
  GRAFIQ_REQUIRE(set != nullptr && path != nullptr, "null argument");
  return guarded([&] {
    grafiq::Container c;
    c.kind = "embeddings";
    for (const auto& [id, row] : set->rows) c.tensors.emplace(id, grafiq::Tensor({set->dim}, row));
    grafiq::write_container(path, c);
  });
}

grafiq_status grafiq_embeddings_load(const char* path, grafiq_embeddings** out) {
  GRAFIQ_REQUIRE(path != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] {
    grafiq::Container c = grafiq::read_container(path);
    if (c.kind != "embeddings")
      throw grafiq::Error(grafiq::ErrorCode::MalformedHeader, "container kind is '" + c.kind + "', not embeddings");
    auto set = std::make_unique<grafiq_embeddings>();
    for (auto& [id, any] : c.tensors) {
      const grafiq::Tensor t = std::holds_alternative<grafiq::Tensor>(any)
                                   ? std::get<grafiq::Tensor>(any)
                                   : std::get<grafiq::Tensor64>(any).cast<float>();
      if (t.rank() != 1) throw grafiq::Error(grafiq::ErrorCode::ShapeMismatch, "embedding '" + id + "' is not 1-D");
      if (set->dim == 0) set->dim = t.size();
      if (t.size() != set->dim)
        throw grafiq::Error(grafiq::ErrorCode::ShapeMismatch, "embedding '" + id + "' has a different dimension");
      set->rows.emplace(id, t.values());
    }
    *out = set.release();
  });
}

size_t grafiq_embeddings_count(const grafiq_embeddings* set) { return set ? set->rows.size() : 0; }

size_t grafiq_embeddings_dim(const grafiq_embeddings* set) { return set ? set->dim : 0; }

const float* grafiq_embeddings_find(const grafiq_embeddings* set, const char* id) {
  if (set == nullptr || id == nullptr) return nullptr;
  const auto it = set->rows.find(id);
  return it == set->rows.end() ? nullptr : it->second.data();
}

void grafiq_embeddings_free(grafiq_embeddings* set) { delete set; }

grafiq_status grafiq_cosine_similarity(const float* a, const float* b, size_t dim, double* out) {
  GRAFIQ_REQUIRE(a != nullptr && b != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    *out = grafiq::cosine_similarity(std::span<const float>(a, dim), std::span<const float>(b, dim));
  });
}

grafiq_status grafiq_edc_compute(const grafiq_comparison* records, size_t count, double fmr_target,
                                 double max_discard, double step, grafiq_edc_curve** out) {
  GRAFIQ_REQUIRE(out != nullptr, "null argument");
  GRAFIQ_REQUIRE(count == 0 || records != nullptr, "null records");
  *out = nullptr;
  return guarded([&] {
    std::vector<grafiq::ComparisonRecord> recs(count);
    for (std::size_t i = 0; i < count; ++i) {
      recs[i].similarity = records[i].similarity;
      recs[i].label = records[i].genuine ? grafiq::Label::Genuine : grafiq::Label::Impostor;
      recs[i].pair_quality = records[i].pair_quality;
    }
    auto curve = std::make_unique<grafiq_edc_curve>();
    curve->curve = grafiq::edc(recs, fmr_target, grafiq::EdcGrid{max_discard, step});
    *out = curve.release();
  });
}

double grafiq_edc_threshold(const grafiq_edc_curve* curve) {
  return curve ? curve->curve.threshold : std::numeric_limits<double>::quiet_NaN();
}

double grafiq_edc_auc(const grafiq_edc_curve* curve) {
  return curve ? curve->curve.auc : std::numeric_limits<double>::quiet_NaN();
}

double grafiq_edc_fmr_target(const grafiq_edc_curve* curve) {
  return curve ? curve->curve.fmr_target : std::numeric_limits<double>::quiet_NaN();
}

unsigned grafiq_edc_flags(const grafiq_edc_curve* curve) {
  if (curve == nullptr) return 0;
  unsigned flags = 0;
  if (curve->curve.insufficient_impostors) flags |= GRAFIQ_EDC_INSUFFICIENT_IMPOSTORS;
  if (curve->curve.empty_genuine) flags |= GRAFIQ_EDC_EMPTY_GENUINE;
  return flags;
}

size_t grafiq_edc_point_count(const grafiq_edc_curve* curve) { return curve ? curve->curve.points.size() : 0; }

grafiq_status grafiq_edc_point(const grafiq_edc_curve* curve, size_t index, double* discard_fraction,
                               double* fnmr) {
  GRAFIQ_REQUIRE(curve != nullptr && discard_fraction != nullptr && fnmr != nullptr, "null argument");
  GRAFIQ_REQUIRE(index < curve->curve.points.size(), "point index out of range");
  *discard_fraction = curve->curve.points[index].discard_fraction;
  *fnmr = curve->curve.points[index].fnmr;
  return GRAFIQ_OK;
}

void grafiq_edc_free(grafiq_edc_curve* curve) { delete curve; }

grafiq_status grafiq_auc_table_csv(const grafiq_auc_entry* entries, size_t count, char** out_csv) {
  GRAFIQ_REQUIRE(out_csv != nullptr, "null argument");
  GRAFIQ_REQUIRE(count == 0 || entries != nullptr, "null entries");
  *out_csv = nullptr;
  return guarded([&] {
    std::vector<grafiq::AucEntry> es(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (entries[i].method == nullptr || entries[i].benchmark == nullptr)
        throw grafiq::Error(grafiq::ErrorCode::Usage, "AUC entry without method or benchmark");
      es[i] = {entries[i].method, entries[i].benchmark, entries[i].fmr, entries[i].auc};
    }
    *out_csv = dup_string(grafiq::format_auc_table_csv(grafiq::edc_table(es)));
  });
}

grafiq_status grafiq_selfcheck(uint64_t seed, grafiq_precision precision, size_t networks,
                               const char* corrupt_kernel, grafiq_check_result* results, size_t capacity,
                               size_t* count, int* all_passed) {
  GRAFIQ_REQUIRE(count != nullptr && all_passed != nullptr, "null argument");
  GRAFIQ_REQUIRE(capacity == 0 || results != nullptr, "null results");
  GRAFIQ_REQUIRE(networks >= 1, "at least one network is required");
  return guarded([&] {
    grafiq::SelfCheckOptions opts;
    opts.seed = seed;
    opts.precision = precision == GRAFIQ_F64 ? grafiq::Precision::F64 : grafiq::Precision::F32;
    opts.networks = networks;
    if (corrupt_kernel != nullptr) opts.corrupt_kernel = corrupt_kernel;
    const grafiq::SelfCheckReport report = grafiq::run_selfcheck(opts);
    *count = report.checks.size();
    *all_passed = report.passed() ? 1 : 0;
    for (std::size_t i = 0; i < std::min(capacity, report.checks.size()); ++i) {
      const auto& c = report.checks[i];
      copy_message(results[i].name, sizeof(results[i].name), c.name);
      results[i].max_error = c.max_error;
      results[i].tolerance = c.tolerance;
      results[i].passed = c.passed ? 1 : 0;
    }
  });
}

}  // extern "C"
