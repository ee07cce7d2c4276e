// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/scorer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace grafiq {

void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  if (parallelism == 0) throw Error(ErrorCode::Usage, "parallelism must be >= 1");
  const std::size_t workers = std::min(parallelism, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

template <typename T>
double gradient_magnitude(const BasicTensor<T>& gradient) {
  double sum = 0.0;
  for (T v : gradient.data()) sum += std::abs(static_cast<double>(v));
  return sum;
}

template <typename T>
QualityReport grafiqs_score(const BasicNetwork<T>& net, const BasicTensor<T>& image, const ScoreOptions& options,
                            std::string image_id) {
  ForwardOptions fwd;
  fwd.observe_head = options.observe_head;
  fwd.counter = options.counter;
  const ForwardTrace<T> trace = forward(net, image, fwd);

  TapSet taps = options.taps;
  taps.insert(options.selected);
  BackwardOptions bwd;
  bwd.counter = options.counter;
  const GradientReport<T> grads = backward_bns(net, trace, taps, bwd);

  QualityReport report;
  report.image_id = std::move(image_id);
  report.loss_bns = grads.loss_value;
  report.selected_tap = options.selected;
  for (Tap t : kAllTaps) {
    const std::size_t i = static_cast<std::size_t>(t);
    if (!taps.contains(t)) continue;
    const double raw = gradient_magnitude(*grads.gradients[i]);
    report.raw_magnitude[i] = raw;
    report.quality[i] = -raw;
  }
  report.selected_quality = *report.quality[static_cast<std::size_t>(options.selected)];
  return report;
}

template <typename T>
QualityReport mse_bns_score(const BasicNetwork<T>& net, const BasicTensor<T>& image, const ScoreOptions& options,
                            std::string image_id) {
  ForwardOptions fwd;
  fwd.observe_head = options.observe_head;
  fwd.counter = options.counter;
  const ForwardTrace<T> trace = forward(net, image, fwd);
  QualityReport report;
  report.image_id = std::move(image_id);
  report.loss_bns = mse_bns(trace.bn_observations);
  report.selected_tap = options.selected;
  report.selected_quality = -report.loss_bns;
  return report;
}

template <typename T>
std::vector<ScoreOutcome> score_batch(const BasicNetwork<T>& net, std::span<const ImageJob<T>> jobs,
                                      const ScoreOptions& options, std::size_t parallelism, ScoreMethod method) {
  std::vector<ScoreOutcome> out(jobs.size());
  ScoreOptions local = options;
  local.counter = nullptr;
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    ScoreOutcome& slot = out[i];
    try {
      const BasicTensor<T> image = jobs[i].load();
      slot.report = method == ScoreMethod::Gradient ? grafiqs_score(net, image, local, jobs[i].id)
                                                    : mse_bns_score(net, image, local, jobs[i].id);
    } catch (const Error& e) {
      slot.error = e.what();
      slot.code = e.code();
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });
  return out;
}

#define GRAFIQ_INSTANTIATE_SCORER(T)                                                                         \
  template double gradient_magnitude(const BasicTensor<T>&);                                                 \
  template QualityReport grafiqs_score(const BasicNetwork<T>&, const BasicTensor<T>&, const ScoreOptions&,   \
                                       std::string);                                                         \
  template QualityReport mse_bns_score(const BasicNetwork<T>&, const BasicTensor<T>&, const ScoreOptions&,   \
                                       std::string);                                                         \
  template std::vector<ScoreOutcome> score_batch(const BasicNetwork<T>&, std::span<const ImageJob<T>>,       \
                                                 const ScoreOptions&, std::size_t, ScoreMethod);

GRAFIQ_INSTANTIATE_SCORER(float)
GRAFIQ_INSTANTIATE_SCORER(double)

}  // namespace grafiq
