// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grafiq/backprop.hpp"
#include "grafiq/bns_loss.hpp"
#include "grafiq/network.hpp"

namespace grafiq {

// Quality of one image. raw_magnitude is the sum of absolute tap gradients
// (large = low utility); quality is its negation so that higher is better
// everywhere downstream.
struct QualityReport {
  std::string image_id;
  double loss_bns = 0.0;
  std::array<std::optional<double>, kTapCount> raw_magnitude;
  std::array<std::optional<double>, kTapCount> quality;
  Tap selected_tap = Tap::B2;
  double selected_quality = 0.0;

  std::optional<double> raw(Tap t) const { return raw_magnitude[static_cast<std::size_t>(t)]; }
};

struct ScoreOptions {
  TapSet taps{Tap::B2};
  Tap selected = Tap::B2;  // added to taps if missing
  bool observe_head = true;
  PassCounter* counter = nullptr;
};

// Sum of |g| over the whole tensor, accumulated in double in index order.
template <typename T>
double gradient_magnitude(const BasicTensor<T>& gradient);

// One forward pass, one backward pass.
template <typename T>
QualityReport grafiqs_score(const BasicNetwork<T>& net, const BasicTensor<T>& image,
                            const ScoreOptions& options = {}, std::string image_id = {});

// Ablation baseline: quality = -loss_bns, forward only.
template <typename T>
QualityReport mse_bns_score(const BasicNetwork<T>& net, const BasicTensor<T>& image,
                            const ScoreOptions& options = {}, std::string image_id = {});

template <typename T>
struct ImageJob {
  std::string id;
  std::function<BasicTensor<T>()> load;
};

struct ScoreOutcome {
  std::optional<QualityReport> report;
  std::string error;  // set when report is empty
  std::optional<ErrorCode> code;
};

enum class ScoreMethod { Gradient, MseBns };

// Scores every job, `parallelism` images at a time. Results are stored per
// slot in input order and are identical to sequential scoring; a failing
// image yields an error outcome without stopping the rest. The counter in
// `options` is ignored here.
template <typename T>
std::vector<ScoreOutcome> score_batch(const BasicNetwork<T>& net, std::span<const ImageJob<T>> jobs,
                                      const ScoreOptions& options, std::size_t parallelism = 1,
                                      ScoreMethod method = ScoreMethod::Gradient);

// Runs fn(i) for i in [0, count) on up to `parallelism` threads.
void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace grafiq
