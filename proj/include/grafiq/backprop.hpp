// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bitset>
#include <optional>
#include <utility>

#include "grafiq/kernels.hpp"
#include "grafiq/network.hpp"

namespace grafiq {

using GradientTap = Tap;

class TapSet {
 public:
  TapSet() = default;
  TapSet(std::initializer_list<Tap> taps) {
    for (Tap t : taps) insert(t);
  }
  static TapSet all() { return {Tap::Image, Tap::B1, Tap::B2, Tap::B3, Tap::B4}; }

  void insert(Tap t) { bits_.set(static_cast<std::size_t>(t)); }
  bool contains(Tap t) const { return bits_.test(static_cast<std::size_t>(t)); }
  bool empty() const { return bits_.none(); }

 private:
  std::bitset<kTapCount> bits_;
};

template <typename T>
struct GradientReport {
  // d(loss)/d(activation) for every requested tap, same shape as the
  // corresponding ForwardTrace::stage_outputs entry.
  std::array<std::optional<BasicTensor<T>>, kTapCount> gradients;
  double loss_value = 0.0;

  const BasicTensor<T>& at(Tap t) const;
};

// Standard deviations below this count as zero when differentiating.
inline constexpr double kStdGradientFloor = 1e-8;

struct BackwardOptions {
  double std_floor = kStdGradientFloor;
  PassCounter* counter = nullptr;
};

// Gradient of the BN-statistics loss with respect to the requested tap
// activations, by a fixed reverse schedule over the residual topology.
// A tap gradient collects every loss term downstream of that tap.
// Parameters are never touched. Throws Consistency if the trace does not
// belong to `net`.
template <typename T>
GradientReport<T> backward_bns(const BasicNetwork<T>& net, const ForwardTrace<T>& trace, TapSet taps,
                               const BackwardOptions& options = {});

// Vector-Jacobian products of the forward kernels.

template <typename T>
BasicTensor<T> conv2d_backward_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weights,
                                     const Shape& input_shape, ConvGeometry geom);

template <typename T>
BasicTensor<T> bn_inference_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& running_std,
                                     const BasicTensor<T>& gamma, double epsilon);

template <typename T>
BasicTensor<T> prelu_backward(const BasicTensor<T>& input, const BasicTensor<T>& slope,
                              const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> add_backward(const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> linear_backward_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weights,
                                     const Shape& input_shape);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

// Pulls per-channel cotangents of the sample mean and std back onto the
// activations: g_mean/N + g_std * (x - mean) / (N * std). Channels whose
// std is below `std_floor` get no std contribution.
template <typename T>
BasicTensor<T> stats_backward(const BasicTensor<T>& activations, const BasicTensor<T>& mean,
                              const BasicTensor<T>& std, const BasicTensor<T>& grad_mean,
                              const BasicTensor<T>& grad_std, double std_floor = kStdGradientFloor);

}  // namespace grafiq
