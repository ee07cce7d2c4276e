// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "grafiq/tensor.hpp"

namespace grafiq {

// Forward kernels. All of them are single-threaded and evaluate in a fixed
// loop order, so equal inputs give bit-equal outputs.
//
// Channel-first kernels (bn_inference, prelu) treat dim(0) as the channel
// axis and everything after it as positions, so the same code serves
// [C,H,W] feature maps and [C] vectors.

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Output extent of a convolution along one axis.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, const ConvGeometry& geom);

// Cross-correlation with zero padding, no bias.
// input [C_in,H,W], weights [C_out,C_in,kH,kW] -> [C_out,H',W'].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights, ConvGeometry geom);

// Inference-mode batch normalization with stored statistics:
// gamma * (x - mean) / sqrt(std^2 + eps) + beta.
template <typename T>
BasicTensor<T> bn_inference(const BasicTensor<T>& input, const BasicTensor<T>& running_mean,
                            const BasicTensor<T>& running_std, const BasicTensor<T>& gamma,
                            const BasicTensor<T>& beta, double epsilon);

// Per-channel factor gamma / sqrt(std^2 + eps) that bn_inference multiplies by.
template <typename T>
std::vector<T> bn_scale(const BasicTensor<T>& running_std, const BasicTensor<T>& gamma, double epsilon);

template <typename T>
BasicTensor<T> prelu(const BasicTensor<T>& input, const BasicTensor<T>& slope);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

// [C,H,W] -> [C]
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

// input [N] (any shape with N elements), weights [M,N], bias [M] -> [M]
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

// Throws DegenerateEmbedding on a zero vector.
template <typename T>
BasicTensor<T> l2_normalize(const BasicTensor<T>& input);

}  // namespace grafiq
