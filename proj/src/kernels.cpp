// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/kernels.hpp"

#include <cmath>

namespace grafiq {

namespace {

template <typename T>
void require_channel_vector(const BasicTensor<T>& v, std::size_t channels, const char* what) {
  if (v.rank() != 1 || v.size() != channels) {
    throw Error(ErrorCode::Dimension, std::string(what) + ": expected [" + std::to_string(channels) +
                                          "], got " + shape_to_string(v.shape()));
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, const ConvGeometry& geom) {
  if (geom.stride == 0) throw Error(ErrorCode::Usage, "conv2d: stride must be >= 1");
  if (input + 2 * geom.padding < kernel) {
    throw Error(ErrorCode::Dimension, "conv2d: kernel " + std::to_string(kernel) +
                                          " does not fit input " + std::to_string(input) +
                                          " with padding " + std::to_string(geom.padding));
  }
  return (input + 2 * geom.padding - kernel) / geom.stride + 1;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights, ConvGeometry geom) {
  require_rank(input, 3, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  if (weights.dim(1) != cin) {
    throw Error(ErrorCode::Dimension, "conv2d: input has " + std::to_string(cin) +
                                          " channels, weights expect " + std::to_string(weights.dim(1)));
  }
  const std::size_t oh = conv_output_extent(h, kh, geom);
  const std::size_t ow = conv_output_extent(w, kw, geom);
  BasicTensor<T> out({cout, oh, ow});

  const auto in = input.data();
  const auto wt = weights.data();
  auto dst = out.data();
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);

  for (std::size_t co = 0; co < cout; ++co) {
    T* out_plane = dst.data() + co * oh * ow;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* in_plane = in.data() + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T k = wt[((co * cin + ci) * kh + ky) * kw + kx];
          if (k == T(0)) continue;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* in_row = in_plane + iy * static_cast<std::ptrdiff_t>(w);
            T* out_row = out_plane + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              out_row[ox] += k * in_row[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> bn_scale(const BasicTensor<T>& running_std, const BasicTensor<T>& gamma, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Usage, "bn_inference: epsilon must be > 0");
  std::vector<T> scale(gamma.size());
  for (std::size_t c = 0; c < gamma.size(); ++c) {
    const T sd = running_std[c];
    scale[c] = static_cast<T>(gamma[c] / std::sqrt(sd * sd + static_cast<T>(epsilon)));
  }
  return scale;
}

template <typename T>
BasicTensor<T> bn_inference(const BasicTensor<T>& input, const BasicTensor<T>& running_mean,
                            const BasicTensor<T>& running_std, const BasicTensor<T>& gamma,
                            const BasicTensor<T>& beta, double epsilon) {
  if (input.rank() == 0) throw Error(ErrorCode::Dimension, "bn_inference: empty input");
  const std::size_t channels = input.dim(0);
  require_channel_vector(running_mean, channels, "bn_inference running_mean");
  require_channel_vector(running_std, channels, "bn_inference running_std");
  require_channel_vector(gamma, channels, "bn_inference gamma");
  require_channel_vector(beta, channels, "bn_inference beta");
  for (std::size_t c = 0; c < channels; ++c) {
    if (!std::isfinite(running_mean[c]) || !std::isfinite(running_std[c]) || running_std[c] < T(0)) {
      throw Error(ErrorCode::CorruptModel, "bn_inference: invalid stored statistics at channel " +
                                               std::to_string(c));
    }
  }
  const std::vector<T> scale = bn_scale(running_std, gamma, epsilon);
  const std::size_t inner = input.size() / channels;
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T mean = running_mean[c], s = scale[c], b = beta[c];
    const T* src = input.data().data() + c * inner;
    T* dst = out.data().data() + c * inner;
    for (std::size_t i = 0; i < inner; ++i) dst[i] = s * (src[i] - mean) + b;
  }
  return out;
}

template <typename T>
BasicTensor<T> prelu(const BasicTensor<T>& input, const BasicTensor<T>& slope) {
  if (input.rank() == 0) throw Error(ErrorCode::Dimension, "prelu: empty input");
  const std::size_t channels = input.dim(0);
  require_channel_vector(slope, channels, "prelu slope");
  const std::size_t inner = input.size() / channels;
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T a = slope[c];
    const T* src = input.data().data() + c * inner;
    T* dst = out.data().data() + c * inner;
    for (std::size_t i = 0; i < inner; ++i) dst[i] = src[i] > T(0) ? src[i] : a * src[i];
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::Dimension, "add: shape " + shape_to_string(a.shape()) + " vs " +
                                          shape_to_string(b.shape()));
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input, 3, "global_avg_pool");
  const std::size_t channels = input.dim(0), inner = input.dim(1) * input.dim(2);
  BasicTensor<T> out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    T acc = 0;
    for (std::size_t i = 0; i < inner; ++i) acc += input[c * inner + i];
    out[c] = acc / static_cast<T>(inner);
  }
  return out;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  require_rank(weights, 2, "linear weights");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (input.size() != n) {
    throw Error(ErrorCode::Dimension, "linear: input has " + std::to_string(input.size()) +
                                          " elements, weights expect " + std::to_string(n));
  }
  require_channel_vector(bias, m, "linear bias");
  BasicTensor<T> out({m});
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = weights.data().data() + r * n;
    T acc = 0;
    for (std::size_t k = 0; k < n; ++k) acc += row[k] * input[k];
    out[r] = acc + bias[r];
  }
  return out;
}

template <typename T>
BasicTensor<T> l2_normalize(const BasicTensor<T>& input) {
  if (input.empty()) throw Error(ErrorCode::Dimension, "l2_normalize: empty input");
  double sq = 0;
  for (T v : input.data()) sq += static_cast<double>(v) * static_cast<double>(v);
  if (sq == 0.0) throw Error(ErrorCode::DegenerateEmbedding, "l2_normalize: zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = static_cast<T>(input[i] * inv);
  return out;
}

#define GRAFIQ_INSTANTIATE_KERNELS(T)                                                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, ConvGeometry);       \
  template BasicTensor<T> bn_inference(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                       const BasicTensor<T>&, const BasicTensor<T>&,                \
                                       const BasicTensor<T>&, double);                              \
  template std::vector<T> bn_scale(const BasicTensor<T>&, const BasicTensor<T>&, double);          \
  template BasicTensor<T> prelu(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                              \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                   \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> l2_normalize(const BasicTensor<T>&);

GRAFIQ_INSTANTIATE_KERNELS(float)
GRAFIQ_INSTANTIATE_KERNELS(double)

}  // namespace grafiq
