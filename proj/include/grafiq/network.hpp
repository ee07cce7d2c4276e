// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grafiq/tensor.hpp"

namespace grafiq {

enum class Activation { PRelu, Relu };

// How the last stage output is reduced before the embedding projection.
// Flatten matches the public ArcFace backbones; Average is a global pool.
enum class HeadPool { Flatten, Average };

// Declarative four-stage residual network. Every stage halves the spatial
// extent in its first block; stage s has stem_width * width_multipliers[s]
// channels.
struct NetworkSpec {
  std::array<std::size_t, 4> stage_depths{3, 4, 23, 3};
  std::size_t stem_width = 64;
  std::array<std::size_t, 4> width_multipliers{1, 2, 4, 8};
  std::size_t embedding_dim = 512;
  std::size_t input_height = 112;
  std::size_t input_width = 112;
  Activation activation = Activation::PRelu;
  double bn_epsilon = 1e-5;
  HeadPool head_pool = HeadPool::Flatten;

  static NetworkSpec resnet100();
  // stage_depths [1,1,1,1], 16x16 input.
  static NetworkSpec tiny(std::size_t stem_width = 8, std::size_t input_size = 16,
                          std::size_t embedding_dim = 16);

  // Throws ErrorCode::Spec.
  void validate() const;

  std::size_t stage_channels(std::size_t stage) const { return stem_width * width_multipliers.at(stage); }
  // Spatial extent of B4.
  std::size_t final_height() const { return input_height / 16; }
  std::size_t final_width() const { return input_width / 16; }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(std::string_view json);

// Points where gradients are read: the input image and the four stage outputs.
enum class Tap : std::size_t { Image = 0, B1, B2, B3, B4 };
inline constexpr std::size_t kTapCount = 5;
inline constexpr std::array<Tap, kTapCount> kAllTaps{Tap::Image, Tap::B1, Tap::B2, Tap::B3, Tap::B4};

const char* tap_name(Tap tap) noexcept;  // "image", "b1", ...
Tap tap_from_name(std::string_view name);  // throws Usage

struct ParamInfo {
  std::string name;
  Shape shape;
};

struct BnLayerInfo {
  std::string id;  // parameter prefix, e.g. "stage2.block0.bn3"
  std::size_t channels = 0;
  bool head = false;
};

// Full parameter table implied by a spec, in forward order.
std::vector<ParamInfo> parameter_layout(const NetworkSpec& spec);
std::vector<BnLayerInfo> bn_layer_layout(const NetworkSpec& spec);

template <typename T>
using ParameterMap = std::map<std::string, BasicTensor<T>>;

// A spec plus a parameter map that matches it exactly. Immutable after
// construction apart from set_parameter, which re-checks the shape.
template <typename T>
class BasicNetwork {
 public:
  BasicNetwork(NetworkSpec spec, ParameterMap<T> params);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const ParameterMap<T>& parameters() const noexcept { return params_; }
  const std::vector<BnLayerInfo>& bn_layers() const noexcept { return bn_layers_; }

  const BasicTensor<T>& param(const std::string& name) const;
  void set_parameter(const std::string& name, BasicTensor<T> value);

  std::size_t parameter_count() const;

  template <typename U>
  BasicNetwork<U> cast() const {
    ParameterMap<U> out;
    for (const auto& [name, t] : params_) out.emplace(name, t.template cast<U>());
    return BasicNetwork<U>(spec_, std::move(out));
  }

 private:
  NetworkSpec spec_;
  ParameterMap<T> params_;
  std::vector<BnLayerInfo> bn_layers_;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

extern template class BasicNetwork<float>;
extern template class BasicNetwork<double>;

enum class Init { Zeros, SeededRandom };

// Conv weights are He-normal, BN affine parameters are jittered around
// (1, 0), PReLU slopes start at 0.25. Running statistics are always mean 0,
// std 1.
Network build_network(const NetworkSpec& spec, Init init, std::uint64_t seed = 0);

// Per-channel mean and biased std (divide by the number of positions) of a
// channel-first tensor.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> sample_stats(const BasicTensor<T>& activations);

template <typename T>
struct BnObservation {
  std::size_t layer_index = 0;  // into BasicNetwork::bn_layers()
  std::string layer_id;
  BasicTensor<T> sample_mean;
  BasicTensor<T> sample_std;
  BasicTensor<T> stored_mean;
  BasicTensor<T> stored_std;
};

// Cached activations for one residual block, enough to run its backward.
template <typename T>
struct BlockCache {
  BasicTensor<T> input;              // also the bn1 input
  BasicTensor<T> conv1_out;          // bn2 input
  BasicTensor<T> bn2_out;            // activation input
  BasicTensor<T> conv2_out;          // bn3 input
  BasicTensor<T> shortcut_conv_out;  // downsample bn input; empty for identity shortcuts
};

template <typename T>
struct ForwardTrace {
  // image, B1, B2, B3, B4
  std::array<BasicTensor<T>, kTapCount> stage_outputs;
  BasicTensor<T> embedding;
  std::vector<BnObservation<T>> bn_observations;

  BasicTensor<T> stem_conv_out;  // stem bn input
  BasicTensor<T> stem_bn_out;    // stem activation input
  std::array<std::vector<BlockCache<T>>, 4> blocks;
  BasicTensor<T> head_fc_out;    // features bn input
  bool head_observed = false;
  bool stats_recorded = false;
};

// Counts full-network traversals. Owned by the caller, never shared.
struct PassCounter {
  std::size_t forward = 0;
  std::size_t backward = 0;
};

struct ForwardOptions {
  bool record_stats = true;
  // Observe the two BN layers of the embedding head.
  bool observe_head = true;
  PassCounter* counter = nullptr;
};

// Inference-mode forward pass. BN layers normalize with the stored running
// statistics; the sample statistics of every BN input are recorded on the
// side and never feed back into the activations.
template <typename T>
ForwardTrace<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& image,
                        const ForwardOptions& options = {});

// Re-runs everything downstream of `tap` with `replacement` substituted for
// that activation. Observations upstream of the tap are kept from `base`.
template <typename T>
ForwardTrace<T> forward_from(const BasicNetwork<T>& net, const ForwardTrace<T>& base, Tap tap,
                             const BasicTensor<T>& replacement, const ForwardOptions& options = {});

// Sets every layer's running mean/std to the statistics pooled over all
// images and positions, upstream layers first. With a single image the stored
// statistics then equal what that image produces.
template <typename T>
void calibrate_running_stats(BasicNetwork<T>& net, std::span<const BasicTensor<T>> images);

}  // namespace grafiq
