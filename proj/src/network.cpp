// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "grafiq/kernels.hpp"
#include "grafiq/random.hpp"
#include "json.hpp"

namespace grafiq {

using json = nlohmann::json;

NetworkSpec NetworkSpec::resnet100() { return NetworkSpec{}; }

NetworkSpec NetworkSpec::tiny(std::size_t stem_width, std::size_t input_size, std::size_t embedding_dim) {
  NetworkSpec spec;
  spec.stage_depths = {1, 1, 1, 1};
  spec.stem_width = stem_width;
  spec.embedding_dim = embedding_dim;
  spec.input_height = spec.input_width = input_size;
  return spec;
}

void NetworkSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::Spec, "network spec: " + msg); };
  for (std::size_t d : stage_depths) {
    if (d < 1) fail("every stage needs at least one residual block");
  }
  for (std::size_t m : width_multipliers) {
    if (m < 1) fail("width multipliers must be >= 1");
  }
  if (stem_width < 1) fail("stem_width must be >= 1");
  if (embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (input_height != input_width) fail("input must be square");
  if (input_height < 16 || input_height % 16 != 0) fail("input size must be a positive multiple of 16");
  if (!(bn_epsilon > 0.0) || !std::isfinite(bn_epsilon)) fail("bn_epsilon must be finite and > 0");
}

std::string spec_to_json(const NetworkSpec& spec) {
  json j;
  j["stage_depths"] = spec.stage_depths;
  j["stem_width"] = spec.stem_width;
  j["width_multipliers"] = spec.width_multipliers;
  j["embedding_dim"] = spec.embedding_dim;
  j["input_size"] = {spec.input_height, spec.input_width};
  j["activation"] = spec.activation == Activation::PRelu ? "prelu" : "relu";
  j["bn_epsilon"] = spec.bn_epsilon;
  j["head_pool"] = spec.head_pool == HeadPool::Flatten ? "flatten" : "average";
  return j.dump();
}

namespace {

std::size_t positive(const json& v, const char* key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw Error(ErrorCode::Spec, std::string("network spec: '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

template <std::size_t N>
std::array<std::size_t, N> positive_array(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N)
    throw Error(ErrorCode::Spec, std::string("network spec: '") + key + "' must have " + std::to_string(N) + " entries");
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = positive(v[i], key);
  return out;
}

}  // namespace

NetworkSpec spec_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Spec, "network spec: not a JSON object");
  NetworkSpec spec;
  try {
    spec.stage_depths = positive_array<4>(j, "stage_depths");
    spec.stem_width = positive(j.at("stem_width"), "stem_width");
    spec.width_multipliers = positive_array<4>(j, "width_multipliers");
    spec.embedding_dim = positive(j.at("embedding_dim"), "embedding_dim");
    const auto size = positive_array<2>(j, "input_size");
    spec.input_height = size[0];
    spec.input_width = size[1];
    const std::string act = j.at("activation").get<std::string>();
    if (act == "prelu") spec.activation = Activation::PRelu;
    else if (act == "relu") spec.activation = Activation::Relu;
    else throw Error(ErrorCode::Spec, "network spec: unknown activation '" + act + "'");
    spec.bn_epsilon = j.at("bn_epsilon").get<double>();
    const std::string pool = j.value("head_pool", std::string("flatten"));
    if (pool == "flatten") spec.head_pool = HeadPool::Flatten;
    else if (pool == "average") spec.head_pool = HeadPool::Average;
    else throw Error(ErrorCode::Spec, "network spec: unknown head_pool '" + pool + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Spec, std::string("network spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

const char* tap_name(Tap tap) noexcept {
  switch (tap) {
    case Tap::Image: return "image";
    case Tap::B1: return "b1";
    case Tap::B2: return "b2";
    case Tap::B3: return "b3";
    case Tap::B4: return "b4";
  }
  return "?";
}

Tap tap_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Tap t : kAllTaps) {
    if (lower == tap_name(t)) return t;
  }
  throw Error(ErrorCode::Usage, "unknown tap '" + std::string(name) + "'");
}

namespace {

std::string block_prefix(std::size_t stage, std::size_t block) {
  return "stage" + std::to_string(stage + 1) + ".block" + std::to_string(block);
}

void add_bn(std::vector<ParamInfo>& out, const std::string& prefix, std::size_t channels) {
  for (const char* leaf : {".gamma", ".beta", ".running_mean", ".running_std"})
    out.push_back({prefix + leaf, {channels}});
}

std::size_t head_fc_inputs(const NetworkSpec& spec) {
  const std::size_t c = spec.stage_channels(3);
  return spec.head_pool == HeadPool::Flatten ? c * spec.final_height() * spec.final_width() : c;
}

}  // namespace

std::vector<ParamInfo> parameter_layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<ParamInfo> out;
  const bool prelu = spec.activation == Activation::PRelu;
  out.push_back({"stem.conv.weight", {spec.stem_width, 3, 3, 3}});
  add_bn(out, "stem.bn", spec.stem_width);
  if (prelu) out.push_back({"stem.prelu.slope", {spec.stem_width}});

  std::size_t in = spec.stem_width;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t width = spec.stage_channels(s);
    for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) {
      const std::string p = block_prefix(s, b);
      add_bn(out, p + ".bn1", in);
      out.push_back({p + ".conv1.weight", {width, in, 3, 3}});
      add_bn(out, p + ".bn2", width);
      if (prelu) out.push_back({p + ".prelu.slope", {width}});
      out.push_back({p + ".conv2.weight", {width, width, 3, 3}});
      add_bn(out, p + ".bn3", width);
      if (b == 0) {
        out.push_back({p + ".downsample.conv.weight", {width, in, 1, 1}});
        add_bn(out, p + ".downsample.bn", width);
      }
      in = width;
    }
  }
  add_bn(out, "head.bn", in);
  out.push_back({"head.fc.weight", {spec.embedding_dim, head_fc_inputs(spec)}});
  out.push_back({"head.fc.bias", {spec.embedding_dim}});
  add_bn(out, "head.features", spec.embedding_dim);
  return out;
}

std::vector<BnLayerInfo> bn_layer_layout(const NetworkSpec& spec) {
  std::vector<BnLayerInfo> out;
  for (const ParamInfo& p : parameter_layout(spec)) {
    constexpr std::string_view leaf = ".gamma";
    if (p.name.size() > leaf.size() && p.name.ends_with(leaf)) {
      std::string id = p.name.substr(0, p.name.size() - leaf.size());
      const bool head = id.starts_with("head.");
      out.push_back({std::move(id), p.shape[0], head});
    }
  }
  return out;
}

template <typename T>
BasicNetwork<T>::BasicNetwork(NetworkSpec spec, ParameterMap<T> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const auto layout = parameter_layout(spec_);
  if (layout.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "network has " + std::to_string(params_.size()) +
                                              " tensors, spec requires " + std::to_string(layout.size()));
  }
  for (const ParamInfo& info : layout) {
    auto it = params_.find(info.name);
    if (it == params_.end()) throw Error(ErrorCode::ShapeMismatch, "missing parameter '" + info.name + "'");
    if (it->second.shape() != info.shape) {
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + info.name + "' has shape " +
                                                shape_to_string(it->second.shape()) + ", spec requires " +
                                                shape_to_string(info.shape));
    }
  }
  bn_layers_ = bn_layer_layout(spec_);
  for (const BnLayerInfo& layer : bn_layers_) {
    const auto& mean = params_.at(layer.id + ".running_mean");
    const auto& sd = params_.at(layer.id + ".running_std");
    if (!mean.all_finite() || !sd.all_finite())
      throw Error(ErrorCode::NonFiniteStats, "non-finite running statistics in '" + layer.id + "'");
    for (T v : sd.data()) {
      if (v < T(0)) throw Error(ErrorCode::NonFiniteStats, "negative running std in '" + layer.id + "'");
    }
  }
}

template <typename T>
const BasicTensor<T>& BasicNetwork<T>::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::Consistency, "no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
void BasicNetwork<T>::set_parameter(const std::string& name, BasicTensor<T> value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::Consistency, "no parameter named '" + name + "'");
  if (it->second.shape() != value.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter '" + name + "' expects shape " +
                                              shape_to_string(it->second.shape()));
  }
  if (name.ends_with(".running_mean") || name.ends_with(".running_std")) {
    if (!value.all_finite()) throw Error(ErrorCode::NonFiniteStats, "non-finite running statistics for '" + name + "'");
    if (name.ends_with(".running_std")) {
      for (T v : value.data()) {
        if (v < T(0)) throw Error(ErrorCode::NonFiniteStats, "negative running std for '" + name + "'");
      }
    }
  }
  it->second = std::move(value);
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

Network build_network(const NetworkSpec& spec, Init init, std::uint64_t seed) {
  Rng rng(seed);
  ParameterMap<float> params;
  const bool random = init == Init::SeededRandom;
  for (const ParamInfo& info : parameter_layout(spec)) {
    Tensor t(info.shape);
    const std::string& n = info.name;
    if (n.ends_with(".running_std") || (n.ends_with(".gamma") && !random)) {
      std::fill(t.data().begin(), t.data().end(), 1.0f);
    } else if (n.ends_with(".slope")) {
      std::fill(t.data().begin(), t.data().end(), 0.25f);
    } else if (!random || n.ends_with(".running_mean")) {
      // zeros
    } else if (n.ends_with(".gamma")) {
      for (float& v : t.data()) v = static_cast<float>(rng.uniform(0.75, 1.25));
    } else if (n.ends_with(".beta")) {
      for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, 0.1));
    } else if (info.shape.size() == 4) {
      const double fan_in = static_cast<double>(info.shape[1] * info.shape[2] * info.shape[3]);
      const double sd = std::sqrt(2.0 / fan_in);
      for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, sd));
    } else {
      // fc weight and bias
      const std::string weight_name = n.ends_with(".bias") ? n.substr(0, n.size() - 5) + ".weight" : n;
      std::size_t fan_in = 1;
      for (const ParamInfo& other : parameter_layout(spec)) {
        if (other.name == weight_name) fan_in = other.shape.at(1);
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    params.emplace(n, std::move(t));
  }
  return Network(spec, std::move(params));
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> sample_stats(const BasicTensor<T>& activations) {
  if (activations.rank() == 0 || activations.empty())
    throw Error(ErrorCode::Dimension, "sample_stats: empty tensor");
  const std::size_t channels = activations.dim(0);
  const std::size_t inner = activations.size() / channels;
  BasicTensor<T> mean({channels}), sd({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    const T* x = activations.data().data() + c * inner;
    double sum = 0;
    for (std::size_t i = 0; i < inner; ++i) sum += x[i];
    const double mu = sum / static_cast<double>(inner);
    double sq = 0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = x[i] - mu;
      sq += d * d;
    }
    mean[c] = static_cast<T>(mu);
    sd[c] = static_cast<T>(std::sqrt(sq / static_cast<double>(inner)));
  }
  return {std::move(mean), std::move(sd)};
}

namespace {

template <typename T>
class ForwardRunner {
 public:
  ForwardRunner(const BasicNetwork<T>& net, ForwardTrace<T>& trace, const ForwardOptions& options)
      : net_(net), trace_(trace), options_(options) {
    const auto& layers = net.bn_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) index_.emplace(layers[i].id, i);
  }

  void run(Tap start) {
    const NetworkSpec& spec = net_.spec();
    const std::size_t first_stage = static_cast<std::size_t>(start);
    if (start == Tap::Image) {
      const auto& img = trace_.stage_outputs[0];
      if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) != spec.input_height || img.dim(2) != spec.input_width) {
        throw Error(ErrorCode::Dimension, "forward: image must be [3," + std::to_string(spec.input_height) + "," +
                                              std::to_string(spec.input_width) + "], got " +
                                              shape_to_string(img.shape()));
      }
      if (!img.all_finite()) throw Error(ErrorCode::NumericOverflow, "forward: non-finite input image");
      trace_.stem_conv_out = checked("stem.conv", conv2d(img, net_.param("stem.conv.weight"), {1, 1}));
      trace_.stem_bn_out = bn("stem.bn", trace_.stem_conv_out);
    }
    // The stem output itself is only needed to feed stage 1.
    BasicTensor<T> x = first_stage == 0 ? activate("stem.prelu", trace_.stem_bn_out)
                                        : trace_.stage_outputs[first_stage];
    trace_.head_observed = options_.record_stats && options_.observe_head;
    for (std::size_t s = first_stage; s < 4; ++s) {
      auto& caches = trace_.blocks[s];
      caches.assign(spec.stage_depths[s], BlockCache<T>{});
      for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) x = block(s, b, std::move(x), caches[b]);
      trace_.stage_outputs[s + 1] = x;
    }
    head(x);
  }

 private:
  BasicTensor<T> checked(const std::string& layer, BasicTensor<T> t) {
    if (!t.all_finite()) throw Error(ErrorCode::NumericOverflow, "forward: non-finite value after '" + layer + "'");
    return t;
  }

  BasicTensor<T> bn(const std::string& id, const BasicTensor<T>& input, bool head_layer = false) {
    const auto& mean = net_.param(id + ".running_mean");
    const auto& sd = net_.param(id + ".running_std");
    if (options_.record_stats && (!head_layer || options_.observe_head)) {
      auto [m, s] = sample_stats(input);
      trace_.bn_observations.push_back({index_.at(id), id, std::move(m), std::move(s), mean, sd});
    }
    return checked(id, bn_inference(input, mean, sd, net_.param(id + ".gamma"), net_.param(id + ".beta"),
                                    net_.spec().bn_epsilon));
  }

  BasicTensor<T> activate(const std::string& id, const BasicTensor<T>& input) {
    if (net_.spec().activation == Activation::Relu) return relu(input);
    return prelu(input, net_.param(id + ".slope"));
  }

  BasicTensor<T> block(std::size_t s, std::size_t b, BasicTensor<T> input, BlockCache<T>& cache) {
    const std::string p = block_prefix(s, b);
    const std::size_t stride = b == 0 ? 2 : 1;
    cache.input = std::move(input);
    const BasicTensor<T> h1 = bn(p + ".bn1", cache.input);
    cache.conv1_out = checked(p + ".conv1", conv2d(h1, net_.param(p + ".conv1.weight"), {1, 1}));
    cache.bn2_out = bn(p + ".bn2", cache.conv1_out);
    const BasicTensor<T> h4 = activate(p + ".prelu", cache.bn2_out);
    cache.conv2_out = checked(p + ".conv2", conv2d(h4, net_.param(p + ".conv2.weight"), {stride, 1}));
    BasicTensor<T> out = bn(p + ".bn3", cache.conv2_out);
    if (b == 0) {
      cache.shortcut_conv_out =
          checked(p + ".downsample.conv", conv2d(cache.input, net_.param(p + ".downsample.conv.weight"), {stride, 0}));
      return checked(p, add(out, bn(p + ".downsample.bn", cache.shortcut_conv_out)));
    }
    return checked(p, add(out, cache.input));
  }

  void head(const BasicTensor<T>& b4) {
    BasicTensor<T> h = bn("head.bn", b4, true);
    if (net_.spec().head_pool == HeadPool::Average) h = global_avg_pool(h);
    trace_.head_fc_out = checked("head.fc", linear(h, net_.param("head.fc.weight"), net_.param("head.fc.bias")));
    trace_.embedding = bn("head.features", trace_.head_fc_out, true);
  }

  const BasicNetwork<T>& net_;
  ForwardTrace<T>& trace_;
  const ForwardOptions& options_;
  std::map<std::string, std::size_t> index_;
};

// Index of the first BN layer that belongs downstream of `tap`.
template <typename T>
std::size_t first_layer_after(const BasicNetwork<T>& net, Tap tap) {
  if (tap == Tap::Image) return 0;
  const auto& layers = net.bn_layers();
  const std::string next = tap == Tap::B4 ? "head." : "stage" + std::to_string(static_cast<std::size_t>(tap) + 1) + ".";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].id.starts_with(next)) return i;
  }
  return layers.size();
}

}  // namespace

template <typename T>
ForwardTrace<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& image, const ForwardOptions& options) {
  ForwardTrace<T> trace;
  trace.stats_recorded = options.record_stats;
  trace.stage_outputs[0] = image;
  ForwardRunner<T>(net, trace, options).run(Tap::Image);
  if (options.counter) ++options.counter->forward;
  return trace;
}

template <typename T>
ForwardTrace<T> forward_from(const BasicNetwork<T>& net, const ForwardTrace<T>& base, Tap tap,
                             const BasicTensor<T>& replacement, const ForwardOptions& options) {
  const std::size_t idx = static_cast<std::size_t>(tap);
  if (base.stage_outputs[idx].shape() != replacement.shape()) {
    throw Error(ErrorCode::Dimension, std::string("forward_from: replacement for ") + tap_name(tap) +
                                          " has shape " + shape_to_string(replacement.shape()));
  }
  if (options.record_stats != base.stats_recorded)
    throw Error(ErrorCode::Consistency, "forward_from: record_stats must match the base trace");
  ForwardTrace<T> trace = base;
  trace.stage_outputs[idx] = replacement;
  const std::size_t keep = first_layer_after(net, tap);
  std::erase_if(trace.bn_observations, [keep](const BnObservation<T>& o) { return o.layer_index >= keep; });
  ForwardRunner<T>(net, trace, options).run(tap);
  if (options.counter) ++options.counter->forward;
  return trace;
}

template <typename T>
void calibrate_running_stats(BasicNetwork<T>& net, std::span<const BasicTensor<T>> images) {
  if (images.empty()) throw Error(ErrorCode::Usage, "calibrate_running_stats: no images");
  const std::size_t layers = net.bn_layers().size();
  ForwardOptions opts;
  opts.observe_head = true;
  // Layer k's input only depends on layers before it, so pass k settles
  // layer k; stop early once nothing moves.
  for (std::size_t pass = 0; pass <= layers; ++pass) {
    // Pooled over images and positions: within-image variance plus the
    // spread of the per-image means (Welford).
    std::vector<std::vector<double>> mean_acc(layers), m2_acc(layers), var_acc(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      mean_acc[l].assign(net.bn_layers()[l].channels, 0.0);
      m2_acc[l].assign(net.bn_layers()[l].channels, 0.0);
      var_acc[l].assign(net.bn_layers()[l].channels, 0.0);
    }
    double seen = 0.0;
    for (const auto& image : images) {
      seen += 1.0;
      const auto trace = forward(net, image, opts);
      for (const auto& obs : trace.bn_observations) {
        for (std::size_t c = 0; c < obs.sample_mean.size(); ++c) {
          const double m = obs.sample_mean[c], sd = obs.sample_std[c];
          double& mean = mean_acc[obs.layer_index][c];
          const double delta = m - mean;
          mean += delta / seen;
          m2_acc[obs.layer_index][c] += delta * (m - mean);
          var_acc[obs.layer_index][c] += sd * sd;
        }
      }
    }
    bool changed = false;
    const double n = static_cast<double>(images.size());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string& id = net.bn_layers()[l].id;
      BasicTensor<T> mean({mean_acc[l].size()}), sd({mean_acc[l].size()});
      for (std::size_t c = 0; c < mean.size(); ++c) {
        mean[c] = static_cast<T>(mean_acc[l][c]);
        sd[c] = static_cast<T>(std::sqrt((var_acc[l][c] + m2_acc[l][c]) / n));
      }
      changed = changed || !(mean == net.param(id + ".running_mean")) || !(sd == net.param(id + ".running_std"));
      net.set_parameter(id + ".running_mean", std::move(mean));
      net.set_parameter(id + ".running_std", std::move(sd));
    }
    if (!changed) return;
  }
}

#define GRAFIQ_INSTANTIATE_NETWORK(T)                                                                  \
  template std::pair<BasicTensor<T>, BasicTensor<T>> sample_stats(const BasicTensor<T>&);             \
  template ForwardTrace<T> forward(const BasicNetwork<T>&, const BasicTensor<T>&, const ForwardOptions&); \
  template ForwardTrace<T> forward_from(const BasicNetwork<T>&, const ForwardTrace<T>&, Tap,           \
                                        const BasicTensor<T>&, const ForwardOptions&);                \
  template void calibrate_running_stats(BasicNetwork<T>&, std::span<const BasicTensor<T>>);

GRAFIQ_INSTANTIATE_NETWORK(float)
GRAFIQ_INSTANTIATE_NETWORK(double)

}  // namespace grafiq
