// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/backprop.hpp"

#include <cmath>

#include "grafiq/bns_loss.hpp"

namespace grafiq {

template <typename T>
const BasicTensor<T>& GradientReport<T>::at(Tap t) const {
  const auto& g = gradients[static_cast<std::size_t>(t)];
  if (!g) throw Error(ErrorCode::Usage, std::string("gradient at ") + tap_name(t) + " was not requested");
  return *g;
}

template struct GradientReport<float>;
template struct GradientReport<double>;

template <typename T>
BasicTensor<T> conv2d_backward_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weights,
                                     const Shape& input_shape, ConvGeometry geom) {
  require_rank(grad_out, 3, "conv2d_backward_input grad");
  require_rank(weights, 4, "conv2d_backward_input weights");
  if (input_shape.size() != 3) throw Error(ErrorCode::Dimension, "conv2d_backward_input: input must be rank 3");
  const std::size_t cin = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  if (weights.dim(1) != cin || grad_out.dim(0) != cout)
    throw Error(ErrorCode::Dimension, "conv2d_backward_input: channel mismatch");
  const std::size_t oh = conv_output_extent(h, kh, geom), ow = conv_output_extent(w, kw, geom);
  if (grad_out.dim(1) != oh || grad_out.dim(2) != ow)
    throw Error(ErrorCode::Dimension, "conv2d_backward_input: gradient shape " + shape_to_string(grad_out.shape()));

  BasicTensor<T> grad_in(input_shape);
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);
  const T* g = grad_out.data().data();
  const T* wt = weights.data().data();
  T* dst = grad_in.data().data();
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g_plane = g + co * oh * ow;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      T* in_plane = dst + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T k = wt[((co * cin + ci) * kh + ky) * kw + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            T* in_row = in_plane + iy * static_cast<std::ptrdiff_t>(w);
            const T* g_row = g_plane + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              in_row[ix] += k * g_row[ox];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> bn_inference_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& running_std,
                                     const BasicTensor<T>& gamma, double epsilon) {
  const std::size_t channels = grad_out.dim(0);
  if (running_std.size() != channels || gamma.size() != channels)
    throw Error(ErrorCode::Dimension, "bn_inference_backward: channel mismatch");
  const std::vector<T> scale = bn_scale(running_std, gamma, epsilon);
  const std::size_t inner = grad_out.size() / channels;
  BasicTensor<T> out(grad_out.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = scale[c] * grad_out[c * inner + i];
  }
  return out;
}

template <typename T>
BasicTensor<T> prelu_backward(const BasicTensor<T>& input, const BasicTensor<T>& slope, const BasicTensor<T>& grad_out) {
  if (input.shape() != grad_out.shape()) throw Error(ErrorCode::Dimension, "prelu_backward: shape mismatch");
  const std::size_t channels = input.dim(0);
  if (slope.size() != channels) throw Error(ErrorCode::Dimension, "prelu_backward: slope length");
  const std::size_t inner = input.size() / channels;
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t k = c * inner + i;
      out[k] = input[k] > T(0) ? grad_out[k] : slope[c] * grad_out[k];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  if (input.shape() != grad_out.shape()) throw Error(ErrorCode::Dimension, "relu_backward: shape mismatch");
  BasicTensor<T> out(input.shape());
  for (std::size_t k = 0; k < input.size(); ++k) out[k] = input[k] > T(0) ? grad_out[k] : T(0);
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> add_backward(const BasicTensor<T>& grad_out) {
  return {grad_out, grad_out};
}

template <typename T>
BasicTensor<T> linear_backward_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weights, const Shape& input_shape) {
  require_rank(weights, 2, "linear_backward_input weights");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (grad_out.size() != m || shape_numel(input_shape) != n)
    throw Error(ErrorCode::Dimension, "linear_backward_input: shape mismatch");
  BasicTensor<T> out(input_shape);
  for (std::size_t r = 0; r < m; ++r) {
    const T g = grad_out[r];
    const T* row = weights.data().data() + r * n;
    for (std::size_t k = 0; k < n; ++k) out[k] += row[k] * g;
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  if (input_shape.size() != 3 || grad_out.size() != input_shape[0])
    throw Error(ErrorCode::Dimension, "global_avg_pool_backward: shape mismatch");
  const std::size_t inner = input_shape[1] * input_shape[2];
  BasicTensor<T> out(input_shape);
  for (std::size_t c = 0; c < input_shape[0]; ++c) {
    const T g = grad_out[c] / static_cast<T>(inner);
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = g;
  }
  return out;
}

template <typename T>
BasicTensor<T> stats_backward(const BasicTensor<T>& activations, const BasicTensor<T>& mean, const BasicTensor<T>& std,
                              const BasicTensor<T>& grad_mean, const BasicTensor<T>& grad_std, double std_floor) {
  const std::size_t channels = activations.dim(0);
  if (mean.size() != channels || std.size() != channels || grad_mean.size() != channels || grad_std.size() != channels)
    throw Error(ErrorCode::Dimension, "stats_backward: channel mismatch");
  const std::size_t inner = activations.size() / channels;
  const T n = static_cast<T>(inner);
  BasicTensor<T> out(activations.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T gm = grad_mean[c] / n;
    const bool flat = !(static_cast<double>(std[c]) >= std_floor);
    const T gs = flat ? T(0) : grad_std[c] / (n * std[c]);
    const T mu = mean[c];
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t k = c * inner + i;
      out[k] = gm + gs * (activations[k] - mu);
    }
  }
  return out;
}

namespace {

template <typename T>
void accumulate(BasicTensor<T>& into, const BasicTensor<T>& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

template <typename T>
class BackwardSchedule {
 public:
  BackwardSchedule(const BasicNetwork<T>& net, const ForwardTrace<T>& trace, const BackwardOptions& options)
      : net_(net), trace_(trace), options_(options), by_layer_(net.bn_layers().size(), nullptr) {
    check_consistency();
    const double scale = 2.0 / static_cast<double>(trace.bn_observations.size());
    for (const auto& obs : trace.bn_observations) {
      by_layer_[obs.layer_index] = &obs;
      const std::size_t c = obs.sample_mean.size();
      BasicTensor<T> gm({c}), gs({c});
      for (std::size_t i = 0; i < c; ++i) {
        gm[i] = static_cast<T>(scale * (static_cast<double>(obs.sample_mean[i]) - static_cast<double>(obs.stored_mean[i])));
        gs[i] = static_cast<T>(scale * (static_cast<double>(obs.sample_std[i]) - static_cast<double>(obs.stored_std[i])));
      }
      grad_mean_.emplace(obs.layer_index, std::move(gm));
      grad_std_.emplace(obs.layer_index, std::move(gs));
    }
    const auto& layers = net.bn_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) index_.emplace(layers[i].id, i);
  }

  void run(TapSet taps, GradientReport<T>& report) {
    std::size_t lowest = kTapCount;
    for (Tap t : kAllTaps) {
      if (taps.contains(t)) {
        lowest = static_cast<std::size_t>(t);
        break;
      }
    }
    if (lowest == kTapCount) return;

    BasicTensor<T> g = head();
    if (taps.contains(Tap::B4)) report.gradients[4] = g;
    const NetworkSpec& spec = net_.spec();
    for (std::size_t s = 4; s-- > lowest;) {
      for (std::size_t b = spec.stage_depths[s]; b-- > 0;) g = block(s, b, g);
      if (s >= 1 && taps.contains(static_cast<Tap>(s))) report.gradients[s] = g;
    }
    if (taps.contains(Tap::Image)) report.gradients[0] = stem(g);
  }

 private:
  void check_consistency() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::Consistency, "backward_bns: " + msg); };
    if (!trace_.stats_recorded || trace_.bn_observations.empty()) fail("trace has no BN observations");
    const auto& layers = net_.bn_layers();
    std::size_t previous = 0;
    bool first = true;
    for (const auto& obs : trace_.bn_observations) {
      if (obs.layer_index >= layers.size() || layers[obs.layer_index].id != obs.layer_id)
        fail("observation '" + obs.layer_id + "' does not match the network's BN layers");
      if (!first && obs.layer_index <= previous) fail("observations out of order");
      first = false;
      previous = obs.layer_index;
      if (!(obs.stored_mean == net_.param(obs.layer_id + ".running_mean")) ||
          !(obs.stored_std == net_.param(obs.layer_id + ".running_std")))
        fail("stored statistics of '" + obs.layer_id + "' differ from the network's");
    }
    const std::size_t expected = layers.size() - (trace_.head_observed ? 0 : 2);
    if (trace_.bn_observations.size() != expected)
      fail("trace has " + std::to_string(trace_.bn_observations.size()) + " BN observations, expected " +
           std::to_string(expected));
    const NetworkSpec& spec = net_.spec();
    for (std::size_t s = 0; s < 4; ++s) {
      if (trace_.blocks[s].size() != spec.stage_depths[s]) fail("block caches do not match the topology");
    }
    if (trace_.stage_outputs[0].rank() != 3 || trace_.stage_outputs[0].dim(1) != spec.input_height)
      fail("image shape does not match the network");
  }

  double eps() const { return net_.spec().bn_epsilon; }

  // Cotangent arriving at a BN input: the affine pass-through plus the
  // loss term of that layer's sample statistics.
  BasicTensor<T> bn(const std::string& id, const BasicTensor<T>* upstream, const BasicTensor<T>& input) {
    BasicTensor<T> g = upstream ? bn_inference_backward(*upstream, net_.param(id + ".running_std"),
                                                        net_.param(id + ".gamma"), eps())
                                : BasicTensor<T>(input.shape());
    const std::size_t layer = index_.at(id);
    if (const BnObservation<T>* obs = by_layer_[layer]) {
      accumulate(g, stats_backward(input, obs->sample_mean, obs->sample_std, grad_mean_.at(layer),
                                   grad_std_.at(layer), options_.std_floor));
    }
    return g;
  }

  BasicTensor<T> activation(const std::string& id, const BasicTensor<T>& input, const BasicTensor<T>& g) {
    if (net_.spec().activation == Activation::Relu) return relu_backward(input, g);
    return prelu_backward(input, net_.param(id + ".slope"), g);
  }

  BasicTensor<T> head() {
    const BasicTensor<T>& b4 = trace_.stage_outputs[4];
    // Nothing consumes the embedding, so the features BN only contributes
    // its statistics term.
    const BasicTensor<T> g_fc = bn("head.features", nullptr, trace_.head_fc_out);
    const bool average = net_.spec().head_pool == HeadPool::Average;
    const Shape pooled = average ? Shape{b4.dim(0)} : b4.shape();
    BasicTensor<T> g_pool = linear_backward_input(g_fc, net_.param("head.fc.weight"), pooled);
    if (average) g_pool = global_avg_pool_backward(g_pool, b4.shape());
    return bn("head.bn", &g_pool, b4);
  }

  BasicTensor<T> block(std::size_t s, std::size_t b, const BasicTensor<T>& g_out) {
    const BlockCache<T>& cache = trace_.blocks[s][b];
    const std::string p = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
    const std::size_t stride = b == 0 ? 2 : 1;
    auto [g_main, g_short] = add_backward(g_out);

    const BasicTensor<T> g_conv2 = bn(p + ".bn3", &g_main, cache.conv2_out);
    const BasicTensor<T> g_act =
        conv2d_backward_input(g_conv2, net_.param(p + ".conv2.weight"), cache.bn2_out.shape(), {stride, 1});
    const BasicTensor<T> g_bn2 = activation(p + ".prelu", cache.bn2_out, g_act);
    const BasicTensor<T> g_conv1 = bn(p + ".bn2", &g_bn2, cache.conv1_out);
    const BasicTensor<T> g_h1 =
        conv2d_backward_input(g_conv1, net_.param(p + ".conv1.weight"), cache.input.shape(), {1, 1});
    BasicTensor<T> g_in = bn(p + ".bn1", &g_h1, cache.input);

    if (b == 0) {
      const BasicTensor<T> g_ds = bn(p + ".downsample.bn", &g_short, cache.shortcut_conv_out);
      accumulate(g_in, conv2d_backward_input(g_ds, net_.param(p + ".downsample.conv.weight"), cache.input.shape(),
                                             {stride, 0}));
    } else {
      accumulate(g_in, g_short);
    }
    return g_in;
  }

  BasicTensor<T> stem(const BasicTensor<T>& g_stem_out) {
    const BasicTensor<T> g_bn = activation("stem.prelu", trace_.stem_bn_out, g_stem_out);
    const BasicTensor<T> g_conv = bn("stem.bn", &g_bn, trace_.stem_conv_out);
    return conv2d_backward_input(g_conv, net_.param("stem.conv.weight"), trace_.stage_outputs[0].shape(), {1, 1});
  }

  const BasicNetwork<T>& net_;
  const ForwardTrace<T>& trace_;
  const BackwardOptions& options_;
  std::vector<const BnObservation<T>*> by_layer_;
  std::map<std::size_t, BasicTensor<T>> grad_mean_, grad_std_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace

template <typename T>
GradientReport<T> backward_bns(const BasicNetwork<T>& net, const ForwardTrace<T>& trace, TapSet taps,
                               const BackwardOptions& options) {
  GradientReport<T> report;
  BackwardSchedule<T> schedule(net, trace, options);
  report.loss_value = mse_bns(trace.bn_observations);
  schedule.run(taps, report);
  for (Tap t : kAllTaps) {
    const auto& g = report.gradients[static_cast<std::size_t>(t)];
    if (g && !g->all_finite())
      throw Error(ErrorCode::NumericOverflow, std::string("backward_bns: non-finite gradient at ") + tap_name(t));
  }
  if (options.counter) ++options.counter->backward;
  return report;
}

#define GRAFIQ_INSTANTIATE_BACKPROP(T)                                                                     \
  template GradientReport<T> backward_bns(const BasicNetwork<T>&, const ForwardTrace<T>&, TapSet,          \
                                          const BackwardOptions&);                                         \
  template BasicTensor<T> conv2d_backward_input(const BasicTensor<T>&, const BasicTensor<T>&, const Shape&, \
                                                ConvGeometry);                                             \
  template BasicTensor<T> bn_inference_backward(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                                const BasicTensor<T>&, double);                            \
  template BasicTensor<T> prelu_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template std::pair<BasicTensor<T>, BasicTensor<T>> add_backward(const BasicTensor<T>&);                  \
  template BasicTensor<T> linear_backward_input(const BasicTensor<T>&, const BasicTensor<T>&, const Shape&); \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&);                   \
  template BasicTensor<T> stats_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                         const BasicTensor<T>&, const BasicTensor<T>&, double);

GRAFIQ_INSTANTIATE_BACKPROP(float)
GRAFIQ_INSTANTIATE_BACKPROP(double)

}  // namespace grafiq
