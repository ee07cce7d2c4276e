// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/selfcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <string_view>

#include "grafiq/backprop.hpp"
#include "grafiq/bns_loss.hpp"
#include "grafiq/kernels.hpp"
#include "grafiq/network.hpp"
#include "grafiq/random.hpp"

namespace grafiq {

bool SelfCheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SelfCheckReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return c.name;
  }
  return {};
}

double gradient_tolerance(Precision precision) { return precision == Precision::F64 ? 1e-5 : 1e-2; }

double derivative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

namespace {

constexpr std::array<std::string_view, 8> kKernelNames{
    "conv2d_backward_input", "bn_inference_backward", "prelu_backward",          "relu_backward",
    "add_backward",          "linear_backward_input", "global_avg_pool_backward", "stats_backward"};

// Errors on derivatives smaller than this fraction of the largest sampled
// derivative are measured against that scale instead of their own size.
constexpr double kRelativeFloor = 1e-4;

// Loss value plus the sign pattern of every activation input, so a probe
// pair that straddles a PReLU/ReLU kink can be recognised.
struct Probe {
  double value = 0.0;
  std::vector<bool> signs;
};
using ProbeFn = std::function<Probe(const Tensor64&)>;
using ScalarFn = std::function<double(const Tensor64&)>;

template <typename T>
std::vector<bool> activation_signs(const ForwardTrace<T>& trace) {
  std::vector<bool> out;
  auto push = [&](const BasicTensor<T>& t) {
    for (T v : t.data()) out.push_back(v > T(0));
  };
  push(trace.stem_bn_out);
  for (const auto& stage : trace.blocks) {
    for (const auto& b : stage) push(b.bn2_out);
  }
  return out;
}

Tensor64 random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero, for kinked activations.
Tensor64 random_off_kink(Rng& rng, Shape shape) {
  Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

double dot(const Tensor64& a, const Tensor64& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= k) return idx;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

// Central differences on up to `samples` random elements. Elements whose
// probe pair crosses a kink are replaced by further random elements.
double max_fd_error(const ProbeFn& f, const Tensor64& x, const Tensor64& analytic, Rng& rng, std::size_t samples,
                    double h) {
  const auto order = sample_indices(rng, x.size(), x.size());
  std::vector<std::size_t> used;
  std::vector<double> numeric;
  Tensor64 probe = x;
  for (std::size_t i : order) {
    if (used.size() == samples) break;
    probe[i] = x[i] + h;
    const Probe up = f(probe);
    probe[i] = x[i] - h;
    const Probe down = f(probe);
    probe[i] = x[i];
    if (up.signs != down.signs) continue;
    used.push_back(i);
    numeric.push_back((up.value - down.value) / (2.0 * h));
  }
  double scale = 0;
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  double worst = 0;
  for (std::size_t k = 0; k < used.size(); ++k)
    worst = std::max(worst, derivative_error(analytic[used[k]], numeric[k], kRelativeFloor * scale));
  return worst;
}

double max_fd_error(const ScalarFn& f, const Tensor64& x, const Tensor64& analytic, Rng& rng, std::size_t samples,
                    double h) {
  return max_fd_error([&](const Tensor64& p) { return Probe{f(p), {}}; }, x, analytic, rng, samples, h);
}

template <typename T>
class Harness {
 public:
  Harness(const SelfCheckOptions& opts, SelfCheckReport& report)
      : opts_(opts), report_(report), rng_(opts.seed), tol_(gradient_tolerance(precision_of<T>())) {}

  void run_kernels() {
    {
      const Tensor64 x = random_tensor(rng_, {2, 5, 5}), w = random_tensor(rng_, {3, 2, 3, 3});
      const ConvGeometry g{2, 1};
      const Tensor64 u = random_tensor(rng_, conv2d(x, w, g).shape());
      const auto a = conv2d_backward_input(u.cast<T>(), w.cast<T>(), x.shape(), g);
      kernel("conv2d_backward_input", a, x, [&](const Tensor64& p) { return dot(u, conv2d(p, w, g)); });
    }
    {
      const Tensor64 x = random_tensor(rng_, {3, 4, 4}), mean = random_tensor(rng_, {3});
      const Tensor64 sd = random_tensor(rng_, {3}, 0.5, 2.0), gamma = random_tensor(rng_, {3}, 0.5, 1.5);
      const Tensor64 beta = random_tensor(rng_, {3}), u = random_tensor(rng_, {3, 4, 4});
      const auto a = bn_inference_backward(u.cast<T>(), sd.cast<T>(), gamma.cast<T>(), 1e-5);
      kernel("bn_inference_backward", a, x,
             [&](const Tensor64& p) { return dot(u, bn_inference(p, mean, sd, gamma, beta, 1e-5)); });
    }
    {
      const Tensor64 x = random_off_kink(rng_, {3, 4, 4}), slope = random_tensor(rng_, {3}, 0.05, 0.5);
      const Tensor64 u = random_tensor(rng_, {3, 4, 4});
      kernel("prelu_backward", prelu_backward(x.cast<T>(), slope.cast<T>(), u.cast<T>()), x,
             [&](const Tensor64& p) { return dot(u, prelu(p, slope)); });
      kernel("relu_backward", relu_backward(x.cast<T>(), u.cast<T>()), x,
             [&](const Tensor64& p) { return dot(u, relu(p)); });
    }
    {
      const Tensor64 a = random_tensor(rng_, {2, 3, 3}), b = random_tensor(rng_, {2, 3, 3});
      const Tensor64 u = random_tensor(rng_, {2, 3, 3});
      auto [ga, gb] = add_backward(u.cast<T>());
      kernel("add_backward", ga, a, [&](const Tensor64& p) { return dot(u, add(p, b)); });
      kernel("add_backward", gb, b, [&](const Tensor64& p) { return dot(u, add(a, p)); });
    }
    {
      const Tensor64 x = random_tensor(rng_, {7}), w = random_tensor(rng_, {4, 7}), bias = random_tensor(rng_, {4});
      const Tensor64 u = random_tensor(rng_, {4});
      kernel("linear_backward_input", linear_backward_input(u.cast<T>(), w.cast<T>(), x.shape()), x,
             [&](const Tensor64& p) { return dot(u, linear(p, w, bias)); });
    }
    {
      const Tensor64 x = random_tensor(rng_, {3, 4, 5}), u = random_tensor(rng_, {3});
      kernel("global_avg_pool_backward", global_avg_pool_backward(u.cast<T>(), x.shape()), x,
             [&](const Tensor64& p) { return dot(u, global_avg_pool(p)); });
    }
    {
      const Tensor64 x = random_tensor(rng_, {4, 3, 3});
      const Tensor64 gm = random_tensor(rng_, {4}), gs = random_tensor(rng_, {4});
      const auto xt = x.cast<T>();
      const auto [mean, sd] = sample_stats(xt);
      kernel("stats_backward", stats_backward(xt, mean, sd, gm.cast<T>(), gs.cast<T>()), x, [&](const Tensor64& p) {
        const auto [m, s] = sample_stats(p);
        return dot(gm, m) + dot(gs, s);
      });
    }
  }

  void run_networks() {
    std::array<double, kTapCount> worst{};
    double zero_loss = 0, zero_grad = 0;
    for (std::size_t k = 0; k < opts_.networks; ++k) {
      const NetworkSpec spec = NetworkSpec::tiny(4 + k % 5, 16, 8);
      const Network net = build_network(spec, Init::SeededRandom, rng_.next());
      const Network64 net64 = net.cast<double>();
      const Tensor64 image = random_tensor(rng_, {3, 16, 16}).cast<float>().cast<double>();

      const BasicNetwork<T> net_t = net.cast<T>();
      const auto trace_t = forward(net_t, image.cast<T>());
      const auto grads = backward_bns(net_t, trace_t, TapSet::all());
      const auto base = forward(net64, image);
      for (Tap tap : kAllTaps) {
        const std::size_t i = static_cast<std::size_t>(tap);
        const Tensor64 analytic = grads.gradients[i]->template cast<double>();
        const ProbeFn f = [&](const Tensor64& p) {
          const auto t = forward_from(net64, base, tap, p);
          return Probe{mse_bns(t.bn_observations), activation_signs(t)};
        };
        worst[i] = std::max(worst[i], max_fd_error(f, base.stage_outputs[i], analytic, rng_, opts_.samples,
                                                   opts_.perturbation));
      }

      BasicNetwork<T> matched = net_t;
      const BasicTensor<T> img_t = image.cast<T>();
      calibrate_running_stats(matched, std::span<const BasicTensor<T>>(&img_t, 1));
      const auto mt = forward(matched, img_t);
      const auto mg = backward_bns(matched, mt, TapSet::all());
      zero_loss = std::max(zero_loss, mg.loss_value);
      for (const auto& g : mg.gradients) {
        for (T v : g->data()) zero_grad = std::max(zero_grad, std::abs(static_cast<double>(v)));
      }
    }
    for (Tap tap : kAllTaps) {
      const double err = worst[static_cast<std::size_t>(tap)];
      report_.checks.push_back({std::string("end_to_end.") + tap_name(tap), err, tol_, err < tol_});
    }
    report_.checks.push_back({"zero_loss.loss", zero_loss, 1e-10, zero_loss < 1e-10});
    report_.checks.push_back({"zero_loss.gradient", zero_grad, 1e-6, zero_grad < 1e-6});
  }

 private:
  void kernel(const std::string& name, const BasicTensor<T>& analytic_t, const Tensor64& x, const ScalarFn& f) {
    Tensor64 analytic = analytic_t.template cast<double>();
    if (name == opts_.corrupt_kernel) {
      for (double& v : analytic.data()) v *= 1.5;
    }
    const double err = max_fd_error(f, x, analytic, rng_, opts_.samples, opts_.perturbation);
    for (auto& c : report_.checks) {
      if (c.name == name) {
        c.max_error = std::max(c.max_error, err);
        c.passed = c.max_error < tol_;
        return;
      }
    }
    report_.checks.push_back({name, err, tol_, err < tol_});
  }

  const SelfCheckOptions& opts_;
  SelfCheckReport& report_;
  Rng rng_;
  double tol_;
};

}  // namespace

SelfCheckReport run_selfcheck(const SelfCheckOptions& options) {
  if (!options.corrupt_kernel.empty() &&
      std::find(kKernelNames.begin(), kKernelNames.end(), options.corrupt_kernel) == kKernelNames.end())
    throw Error(ErrorCode::Usage, "unknown kernel '" + options.corrupt_kernel + "'");
  SelfCheckReport report;
  if (options.precision == Precision::F64) {
    Harness<double> h(options, report);
    h.run_kernels();
    h.run_networks();
  } else {
    Harness<float> h(options, report);
    h.run_kernels();
    h.run_networks();
  }
  return report;
}

}  // namespace grafiq
