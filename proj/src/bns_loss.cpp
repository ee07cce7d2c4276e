// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/bns_loss.hpp"

namespace grafiq {

template <typename T>
double mse_bns(std::span<const BnObservation<T>> observations) {
  if (observations.empty()) throw Error(ErrorCode::Usage, "mse_bns: no BN observations");
  double total = 0.0;
  for (const auto& obs : observations) {
    const std::size_t c = obs.sample_mean.size();
    if (obs.sample_std.size() != c || obs.stored_mean.size() != c || obs.stored_std.size() != c)
      throw Error(ErrorCode::Dimension, "mse_bns: statistics of '" + obs.layer_id + "' differ in length");
    double layer = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const double dm = static_cast<double>(obs.stored_mean[i]) - static_cast<double>(obs.sample_mean[i]);
      const double ds = static_cast<double>(obs.stored_std[i]) - static_cast<double>(obs.sample_std[i]);
      layer += dm * dm + ds * ds;
    }
    total += layer;
  }
  return total / static_cast<double>(observations.size());
}

template double mse_bns(std::span<const BnObservation<float>>);
template double mse_bns(std::span<const BnObservation<double>>);

}  // namespace grafiq
