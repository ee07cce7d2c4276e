// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "grafiq/network.hpp"

namespace grafiq {

// Layer-averaged squared-Euclidean discrepancy between stored and sample BN
// statistics:
//
//   (1/|L|) * sum_l ( ||mu_l - mu'_l||^2 + ||sigma_l - sigma'_l||^2 )
//
// The per-layer norms are plain sums over channels. Accumulates in double.
// Throws Usage on an empty list.
template <typename T>
double mse_bns(std::span<const BnObservation<T>> observations);

template <typename T>
double mse_bns(const std::vector<BnObservation<T>>& observations) {
  return mse_bns(std::span<const BnObservation<T>>(observations));
}

}  // namespace grafiq
