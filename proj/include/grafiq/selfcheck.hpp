// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grafiq/tensor.hpp"

namespace grafiq {

struct SelfCheckOptions {
  std::uint64_t seed = 1;
  Precision precision = Precision::F64;
  std::size_t networks = 4;
  std::size_t samples = 64;  // sampled elements per gradient
  double perturbation = 1e-4;
  // Harness self-test: scales the named VJP kernel's output so that its
  // check must fail. Empty for normal runs.
  std::string corrupt_kernel;
};

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  // Name of the first failing check, empty if all passed.
  std::string first_failure() const;
};

// Tolerance on the relative error for a precision: 1e-5 for f64, 1e-2 for f32.
double gradient_tolerance(Precision precision);

// Mixed relative error of an analytic against a numeric derivative:
// |a - n| / max(|a|, |n|, floor).
double derivative_error(double analytic, double numeric, double floor);

// Compares every VJP kernel and the end-to-end tap gradients of seeded tiny
// networks against central finite differences of the forward pass, and
// checks the matched-statistics construction for zero loss and gradient.
// Central differences are always taken in f64.
SelfCheckReport run_selfcheck(const SelfCheckOptions& options);

}  // namespace grafiq
