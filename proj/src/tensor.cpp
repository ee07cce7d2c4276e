// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/tensor.hpp"

#include <cmath>
#include <sstream>

namespace grafiq {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return shape.empty() ? 0 : n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::Dimension, "tensor shape must have at least one extent");
  for (std::size_t extent : shape) {
    if (extent == 0)
      throw Error(ErrorCode::Dimension, "tensor extent must be >= 1, got " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw Error(ErrorCode::Dimension, "tensor shape " + shape_to_string(shape_) + " holds " +
                                          std::to_string(shape_numel(shape_)) + " elements, got " +
                                          std::to_string(data_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::Dimension, std::string(what) + ": expected rank " + std::to_string(rank) +
                                          ", got shape " + shape_to_string(t.shape()));
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void require_rank(const BasicTensor<float>&, std::size_t, const char*);
template void require_rank(const BasicTensor<double>&, std::size_t, const char*);

}  // namespace grafiq
