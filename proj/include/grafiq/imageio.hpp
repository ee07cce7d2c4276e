// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "grafiq/tensor.hpp"

namespace grafiq {

// 8-bit RGB, row-major, interleaved.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RawImage() = default;
  RawImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t channel) const {
    return pixels[(y * width + x) * 3 + channel];
  }
};

// Accepts binary PPM (P6, maxval 255) and GRIM1 ("GRIM1", u32 LE height,
// u32 LE width, height*width*3 bytes). Throws Io or Decode.
RawImage load_image(const std::filesystem::path& path);
RawImage decode_image(std::span<const std::uint8_t> bytes);

void save_ppm(const RawImage& image, const std::filesystem::path& path);
void save_grim(const RawImage& image, const std::filesystem::path& path);

// Channel-first RGB tensor with v -> (v/255 - 0.5)/0.5, so [0,255] maps onto
// [-1,1]. No resizing: the image must already be height x width, otherwise
// Usage is thrown.
template <typename T>
BasicTensor<T> preprocess(const RawImage& image, std::size_t height, std::size_t width);

}  // namespace grafiq
