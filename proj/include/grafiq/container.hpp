// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "grafiq/network.hpp"

namespace grafiq {

// GRFQ1 tensor container.
//
//   offset 0   6 bytes   magic "GRFQ1\0"
//          6   u64 LE    header length L
//         14   L bytes   UTF-8 JSON header:
//                          {"format": "GRFQ1", "kind": "...", "spec": {...} | null,
//                           "payload_bytes": N,
//                           "tensors": {name: {"dtype": "f32"|"f64", "shape": [...],
//                                              "offset": byte offset into payload}}}
//     14 + L   N bytes   little-endian tensor payload
// 14 + L + N   u64 LE    FNV-1a 64 of the payload bytes
//
// Running statistics are stored as standard deviations, never variances.

using AnyTensor = std::variant<Tensor, Tensor64>;

struct Container {
  std::string kind = "network";
  std::optional<NetworkSpec> spec;
  std::map<std::string, AnyTensor> tensors;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t hash = kFnvOffsetBasis);

void write_container(const std::filesystem::path& path, const Container& container);

// Throws Io, BadMagic, Truncated, MalformedHeader or Checksum.
Container read_container(const std::filesystem::path& path);

// Checksum stored in the trailer of an existing file, without validation.
std::uint64_t stored_checksum(const std::filesystem::path& path);

template <typename T>
void save_weights(const BasicNetwork<T>& net, const std::filesystem::path& path);

// Tensors are converted to T. Besides the container errors this throws
// ShapeMismatch when the parameters disagree with the embedded spec (or with
// `expected`), and NonFiniteStats for broken running statistics.
template <typename T = float>
BasicNetwork<T> load_weights(const std::filesystem::path& path, const NetworkSpec* expected = nullptr);

}  // namespace grafiq
