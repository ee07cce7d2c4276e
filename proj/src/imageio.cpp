// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/imageio.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace grafiq {

RawImage::RawImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
  if (width * height * 3 != pixels.size())
    throw Error(ErrorCode::Decode, "image buffer holds " + std::to_string(pixels.size()) + " bytes, expected " +
                                       std::to_string(width * height * 3));
}

namespace {

class PpmReader {
 public:
  explicit PpmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t v = 0, digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw Error(ErrorCode::Decode, "PPM: header number too large");
    }
    if (digits == 0) throw Error(ErrorCode::Decode, "PPM: malformed header");
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw Error(ErrorCode::Decode, "PPM: malformed header");
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t read_u32_le(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<std::uint8_t>& body) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace

RawImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 5 && std::memcmp(bytes.data(), "GRIM1", 5) == 0) {
    if (bytes.size() < 13) throw Error(ErrorCode::Decode, "GRIM1: truncated header");
    const std::size_t h = read_u32_le(bytes, 5), w = read_u32_le(bytes, 9);
    if (h == 0 || w == 0) throw Error(ErrorCode::Decode, "GRIM1: zero dimension");
    const std::size_t need = h * w * 3;
    if (bytes.size() - 13 < need) throw Error(ErrorCode::Decode, "GRIM1: truncated pixel data");
    if (bytes.size() - 13 > need) throw Error(ErrorCode::Decode, "GRIM1: trailing bytes");
    return RawImage(w, h, std::vector<std::uint8_t>(bytes.begin() + 13, bytes.end()));
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    PpmReader reader(bytes);
    reader.skip(2);
    const std::size_t w = reader.number(), h = reader.number(), maxval = reader.number();
    if (maxval != 255) throw Error(ErrorCode::Decode, "PPM: maxval must be 255, got " + std::to_string(maxval));
    if (w == 0 || h == 0) throw Error(ErrorCode::Decode, "PPM: zero dimension");
    const std::size_t start = reader.raster_start();
    const std::size_t need = w * h * 3;
    if (bytes.size() < start || bytes.size() - start < need) throw Error(ErrorCode::Decode, "PPM: truncated pixel data");
    return RawImage(w, h, std::vector<std::uint8_t>(bytes.begin() + start, bytes.begin() + start + need));
  }
  throw Error(ErrorCode::Decode, "unknown image format (expected P6 PPM or GRIM1)");
}

RawImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open image '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_ppm(const RawImage& image, const std::filesystem::path& path) {
  write_file(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n", image.pixels);
}

void save_grim(const RawImage& image, const std::filesystem::path& path) {
  std::string header = "GRIM1";
  for (std::uint32_t v : {static_cast<std::uint32_t>(image.height), static_cast<std::uint32_t>(image.width)}) {
    for (int s = 0; s < 32; s += 8) header.push_back(static_cast<char>((v >> s) & 0xff));
  }
  write_file(path, header, image.pixels);
}

template <typename T>
BasicTensor<T> preprocess(const RawImage& image, std::size_t height, std::size_t width) {
  if (image.height != height || image.width != width) {
    throw Error(ErrorCode::Usage, "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                      ", model expects " + std::to_string(width) + "x" + std::to_string(height) +
                                      " (align and crop before scoring)");
  }
  BasicTensor<T> out({3, height, width});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double v = image.at(y, x, c);
        out.at(c, y, x) = static_cast<T>((v / 255.0 - 0.5) / 0.5);
      }
    }
  }
  return out;
}

template BasicTensor<float> preprocess(const RawImage&, std::size_t, std::size_t);
template BasicTensor<double> preprocess(const RawImage&, std::size_t, std::size_t);

}  // namespace grafiq
