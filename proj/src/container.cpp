// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"

namespace grafiq {

static_assert(std::endian::native == std::endian::little, "GRFQ1 payloads are written in host order");

using json = nlohmann::json;

namespace {

constexpr char kMagic[6] = {'G', 'R', 'F', 'Q', '1', '\0'};
constexpr std::size_t kPrefix = sizeof(kMagic) + sizeof(std::uint64_t);

template <typename T>
void append_scalar(std::vector<std::byte>& out, T v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

std::uint64_t read_u64(const std::vector<std::byte>& buf, std::size_t at) {
  std::uint64_t v;
  std::memcpy(&v, buf.data() + at, sizeof(v));
  return v;
}

std::vector<std::byte> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t hash) {
  for (std::byte b : bytes) {
    hash ^= static_cast<std::uint64_t>(b);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  std::vector<std::byte> payload;
  json table = json::object();
  for (const auto& [name, any] : container.tensors) {
    std::visit(
        [&](const auto& t) {
          using V = typename std::decay_t<decltype(t)>::value_type;
          table[name] = {{"dtype", sizeof(V) == 4 ? "f32" : "f64"}, {"shape", t.shape()}, {"offset", payload.size()}};
          const auto* p = reinterpret_cast<const std::byte*>(t.data().data());
          payload.insert(payload.end(), p, p + t.size() * sizeof(V));
        },
        any);
  }
  json header;
  header["format"] = "GRFQ1";
  header["kind"] = container.kind;
  header["spec"] = container.spec ? json::parse(spec_to_json(*container.spec)) : json(nullptr);
  header["payload_bytes"] = payload.size();
  header["tensors"] = std::move(table);
  const std::string text = header.dump();

  std::vector<std::byte> out;
  out.reserve(kPrefix + text.size() + payload.size() + 8);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  append_scalar<std::uint64_t>(out, text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), payload.begin(), payload.end());
  append_scalar<std::uint64_t>(out, fnv1a64(payload));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path) {
  const std::vector<std::byte> buf = slurp(path);
  const std::string where = " in '" + path.string() + "'";
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::BadMagic, "not a GRFQ1 container" + where);
  if (buf.size() < kPrefix) throw Error(ErrorCode::Truncated, "missing header length" + where);
  const std::uint64_t header_len = read_u64(buf, sizeof(kMagic));
  if (header_len > buf.size() - kPrefix) throw Error(ErrorCode::Truncated, "header extends past end of file" + where);
  const std::size_t payload_at = kPrefix + header_len;

  json header = json::parse(reinterpret_cast<const char*>(buf.data() + kPrefix),
                            reinterpret_cast<const char*>(buf.data() + payload_at), nullptr, false);
  if (header.is_discarded() || !header.is_object()) throw Error(ErrorCode::MalformedHeader, "header is not JSON" + where);

  Container result;
  std::uint64_t payload_bytes = 0;
  struct Entry {
    std::string name;
    bool f64;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  try {
    if (header.at("format").get<std::string>() != "GRFQ1")
      throw Error(ErrorCode::MalformedHeader, "unexpected format tag" + where);
    result.kind = header.at("kind").get<std::string>();
    payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    if (!header.at("spec").is_null()) result.spec = spec_from_json(header.at("spec").dump());
    for (const auto& [name, desc] : header.at("tensors").items()) {
      const std::string dtype = desc.at("dtype").get<std::string>();
      if (dtype != "f32" && dtype != "f64")
        throw Error(ErrorCode::MalformedHeader, "tensor '" + name + "' has unknown dtype '" + dtype + "'" + where);
      entries.push_back({name, dtype == "f64", desc.at("shape").get<Shape>(), desc.at("offset").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("bad header field: ") + e.what() + where);
  }

  const std::size_t available = buf.size() - payload_at;
  if (available < 8 || payload_bytes > available - 8)
    throw Error(ErrorCode::Truncated, "payload shorter than the declared " + std::to_string(payload_bytes) + " bytes" + where);
  if (payload_bytes + 8 != available)
    throw Error(ErrorCode::MalformedHeader, "trailing bytes after checksum" + where);

  for (const Entry& e : entries) {
    const std::size_t elem = e.f64 ? 8 : 4;
    if (e.shape.empty()) throw Error(ErrorCode::MalformedHeader, "tensor '" + e.name + "' has no shape" + where);
    const std::uint64_t bytes = shape_numel(e.shape) * elem;
    if (e.offset > payload_bytes || bytes > payload_bytes - e.offset)
      throw Error(ErrorCode::Truncated, "tensor '" + e.name + "' extends past the payload" + where);
  }

  const std::span<const std::byte> payload(buf.data() + payload_at, payload_bytes);
  const std::uint64_t expected = read_u64(buf, payload_at + payload_bytes);
  if (fnv1a64(payload) != expected) throw Error(ErrorCode::Checksum, "payload checksum mismatch" + where);

  for (const Entry& e : entries) {
    const std::size_t n = shape_numel(e.shape);
    const std::byte* src = payload.data() + e.offset;
    try {
      if (e.f64) {
        std::vector<double> data(n);
        std::memcpy(data.data(), src, n * sizeof(double));
        result.tensors.emplace(e.name, Tensor64(e.shape, std::move(data)));
      } else {
        std::vector<float> data(n);
        std::memcpy(data.data(), src, n * sizeof(float));
        result.tensors.emplace(e.name, Tensor(e.shape, std::move(data)));
      }
    } catch (const Error& err) {
      throw Error(ErrorCode::MalformedHeader, "tensor '" + e.name + "': " + err.what());
    }
  }
  return result;
}

std::uint64_t stored_checksum(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  if (buf.size() < kPrefix + 8) throw Error(ErrorCode::Truncated, "file too short");
  return read_u64(buf, buf.size() - 8);
}

template <typename T>
void save_weights(const BasicNetwork<T>& net, const std::filesystem::path& path) {
  Container c;
  c.kind = "network";
  c.spec = net.spec();
  for (const auto& [name, t] : net.parameters()) c.tensors.emplace(name, t);
  write_container(path, c);
}

template <typename T>
BasicNetwork<T> load_weights(const std::filesystem::path& path, const NetworkSpec* expected) {
  Container c = read_container(path);
  if (c.kind != "network") throw Error(ErrorCode::MalformedHeader, "container kind is '" + c.kind + "', not a network");
  if (!c.spec) throw Error(ErrorCode::MalformedHeader, "network container without a spec");
  if (expected && !(*expected == *c.spec))
    throw Error(ErrorCode::ShapeMismatch, "embedded spec differs from the expected one");
  ParameterMap<T> params;
  for (auto& [name, any] : c.tensors) {
    params.emplace(name, std::visit([](const auto& t) { return t.template cast<T>(); }, any));
  }
  return BasicNetwork<T>(*c.spec, std::move(params));
}

template void save_weights(const BasicNetwork<float>&, const std::filesystem::path&);
template void save_weights(const BasicNetwork<double>&, const std::filesystem::path&);
template BasicNetwork<float> load_weights(const std::filesystem::path&, const NetworkSpec*);
template BasicNetwork<double> load_weights(const std::filesystem::path&, const NetworkSpec*);

}  // namespace grafiq
