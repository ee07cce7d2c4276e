// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_support.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace grafiq::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source) {
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool quoted = false;
    bool row_done = false;
    bool any = false;
    while (!row_done) {
      if (i >= text.size()) {
        if (quoted) throw ConfigError(source + ":" + std::to_string(row.line) + ": unterminated quoted field");
        row_done = true;
        break;
      }
      const char c = text[i++];
      if (quoted) {
        if (c == '"') {
          if (i < text.size() && text[i] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        continue;
      }
      switch (c) {
        case '"':
          quoted = true;
          any = true;
          break;
        case ',':
          row.fields.push_back(std::move(field));
          field.clear();
          any = true;
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          row_done = true;
          break;
        default:
          field.push_back(c);
          any = true;
      }
    }
    if (!any && field.empty() && row.fields.empty()) continue;
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CsvRow> read_csv_file(const std::filesystem::path& path) {
  return parse_csv(read_text_file(path), path.string());
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_field(fields[i]);
  }
  return out;
}

std::string number(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(std::string_view text, const std::string& what) {
  text = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError(what + ": '" + std::string(text) + "' is not a finite number");
  return v;
}

std::size_t parse_count(std::string_view text, const std::string& what) {
  text = trim(text);
  std::size_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigError(what + ": '" + std::string(text) + "' is not a non-negative integer");
  return v;
}

bool parse_bool(std::string_view text, const std::string& what) {
  std::string s(trim(text));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError(what + ": '" + s + "' is not a boolean");
}

std::vector<ImageEntry> read_image_list(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const std::filesystem::path base = path.parent_path();
  std::vector<ImageEntry> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    ImageEntry e;
    const auto comma = s.find(',');
    if (comma == std::string_view::npos) {
      e.path = std::string(s);
      e.id = e.path;
    } else {
      e.id = std::string(trim(s.substr(0, comma)));
      e.path = std::string(trim(s.substr(comma + 1)));
    }
    if (e.id.empty() || e.path.empty())
      throw ConfigError(path.string() + ":" + std::to_string(line) + ": expected 'path' or 'id,path'");
    std::filesystem::path p(e.path);
    if (p.is_relative()) e.path = (base / p).string();
    out.push_back(std::move(e));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line) + ": expected key=value");
    std::string key(trim(s.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = std::string(trim(s.substr(eq + 1)));
  }
  return out;
}

std::optional<std::string> Settings::get(const std::string& key) const {
  if (auto it = flags_.find(key); it != flags_.end()) return it->second;
  std::string env = "GRAFIQ_";
  for (char c : key) env.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (const char* v = std::getenv(env.c_str()); v != nullptr && *v != '\0') return std::string(v);
  if (auto it = file_.find(key); it != file_.end()) return it->second;
  return std::nullopt;
}

std::string Settings::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace grafiq::cli
