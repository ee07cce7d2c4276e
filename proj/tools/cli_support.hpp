// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grafiq::cli {

// Exit-code contract of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitSelfCheck = 3;

// Failure that maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvRow {
  std::size_t line = 0;  // 1-based line in the source file
  std::vector<std::string> fields;
};

// RFC 4180 style: fields may be double-quoted, "" escapes a quote. Blank
// lines are skipped. Throws ConfigError naming the line on an unterminated
// quote.
std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source);
std::vector<CsvRow> read_csv_file(const std::filesystem::path& path);

std::string csv_field(std::string_view value);
std::string join_csv(const std::vector<std::string>& fields);

// Shortest round-trip text; empty for NaN.
std::string number(double v);

// Strict parses; throw ConfigError with `what` in the message.
double parse_number(std::string_view text, const std::string& what);
std::size_t parse_count(std::string_view text, const std::string& what);
bool parse_bool(std::string_view text, const std::string& what);

struct ImageEntry {
  std::string id;
  std::string path;
};

// One image per line: "path" or "id,path". Empty lines and lines starting
// with '#' are ignored. Relative paths resolve against the list's directory;
// the id defaults to the path as written.
std::vector<ImageEntry> read_image_list(const std::filesystem::path& path);

// key=value lines, '#' comments.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Resolves one setting: flag, then GRAFIQ_<KEY>, then config file, then
// the fallback.
class Settings {
 public:
  Settings(std::map<std::string, std::string> flags, std::map<std::string, std::string> file)
      : flags_(std::move(flags)), file_(std::move(file)) {}

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

 private:
  std::map<std::string, std::string> flags_;
  std::map<std::string, std::string> file_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace grafiq::cli
