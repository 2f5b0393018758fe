#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qamine {

inline constexpr std::string_view kToolName = "qamine";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// FNV-1a 64-bit. Doubles as the text-feature hash and the file digest, so
/// the constants are part of the on-disk contract.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

/// Fixed-point decimal with `digits` fractional digits, locale-independent.
std::string format_fixed(double value, int digits = 6);

/// Shortest representation that round-trips a double (for metric reports).
std::string format_double(double value);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Escapes tab / newline / carriage return / backslash for TSV text columns.
std::string tsv_escape(std::string_view text);
std::string tsv_unescape(std::string_view text);

/// `#`-prefixed metadata lines every CLI output starts with. Inputs are
/// identified by basename + content digest so outputs stay byte-identical
/// across directories.
struct StageMetadata {
  std::string stage;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // basename, digest

  void add_input(const std::filesystem::path& path);
  std::vector<std::string> header_lines() const;
};

/// Flat `section.key=value` config file. Blank lines and `#` comments ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::span<const std::string> lines);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Worker count for the embarrassingly-parallel loops; QAMINE_THREADS caps it,
/// unset or 0 means single-threaded.
unsigned worker_threads();

}  // namespace qamine
