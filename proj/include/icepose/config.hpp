#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace icepose {

// Flat `key = value` text files: one pair per line, `#` comments, blank lines
// ignored. Entries keep insertion order so writes are deterministic; doubles
// are written with 17 significant digits and round-trip bit-exactly.
class KeyValues {
 public:
  static KeyValues parse_text(const std::string& text, const std::string& origin = "<text>");
  static KeyValues parse_file(const std::string& path);

  bool has(const std::string& key) const { return index_.count(key) > 0; }
  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Space-separated doubles; `expect` < 0 skips the count check.
  std::vector<double> get_doubles(const std::string& key, int expect = -1) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);
  void set_u64(const std::string& key, std::uint64_t value);
  void set_doubles(const std::string& key, const double* values, int count);

  void write_file(const std::string& path) const;
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

std::string format_double_exact(double v);  // shortest round-trip decimal

}  // namespace icepose
