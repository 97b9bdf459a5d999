#include "icepose/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "icepose/errors.hpp"

namespace icepose {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

KeyValues KeyValues::parse_text(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.index_.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
    kv.set(key, value);
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

std::string KeyValues::get_string(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw ConfigError("missing required key `" + key + "`");
  return entries_[it->second].second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = index_.find(key);
  return it == index_.end() ? fallback : entries_[it->second].second;
}

double KeyValues::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "`: not a number: `" + s + "`");
  }
  if (used != s.size()) throw ConfigError("key `" + key + "`: trailing junk in `" + s + "`");
  return v;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValues::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "`: not an integer: `" + s + "`");
  }
  if (used != s.size()) throw ConfigError("key `" + key + "`: trailing junk in `" + s + "`");
  return v;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key) const {
  const std::string s = get_string(key);
  size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "`: not an unsigned integer: `" + s + "`");
  }
  if (used != s.size()) throw ConfigError("key `" + key + "`: trailing junk in `" + s + "`");
  return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key `" + key + "`: not a boolean: `" + s + "`");
}

std::vector<double> KeyValues::get_doubles(const std::string& key, int expect) const {
  const std::string s = get_string(key);
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("key `" + key + "`: not a number: `" + tok + "`");
    }
  }
  if (expect >= 0 && static_cast<int>(out.size()) != expect)
    throw ConfigError("key `" + key + "`: expected " + std::to_string(expect) + " values, got " +
                      std::to_string(out.size()));
  return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  const auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = value;
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, value);
}

void KeyValues::set_double(const std::string& key, double value) {
  set(key, format_double_exact(value));
}

void KeyValues::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void KeyValues::set_u64(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void KeyValues::set_doubles(const std::string& key, const double* values, int count) {
  std::string s;
  for (int i = 0; i < count; ++i) {
    if (i) s += ' ';
    s += format_double_exact(values[i]);
  }
  set(key, s);
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValues::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_text();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace icepose
