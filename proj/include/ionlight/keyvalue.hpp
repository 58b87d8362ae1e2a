#pragma once

// Plain-text `key = value` configuration files.
//
//   # comment
//   separation_um = 275     # trailing comments are allowed
//   style = tubular
//
// Units live in the key names (`_um`, `_MHz`, `_V`). Keys are unique per file.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ionlight/error.hpp"

namespace ionlight {

// 64-bit FNV-1a, used to stamp outputs with the configuration they came from.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text, std::string source = "<string>") {
    KeyValueFile kv;
    kv.source_ = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
      }
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(kv.source_ + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
      }
      const auto key = detail::trim(line.substr(0, eq));
      const auto value = detail::trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(kv.source_ + ":" + std::to_string(line_no) + ": empty key");
      }
      if (value.empty()) {
        throw ConfigError(kv.source_ + ":" + std::to_string(line_no) + ": key '" +
                          std::string(key) + "' has no value");
      }
      auto [it, inserted] = kv.values_.emplace(std::string(key), Entry{std::string(value), line_no});
      if (!inserted) {
        throw ConfigError(kv.source_ + ":" + std::to_string(line_no) + ": duplicate key '" +
                          std::string(key) + "' (first defined on line " +
                          std::to_string(it->second.line) + ")");
      }
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  std::string get_string(const std::string& key) const { return entry(key).value; }

  double get_double(const std::string& key) const {
    const auto& e = entry(key);
    double v = 0.0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
      throw ConfigError(where(e) + ": key '" + key + "' is not a number: '" + e.value + "'");
    }
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
  }

  std::uint64_t get_uint64(const std::string& key) const {
    const auto& e = entry(key);
    std::uint64_t v = 0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
      throw ConfigError(where(e) + ": key '" + key + "' is not an unsigned integer: '" +
                        e.value + "'");
    }
    return v;
  }

  // Overrides (e.g. from command-line flags) replace or add a value.
  void set(const std::string& key, std::string value) {
    values_[key] = Entry{std::move(value), 0};
  }

  // Keys present in the file but not in `known`; used to reject typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      bool found = false;
      for (const auto& kk : known) found = found || kk == k;
      if (!found) out.push_back(k);
    }
    return out;
  }

  const std::string& source() const { return source_; }

  // Hash over the effective key/value set, including overrides.
  std::uint64_t hash() const {
    std::uint64_t h = fnv1a64("");
    for (const auto& [k, v] : values_) {
      h = fnv1a64(k, h);
      h = fnv1a64("=", h);
      h = fnv1a64(v.value, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  const Entry& entry(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(source_ + ": missing key '" + key + "'");
    return it->second;
  }

  std::string where(const Entry& e) const {
    return e.line == 0 ? source_ + " (override)" : source_ + ":" + std::to_string(e.line);
  }

  std::string source_ = "<empty>";
  std::map<std::string, Entry> values_;
};

}  // namespace ionlight
