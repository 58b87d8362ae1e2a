#pragma once

// Time-tag files for photon streams.
//
// Binary layout (all integers little-endian):
//   8 bytes   magic "IONTAG01"
//   u32       length of the JSON header in bytes
//   ...       JSON header: {"channel", "duration_s", "seed", "model": {...}}
//   u64       number of events
//   u64[n]    timestamps in ns, non-decreasing
//
// The CSV form carries the same header as a "# " comment line followed by a
// single t_ns column.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ionlight/error.hpp"
#include "ionlight/photostream.hpp"

namespace ionlight {

inline constexpr std::array<char, 8> kTimeTagMagic{'I', 'O', 'N', 'T', 'A', 'G', '0', '1'};

struct TimeTagFile {
  PhotonStream stream;
  std::uint64_t seed = 0;
  nlohmann::json model = nlohmann::json::object();
};

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  std::array<unsigned char, sizeof(T)> b{};
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), sizeof(T))) {
    throw ConfigError(path + ": truncated time-tag file");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t to_ns(double t) {
  return static_cast<std::uint64_t>(std::llround(t * 1e9));
}

inline nlohmann::json timetag_header(const TimeTagFile& f) {
  nlohmann::json h;
  h["format"] = "ionlight-timetag";
  h["version"] = 1;
  h["channel"] = f.stream.channel;
  h["duration_s"] = f.stream.duration;
  h["seed"] = f.seed;
  h["model"] = f.model;
  return h;
}

// Timestamps are stored with 1 ns resolution; events that round onto the same
// nanosecond are separated by the smallest representable step on reading so the
// stream stays strictly increasing.
inline void fill_stream(TimeTagFile& f, const nlohmann::json& h, std::vector<std::uint64_t> ns,
                        const std::string& path) {
  try {
    f.stream.channel = h.at("channel").get<int>();
    f.stream.duration = h.at("duration_s").get<double>();
    f.seed = h.at("seed").get<std::uint64_t>();
    f.model = h.value("model", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad time-tag header: " + e.what());
  }
  f.stream.times.clear();
  f.stream.times.reserve(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (i > 0 && ns[i] < ns[i - 1]) throw ConfigError(path + ": timestamps are not sorted");
    double t = static_cast<double>(ns[i]) * 1e-9;
    if (!f.stream.times.empty() && t <= f.stream.times.back()) {
      t = std::nextafter(f.stream.times.back(), 1e300);
    }
    f.stream.times.push_back(t);
  }
  f.stream.origin.assign(f.stream.times.size(), Origin::Signal);
}

}  // namespace detail

inline void write_timetag_binary(const std::string& path, const TimeTagFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  const std::string header = detail::timetag_header(f).dump();
  out.write(kTimeTagMagic.data(), kTimeTagMagic.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_le<std::uint64_t>(out, f.stream.times.size());
  for (double t : f.stream.times) detail::put_le<std::uint64_t>(out, detail::to_ns(t));
  if (!out) throw Error("error while writing '" + path + "'");
}

inline TimeTagFile read_timetag_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kTimeTagMagic) {
    throw ConfigError(path + ": not a time-tag file (bad magic)");
  }
  const auto hlen = detail::get_le<std::uint32_t>(in, path);
  std::string header(hlen, '\0');
  if (!in.read(header.data(), hlen)) throw ConfigError(path + ": truncated header");
  const auto h = nlohmann::json::parse(header, nullptr, false);
  if (h.is_discarded()) throw ConfigError(path + ": header is not valid JSON");
  const auto n = detail::get_le<std::uint64_t>(in, path);
  std::vector<std::uint64_t> ns;
  ns.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) ns.push_back(detail::get_le<std::uint64_t>(in, path));
  TimeTagFile f;
  detail::fill_stream(f, h, std::move(ns), path);
  return f;
}

inline void write_timetag_csv(const std::string& path, const TimeTagFile& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "# " << detail::timetag_header(f).dump() << "\n";
  out << "t_ns\n";
  for (double t : f.stream.times) out << detail::to_ns(t) << "\n";
  if (!out) throw Error("error while writing '" + path + "'");
}

inline TimeTagFile read_timetag_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw ConfigError(path + ":1: expected '# {header}'");
  }
  const auto h = nlohmann::json::parse(line.substr(2), nullptr, false);
  if (h.is_discarded()) throw ConfigError(path + ":1: header is not valid JSON");
  if (!std::getline(in, line) || line != "t_ns") throw ConfigError(path + ":2: expected 't_ns'");
  std::vector<std::uint64_t> ns;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{} || ptr != line.data() + line.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": not an integer timestamp");
    }
    ns.push_back(v);
  }
  TimeTagFile f;
  detail::fill_stream(f, h, std::move(ns), path);
  return f;
}

// Chooses the format from the extension: ".csv" is text, anything else binary.
inline void write_timetag(const std::string& path, const TimeTagFile& f) {
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  csv ? write_timetag_csv(path, f) : write_timetag_binary(path, f);
}

inline TimeTagFile read_timetag(const std::string& path) {
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return csv ? read_timetag_csv(path) : read_timetag_binary(path);
}

}  // namespace ionlight
