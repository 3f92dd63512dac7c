// SPDX-License-Identifier: Apache-2.0
#include "cascade/fleet.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cascade/error.hpp"

namespace cascade {

double Fleet::total_share() const noexcept {
  double s = 0.0;
  for (const auto& r : records) s += r.market_share;
  return s;
}

Fleet Fleet::unweighted() const {
  Fleet out = *this;
  for (auto& r : out.records) r.market_share = 1.0 / static_cast<double>(records.size());
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view text, const std::string& source, std::size_t line, const char* field) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": field '" + field +
                                           "' is not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

Fleet parse_fleet(std::string_view csv, const std::string& source) {
  Fleet fleet;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const auto nl = csv.find('\n', pos);
    const std::string_view raw = csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? csv.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields.size() != 4 || fields[0] != "model" || fields[1] != "share" || fields[2] != "memory_mb" ||
          fields[3] != "cpu_ghz") {
        throw Error(ErrorCode::ParseError,
                    source + ":" + std::to_string(line_no) + ": expected header model,share,memory_mb,cpu_ghz");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                                             std::to_string(fields.size()));
    }
    DeviceRecord r;
    r.model_name = std::string(fields[0]);
    r.market_share = parse_number(fields[1], source, line_no, "share");
    r.memory_mb = parse_number(fields[2], source, line_no, "memory_mb");
    r.clock_ghz = parse_number(fields[3], source, line_no, "cpu_ghz");
    if (r.market_share < 0.0) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": field 'share' is negative");
    }
    if (!(r.memory_mb > 0.0)) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": field 'memory_mb' must be positive");
    }
    if (!(r.clock_ghz > 0.0)) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": field 'cpu_ghz' must be positive");
    }
    fleet.records.push_back(std::move(r));
  }
  if (fleet.records.empty()) throw Error(ErrorCode::EmptyFleet, source + ": no device records");
  const double total = fleet.total_share();
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyFleet, source + ": market shares sum to zero");
  for (auto& r : fleet.records) r.market_share /= total;
  return fleet;
}

Fleet load_fleet(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open fleet data " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_fleet(ss.str(), path.string());
}

double memory_shortfall_fraction(const Fleet& fleet, double required_mb) {
  double s = 0.0;
  for (const auto& r : fleet.records) {
    if (r.memory_mb < required_mb) s += r.market_share;
  }
  return s;
}

double feasibility_fraction(const Fleet& fleet, Task task, double input_length, double t_max_s,
                            const ReferenceTimings& ref) {
  double s = 0.0;
  for (const auto& r : fleet.records) {
    if (cpu_time(r.clock_ghz, task, input_length, ref) <= t_max_s) s += r.market_share;
  }
  return s;
}

ClockHistogram clock_histogram(const Fleet& fleet, std::span<const double> edges, double ref_clock_ghz) {
  if (edges.size() < 2) throw Error(ErrorCode::BadEdges, "histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw Error(ErrorCode::BadEdges, "histogram edges must be strictly increasing");
  }
  ClockHistogram h;
  h.ref_clock_ghz = ref_clock_ghz;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) h.bins.push_back({edges[i], edges[i + 1], 0.0});
  for (const auto& r : fleet.records) {
    if (r.clock_ghz < ref_clock_ghz) h.share_below_ref += r.market_share;
    for (std::size_t i = 0; i < h.bins.size(); ++i) {
      const bool last = i + 1 == h.bins.size();
      if (r.clock_ghz >= h.bins[i].lo && (r.clock_ghz < h.bins[i].hi || (last && r.clock_ghz == h.bins[i].hi))) {
        h.bins[i].mass += r.market_share;
        break;
      }
    }
  }
  return h;
}

}  // namespace cascade
