// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/costmodel.hpp"
#include "cascade/model.hpp"

namespace cascade {

struct DeviceRecord {
  std::string model_name;
  double market_share = 0.0;
  double memory_mb = 0.0;
  double clock_ghz = 0.0;
};

struct Fleet {
  std::vector<DeviceRecord> records;

  double total_share() const noexcept;
  /// Same devices, each weighted 1/N.
  Fleet unweighted() const;
};

/// CSV with header `model,share,memory_mb,cpu_ghz`. Shares are normalized to
/// sum to one. Throws FileNotFound, ParseError (with line number and field)
/// or EmptyFleet.
Fleet load_fleet(const std::filesystem::path& path);
Fleet parse_fleet(std::string_view csv, const std::string& source = "<memory>");

/// Share of devices with memory_mb < required_mb.
double memory_shortfall_fraction(const Fleet& fleet, double required_mb);

/// Share of devices whose predicted CPU time is at most t_max_s.
double feasibility_fraction(const Fleet& fleet, Task task, double input_length, double t_max_s,
                            const ReferenceTimings& ref = {});

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double mass = 0.0;
};

struct ClockHistogram {
  std::vector<HistogramBin> bins;
  double ref_clock_ghz = 1.7;
  double share_below_ref = 0.0;
};

/// Bins are [lo, hi) except the last, which also includes its upper edge.
/// Throws BadEdges unless edges are strictly increasing with at least two.
ClockHistogram clock_histogram(const Fleet& fleet, std::span<const double> edges,
                               double ref_clock_ghz = 1.7);

}  // namespace cascade
