// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cascade/costmodel.hpp"
#include "cascade/fleet.hpp"
#include "cascade/pipeline.hpp"

namespace cascade {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series, bool log2_x = false);
std::string svg_bar_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const double> values);

/// `bandwidth_kbs,cpu_time_s,wall_time_s,transfer_time_s,uplink_bytes,downlink_bytes`
std::string sweep_csv(std::span<const SweepRow> rows);

/// Writes `csv_path` and an SVG chart next to it (same stem).
std::vector<std::filesystem::path> emit_sweep_report(std::span<const SweepRow> rows, Task task,
                                                     const std::filesystem::path& csv_path);

struct FleetReportOptions {
  double mem_req_mb = 149.0;
  Task task = Task::STT;
  std::optional<double> input_length;  // default: longest reference length
  std::optional<double> t_max_s;       // default: CPU time at the reference clock
  bool unweighted = false;
  ReferenceTimings ref;
  std::vector<double> clock_edges;  // default: 0.25 GHz bins covering the fleet
};

struct FleetSummary {
  Task task = Task::STT;
  double mem_req_mb = 0.0;
  double memory_shortfall = 0.0;
  double input_length = 0.0;
  double t_max_s = 0.0;
  double feasibility = 0.0;
  double share_below_ref_clock = 0.0;
  std::vector<std::filesystem::path> files;
};

/// Analysis only, no I/O.
FleetSummary analyze_fleet(const Fleet& fleet, const FleetReportOptions& opts);

/// CSV tables and SVG charts for memory coverage, CPU-time feasibility per
/// task, and the clock histogram. Byte-identical for identical inputs.
FleetSummary emit_fleet_report(const Fleet& fleet, const FleetReportOptions& opts,
                               const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cascade
