// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cascade/model.hpp"
#include "cascade/netsim.hpp"

namespace cascade {

struct DeploymentSpec {
  std::string name;
  double edge_fp32_bytes = 0.0;
  double full_fp32_bytes = 0.0;
  // Externally stated edge requirement in MB, if any.
  std::optional<double> reported_edge_requirement_mb;

  /// Throws InvalidArgument unless 0 < edge <= full.
  void validate() const;

  /// 226 MB edge load at a 38% edge share.
  static DeploymentSpec speecht5();
  /// 567 MB edge load at a 56% edge share.
  static DeploymentSpec whisper();
};

/// Edge bytes after FP32 -> INT8 weight quantization (25% of FP32).
double edge_memory_requirement(const DeploymentSpec& spec);
double edge_fraction_pct(const DeploymentSpec& spec);
double overall_usage_pct(const DeploymentSpec& spec);

/// Human-readable note when the computed requirement and the reported figure
/// disagree by more than rounding to whole MB; empty otherwise.
std::string requirement_annotation(const DeploymentSpec& spec);

struct TimingPoint {
  double length;   // characters (TTS) or audio seconds (STT)
  double seconds;  // CPU time at the reference clock
};

struct ReferenceTimings {
  double ref_clock_ghz = 1.7;
  std::vector<TimingPoint> tts{{12.0, 0.5}, {270.0, 8.9}};
  std::vector<TimingPoint> stt{{1.0, 2.97}, {19.0, 3.92}};

  const std::vector<TimingPoint>& points(Task task) const { return task == Task::TTS ? tts : stt; }
  /// Throws InvalidConfig unless each task has >= 2 strictly increasing points.
  void validate() const;
};

/// Piecewise-linear in length (linear extrapolation outside the points,
/// floored at zero), scaled by ref_clock / clock.
double cpu_time(double clock_ghz, Task task, double input_length,
                const ReferenceTimings& ref = {});

/// cpu_s plus, when escalated, both transfer times and cloud compute.
double predict_wall_time(double cpu_s, bool escalated, uint64_t uplink_bytes,
                         uint64_t downlink_bytes, const LinkSpec& link, double cloud_s = 0.0);

/// Sequential compute throughput of a device, used to turn MAC counts into
/// virtual seconds.
struct ComputeDevice {
  double clock_ghz = 1.7;
  double macs_per_cycle = 8.0;

  double seconds_for(uint64_t macs) const;
  void validate() const;

  static ComputeDevice reference_edge() { return {1.7, 8.0}; }
  static ComputeDevice reference_cloud() { return {3.4, 16.0}; }
};

}  // namespace cascade
