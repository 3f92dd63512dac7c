// SPDX-License-Identifier: Apache-2.0
#include "cascade/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cascade/error.hpp"

namespace cascade {

void DeploymentSpec::validate() const {
  if (!(edge_fp32_bytes > 0.0) || !(edge_fp32_bytes <= full_fp32_bytes)) {
    throw Error(ErrorCode::InvalidArgument,
                "deployment '" + name + "' needs 0 < edge bytes <= full bytes");
  }
}

DeploymentSpec DeploymentSpec::speecht5() {
  return {"speecht5", 226.0 * kBytesPerMB, 226.0 / 0.38 * kBytesPerMB, 57.0};
}

DeploymentSpec DeploymentSpec::whisper() {
  return {"whisper", 567.0 * kBytesPerMB, 567.0 / 0.56 * kBytesPerMB, 149.0};
}

double edge_memory_requirement(const DeploymentSpec& spec) {
  spec.validate();
  return spec.edge_fp32_bytes * 0.25;
}

double edge_fraction_pct(const DeploymentSpec& spec) {
  spec.validate();
  return 100.0 * spec.edge_fp32_bytes / spec.full_fp32_bytes;
}

double overall_usage_pct(const DeploymentSpec& spec) {
  return 100.0 * edge_memory_requirement(spec) / spec.full_fp32_bytes;
}

std::string requirement_annotation(const DeploymentSpec& spec) {
  if (!spec.reported_edge_requirement_mb) return {};
  const double computed = edge_memory_requirement(spec) / kBytesPerMB;
  const double reported = *spec.reported_edge_requirement_mb;
  if (std::fabs(computed - reported) <= 0.5) return {};
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s: reported requirement %.2f MB differs from 25%% of %.2f MB = %.2f MB",
                spec.name.c_str(), reported, spec.edge_fp32_bytes / kBytesPerMB, computed);
  return buf;
}

void ReferenceTimings::validate() const {
  if (!(ref_clock_ghz > 0.0)) throw Error(ErrorCode::InvalidConfig, "ref_clock_ghz must be positive");
  for (const auto* pts : {&tts, &stt}) {
    if (pts->size() < 2) throw Error(ErrorCode::InvalidConfig, "need at least two timing points per task");
    for (std::size_t i = 1; i < pts->size(); ++i) {
      if (!((*pts)[i].length > (*pts)[i - 1].length)) {
        throw Error(ErrorCode::InvalidConfig, "timing points must be strictly increasing in length");
      }
    }
  }
}

double cpu_time(double clock_ghz, Task task, double input_length, const ReferenceTimings& ref) {
  if (!(clock_ghz > 0.0)) {
    throw Error(ErrorCode::NonPositiveClock, "clock rate must be positive");
  }
  const auto& pts = ref.points(task);
  if (pts.size() < 2) throw Error(ErrorCode::InvalidConfig, "need at least two timing points");
  // Segment containing the length; the end segments extrapolate.
  std::size_t i = 1;
  while (i + 1 < pts.size() && input_length > pts[i].length) ++i;
  const auto& a = pts[i - 1];
  const auto& b = pts[i];
  const double t = a.seconds + (input_length - a.length) * (b.seconds - a.seconds) / (b.length - a.length);
  return std::max(0.0, t) * (ref.ref_clock_ghz / clock_ghz);
}

double predict_wall_time(double cpu_s, bool escalated, uint64_t uplink_bytes, uint64_t downlink_bytes,
                         const LinkSpec& link, double cloud_s) {
  if (!escalated) return cpu_s;
  return cpu_s + transfer_time(uplink_bytes, link) + transfer_time(downlink_bytes, link) + cloud_s;
}

double ComputeDevice::seconds_for(uint64_t macs) const {
  return static_cast<double>(macs) / (clock_ghz * 1e9 * macs_per_cycle);
}

void ComputeDevice::validate() const {
  if (!(clock_ghz > 0.0)) throw Error(ErrorCode::NonPositiveClock, "device clock must be positive");
  if (!(macs_per_cycle > 0.0)) throw Error(ErrorCode::InvalidConfig, "macs_per_cycle must be positive");
}

}  // namespace cascade
