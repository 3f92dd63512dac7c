// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cascade/audio.hpp"
#include "cascade/cloud_service.hpp"
#include "cascade/costmodel.hpp"
#include "cascade/gating.hpp"
#include "cascade/model.hpp"
#include "cascade/netsim.hpp"

namespace cascade {

struct PipelineOptions {
  GateConfig gate;
  bool force_escalate = false;
  ComputeDevice edge_device = ComputeDevice::reference_edge();
  uint32_t griffin_lim_iters = 8;
};

/// Timing of one cascaded run. With a virtual link (or no link) every time is
/// modeled from operation counts and wall == cpu + cloud + transfer exactly;
/// over a real link the terms are measured.
struct RunTrace {
  Task task = Task::STT;
  bool escalated = false;
  bool degraded = false;  // escalation attempted but failed; edge output kept
  std::string failure;
  GateDecision gate;
  uint32_t decode_passes = 0;
  uint64_t edge_macs = 0;
  double cpu_time_s = 0.0;
  double cloud_time_s = 0.0;
  uint64_t uplink_bytes = 0;
  uint64_t downlink_bytes = 0;
  double transfer_time_s = 0.0;
  double wall_time_s = 0.0;
  uint32_t output_tokens = 0;
  double output_audio_s = 0.0;
};

struct SttResult {
  std::vector<int32_t> tokens;
  RunTrace trace;
};

struct TtsResult {
  Waveform audio;
  RunTrace trace;
};

/// log-mel -> prenet -> edge encoder -> greedy decode -> gate. On escalation
/// the prenet features go to the cloud and the decoder reruns on the returned
/// hidden states. `link` may be null for edge-only inference.
SttResult run_stt(const SplitModel& model, const Waveform& audio, Link* link,
                  const PipelineOptions& opts);

TtsResult run_tts(const SplitModel& model, std::span<const int32_t> tokens, Link* link,
                  const PipelineOptions& opts);

using SweepInput = std::variant<Waveform, std::vector<int32_t>>;

struct SweepRow {
  double bandwidth_kbs = 0.0;
  double cpu_time_s = 0.0;
  double wall_time_s = 0.0;
  double transfer_time_s = 0.0;
  uint64_t uplink_bytes = 0;
  uint64_t downlink_bytes = 0;
};

/// Forced-escalation runs over virtual links, one per bandwidth.
std::vector<SweepRow> sweep_bandwidth(const SplitModel& model, const SweepInput& input,
                                      std::span<const double> bandwidths_kbs,
                                      const LinkSpec& link_template, const PipelineOptions& opts,
                                      const ComputeDevice& cloud_device = ComputeDevice::reference_cloud());

inline constexpr double kDefaultSweepKbs[] = {64, 128, 256, 512, 1024, 2048, 4096};

}  // namespace cascade
