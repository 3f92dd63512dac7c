// SPDX-License-Identifier: Apache-2.0
#include "cascade/gating.hpp"

#include <cmath>

#include "cascade/error.hpp"

namespace cascade {

void GateConfig::validate() const {
  if (std::isnan(stt_threshold) || stt_threshold > 0.0) {
    throw Error(ErrorCode::InvalidConfig, "stt_threshold must be <= 0 nats");
  }
  if (std::isnan(tts_threshold) || (std::isinf(tts_threshold) && tts_threshold > 0)) {
    throw Error(ErrorCode::InvalidConfig, "tts_threshold must be finite or -inf");
  }
}

GateDecision decide(double metric, double threshold) noexcept {
  return {metric >= threshold ? Verdict::Pass : Verdict::Escalate, metric, threshold};
}

GateDecision stt_gate(std::span<const float> step_logprobs, const GateConfig& cfg) {
  if (step_logprobs.empty()) {
    throw Error(ErrorCode::EmptySequence, "stt_gate needs at least one decode step");
  }
  double sum = 0.0;
  for (float v : step_logprobs) sum += v;
  return decide(sum / static_cast<double>(step_logprobs.size()), cfg.stt_threshold);
}

GateDecision tts_gate(const Waveform& w, const GateConfig& cfg) {
  return decide(estimate_snr(w), cfg.tts_threshold);
}

}  // namespace cascade
