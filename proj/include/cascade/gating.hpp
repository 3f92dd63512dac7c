// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <span>

#include "cascade/audio.hpp"

namespace cascade {

struct GateConfig {
  double stt_threshold = -3.6;  // mean chosen-token log-probability, nats
  double tts_threshold = 10.0;  // dB

  /// Throws InvalidConfig.
  void validate() const;
};

enum class Verdict { Pass, Escalate };

struct GateDecision {
  Verdict verdict = Verdict::Pass;
  double metric = 0.0;
  double threshold = 0.0;
};

/// Pass iff metric >= threshold; ties pass.
GateDecision decide(double metric, double threshold) noexcept;

/// Mean of the chosen-token log-probabilities against cfg.stt_threshold.
GateDecision stt_gate(std::span<const float> step_logprobs, const GateConfig& cfg);

/// estimate_snr(w) against cfg.tts_threshold.
GateDecision tts_gate(const Waveform& w, const GateConfig& cfg);

inline constexpr double kAlwaysPass = -std::numeric_limits<double>::infinity();

}  // namespace cascade
