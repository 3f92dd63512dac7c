// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "cascade/audio.hpp"

namespace cascade {

/// 12-character and 270-character TTS inputs, ASCII only.
std::string short_tts_text();
std::string long_tts_text();

/// Voiced-speech stand-in: a few harmonics of a 140 Hz fundamental with an
/// amplitude envelope and light noise.
Waveform speech_like_wave(double duration_s, uint32_t sample_rate = 16000, uint64_t seed = 7);

}  // namespace cascade
