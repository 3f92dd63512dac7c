// SPDX-License-Identifier: Apache-2.0
#include "cascade/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace cascade {

std::string short_tts_text() { return "Hello there."; }

std::string long_tts_text() {
  std::string s =
      "The weather service expects light rain over the western highlands this afternoon, "
      "with clearing skies by evening. Farmers are advised to delay spraying until tomorrow "
      "morning. Market prices for maize held steady this week while bean prices rose slightly "
      "in the central region markets.";
  s.resize(270, '.');
  return s;
}

Waveform speech_like_wave(double duration_s, uint32_t sample_rate, uint64_t seed) {
  const SineComponent harmonics[] = {{140.0, 0.30}, {280.0, 0.20}, {420.0, 0.12}, {700.0, 0.08}, {1120.0, 0.05}};
  Waveform w = synth_wave(harmonics, duration_s, sample_rate, 0.01, seed);
  // Syllable-rate envelope so the signal has quiet stretches.
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * 4.0 * t);
    w.samples[i] = static_cast<float>(w.samples[i] * env);
  }
  return w;
}

}  // namespace cascade
