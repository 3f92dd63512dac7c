// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/tensor.hpp"

namespace cascade {

struct OpCounter;

struct Waveform {
  std::vector<float> samples;
  uint32_t sample_rate = 16000;

  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Log-amplitude mel spectrogram; `frames` has shape [n_frames, n_mel].
struct MelSpec {
  Tensor frames;
  uint32_t frame_hop = 0;
  uint32_t sample_rate = 0;

  uint32_t n_frames() const { return frames.shape().at(0); }
  uint32_t n_mel() const { return frames.shape().at(1); }
};

struct SineComponent {
  double freq_hz;
  double amplitude;
};

/// Sum of sines plus seeded Gaussian noise with standard deviation
/// `noise_sigma`.
Waveform synth_wave(std::span<const SineComponent> components, double duration_s,
                    uint32_t sample_rate, double noise_sigma, uint64_t seed);

/// Floor added before the logarithm.
inline constexpr double kLogFloor = 1e-10;

/// Hann-window STFT magnitude, HTK-scale triangular filterbank, log(x + 1e-10).
/// Produces floor((len - n_fft) / hop) + 1 frames.
MelSpec log_mel(const Waveform& w, uint32_t n_fft, uint32_t hop, uint32_t n_mel,
                OpCounter* ops = nullptr);

/// Pseudo-inverse mel back to linear magnitude, then `iters` rounds of
/// Griffin-Lim phase reconstruction starting from zero phase.
Waveform griffin_lim(const MelSpec& m, uint32_t n_fft, uint32_t iters = 8,
                     OpCounter* ops = nullptr);

/// Single-signal SNR estimate in dB. 25 ms frames with a 10 ms hop; noise power
/// is the mean power of the quietest tenth of the frames.
double estimate_snr(const Waveform& w);

/// HTK mel filterbank, shape [n_mel, n_fft / 2 + 1], unnormalized triangles.
std::vector<float> mel_filterbank(uint32_t sample_rate, uint32_t n_fft, uint32_t n_mel);

double hz_to_mel(double hz) noexcept;
double mel_to_hz(double mel) noexcept;

// PCM 16-bit mono little-endian WAV.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace cascade
