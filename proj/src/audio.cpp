// SPDX-License-Identifier: Apache-2.0
#include "cascade/audio.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include "cascade/error.hpp"
#include "cascade/model.hpp"

namespace cascade {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// FFTW-aligned scratch so plans can use SIMD.
struct FftBuffers {
  explicit FftBuffers(uint32_t n)
      : real(fftw_alloc_real(n)), spec(fftw_alloc_complex(n / 2 + 1)) {
    if (!real || !spec) throw std::bad_alloc();
  }
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(spec);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;

  double* real;
  fftw_complex* spec;
};

const FftPlans& plans_for(uint32_t n) {
  static std::mutex mu;
  static std::map<uint32_t, FftPlans> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  FftBuffers buf(n);
  FftPlans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.real, buf.spec, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), buf.spec, buf.real,
                                   FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  return cache.emplace(n, p).first->second;
}

uint64_t fft_cost(uint32_t n) {
  // Rough real-FFT multiply count, used only for the compute tally.
  return static_cast<uint64_t>(2.0 * n * std::log2(std::max<uint32_t>(n, 2)));
}

std::vector<double> hann(uint32_t n) {
  std::vector<double> w(n);
  for (uint32_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

using Spectrum = std::vector<std::complex<double>>;

// Frames of length n_fft starting at t * hop for t in [0, n_frames).
// Writes into `out`, which must already hold n_frames spectra of n_fft/2+1 bins.
void stft_into(std::span<const double> x, uint32_t n_fft, uint32_t hop, uint32_t n_frames,
               const std::vector<double>& window, std::vector<Spectrum>& out) {
  const auto& plan = plans_for(n_fft);
  FftBuffers buf(n_fft);
  const uint32_t n_bins = n_fft / 2 + 1;
  for (uint32_t t = 0; t < n_frames; ++t) {
    const std::size_t start = std::size_t(t) * hop;
    for (uint32_t i = 0; i < n_fft; ++i) buf.real[i] = x[start + i] * window[i];
    fftw_execute_dft_r2c(plan.forward, buf.real, buf.spec);
    for (uint32_t k = 0; k < n_bins; ++k) out[t][k] = {buf.spec[k][0], buf.spec[k][1]};
  }
}

std::vector<Spectrum> stft(std::span<const double> x, uint32_t n_fft, uint32_t hop,
                           uint32_t n_frames, const std::vector<double>& window) {
  std::vector<Spectrum> out(n_frames, Spectrum(n_fft / 2 + 1));
  stft_into(x, n_fft, hop, n_frames, window, out);
  return out;
}

std::vector<double> istft(const std::vector<Spectrum>& frames, uint32_t n_fft, uint32_t hop,
                          const std::vector<double>& window) {
  const auto& plan = plans_for(n_fft);
  const std::size_t n_frames = frames.size();
  const std::size_t len = n_frames == 0 ? 0 : (n_frames - 1) * hop + n_fft;
  std::vector<double> y(len, 0.0);
  std::vector<double> wsum(len, 0.0);
  FftBuffers buf(n_fft);  // c2r overwrites its input, so frames are copied in
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t k = 0; k < frames[t].size(); ++k) {
      buf.spec[k][0] = frames[t][k].real();
      buf.spec[k][1] = frames[t][k].imag();
    }
    fftw_execute_dft_c2r(plan.inverse, buf.spec, buf.real);
    const std::size_t start = t * hop;
    for (uint32_t i = 0; i < n_fft; ++i) {
      y[start + i] += buf.real[i] / n_fft * window[i];
      wsum[start + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < len; ++i) {
    if (wsum[i] > 1e-3) y[i] /= wsum[i];
  }
  return y;
}

uint32_t frame_count(std::size_t len, uint32_t n_fft, uint32_t hop) {
  return static_cast<uint32_t>((len - n_fft) / hop + 1);
}

}  // namespace

double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<float> mel_filterbank(uint32_t sample_rate, uint32_t n_fft, uint32_t n_mel) {
  const uint32_t n_bins = n_fft / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mel + 2);
  for (uint32_t i = 0; i < n_mel + 2; ++i) edges[i] = mel_to_hz(top * i / (n_mel + 1));
  std::vector<float> fb(std::size_t(n_mel) * n_bins, 0.0f);
  for (uint32_t m = 0; m < n_mel; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (uint32_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) fb[std::size_t(m) * n_bins + k] = static_cast<float>(w);
    }
  }
  return fb;
}

Waveform synth_wave(std::span<const SineComponent> components, double duration_s,
                    uint32_t sample_rate, double noise_sigma, uint64_t seed) {
  if (sample_rate == 0) throw Error(ErrorCode::InvalidArgument, "sample_rate must be positive");
  if (!(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  for (const auto& c : components) {
    if (c.freq_hz >= sample_rate / 2.0 || c.freq_hz < 0.0) {
      throw Error(ErrorCode::AliasedFrequency,
                  std::to_string(c.freq_hz) + " Hz is not below Nyquist for " +
                      std::to_string(sample_rate) + " Hz");
    }
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  std::mt19937_64 rng(seed);
  // Box-Muller on raw engine bits; std::normal_distribution differs between
  // standard libraries.
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (const auto& c : components) v += c.amplitude * std::sin(2.0 * std::numbers::pi * c.freq_hz * t);
    if (noise_sigma > 0.0) {
      const double u1 = uniform(), u2 = uniform();
      v += noise_sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    w.samples[i] = static_cast<float>(v);
  }
  return w;
}

MelSpec log_mel(const Waveform& w, uint32_t n_fft, uint32_t hop, uint32_t n_mel, OpCounter* ops) {
  if (n_fft == 0 || hop == 0 || n_fft < hop) {
    throw Error(ErrorCode::InvalidArgument, "log_mel needs 0 < hop <= n_fft");
  }
  if (w.samples.size() < n_fft) {
    throw Error(ErrorCode::TooShort, "waveform of " + std::to_string(w.samples.size()) +
                                         " samples is shorter than n_fft " + std::to_string(n_fft));
  }
  const uint32_t n_frames = frame_count(w.samples.size(), n_fft, hop);
  const uint32_t n_bins = n_fft / 2 + 1;
  const std::vector<double> x(w.samples.begin(), w.samples.end());
  const auto spec = stft(x, n_fft, hop, n_frames, hann(n_fft));
  const auto fb = mel_filterbank(w.sample_rate, n_fft, n_mel);

  std::vector<float> out(std::size_t(n_frames) * n_mel);
  std::vector<double> mag(n_bins);
  for (uint32_t t = 0; t < n_frames; ++t) {
    for (uint32_t k = 0; k < n_bins; ++k) mag[k] = std::abs(spec[t][k]);
    for (uint32_t m = 0; m < n_mel; ++m) {
      double e = 0.0;
      const float* row = fb.data() + std::size_t(m) * n_bins;
      for (uint32_t k = 0; k < n_bins; ++k) e += row[k] * mag[k];
      out[std::size_t(t) * n_mel + m] = static_cast<float>(std::log(e + kLogFloor));
    }
  }
  if (ops) ops->macs += uint64_t(n_frames) * (fft_cost(n_fft) + uint64_t(n_mel) * n_bins);

  MelSpec m;
  m.frames = Tensor({n_frames, n_mel}, std::move(out));
  m.frame_hop = hop;
  m.sample_rate = w.sample_rate;
  return m;
}

Waveform griffin_lim(const MelSpec& m, uint32_t n_fft, uint32_t iters, OpCounter* ops) {
  if (iters < 1) throw Error(ErrorCode::InvalidArgument, "griffin_lim needs at least one iteration");
  if (m.frame_hop == 0 || m.frame_hop > n_fft || m.sample_rate == 0) {
    throw Error(ErrorCode::InvalidArgument, "mel spectrogram lacks a usable hop or sample rate");
  }
  const uint32_t n_frames = m.n_frames();
  const uint32_t n_mel = m.n_mel();
  const uint32_t n_bins = n_fft / 2 + 1;
  const uint32_t hop = m.frame_hop;

  const auto fb = mel_filterbank(m.sample_rate, n_fft, n_mel);
  Eigen::MatrixXd basis(n_mel, n_bins);
  for (uint32_t i = 0; i < n_mel; ++i)
    for (uint32_t k = 0; k < n_bins; ++k) basis(i, k) = fb[std::size_t(i) * n_bins + k];
  const Eigen::MatrixXd pinv = basis.completeOrthogonalDecomposition().pseudoInverse();

  Eigen::MatrixXd mel_amp(n_mel, n_frames);
  const auto logs = m.frames.f32();
  for (uint32_t t = 0; t < n_frames; ++t)
    for (uint32_t i = 0; i < n_mel; ++i)
      mel_amp(i, t) = std::max(0.0, std::exp(static_cast<double>(logs[std::size_t(t) * n_mel + i])) - kLogFloor);
  const Eigen::MatrixXd lin = (pinv * mel_amp).cwiseMax(0.0);

  const auto window = hann(n_fft);
  std::vector<Spectrum> target(n_frames, Spectrum(n_bins));
  for (uint32_t t = 0; t < n_frames; ++t)
    for (uint32_t k = 0; k < n_bins; ++k) target[t][k] = lin(k, t);

  std::vector<Spectrum> current = target;
  std::vector<Spectrum> rebuilt = target;
  for (uint32_t it = 0; it < iters; ++it) {
    const auto signal = istft(current, n_fft, hop, window);
    stft_into(signal, n_fft, hop, n_frames, window, rebuilt);
    for (uint32_t t = 0; t < n_frames; ++t) {
      for (uint32_t k = 0; k < n_bins; ++k) {
        const double a = std::sqrt(std::norm(rebuilt[t][k]));
        const auto phase = a > 0.0 ? rebuilt[t][k] / a : std::complex<double>(1.0, 0.0);
        current[t][k] = target[t][k].real() * phase;
      }
    }
  }
  const auto signal = istft(current, n_fft, hop, window);
  if (ops) {
    ops->macs += uint64_t(n_frames) * (2 * iters + 1) * fft_cost(n_fft) +
                 uint64_t(n_frames) * n_mel * n_bins;
  }

  Waveform w;
  w.sample_rate = m.sample_rate;
  w.samples.assign(signal.begin(), signal.end());
  return w;
}

double estimate_snr(const Waveform& w) {
  const auto frame = static_cast<std::size_t>(std::lround(0.025 * w.sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(0.010 * w.sample_rate));
  if (frame == 0 || hop == 0 || w.samples.size() < frame) {
    throw Error(ErrorCode::TooShort, "waveform too short for SNR estimation");
  }
  const std::size_t n = (w.samples.size() - frame) / hop + 1;
  if (n < 10) {
    throw Error(ErrorCode::TooShort, "SNR estimation needs at least 10 frames of 25 ms, got " +
                                         std::to_string(n));
  }
  std::vector<double> power(n);
  for (std::size_t f = 0; f < n; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      const double v = w.samples[f * hop + i];
      acc += v * v;
    }
    power[f] = acc / frame;
  }
  double total = 0.0;
  for (double p : power) total += p;
  const double p_signal = total / n;

  const std::size_t k = std::max<std::size_t>(1, n / 10);
  std::nth_element(power.begin(), power.begin() + (k - 1), power.end());
  std::sort(power.begin(), power.begin() + k);
  double low = 0.0;
  for (std::size_t i = 0; i < k; ++i) low += power[i];
  const double p_noise = low / k;
  return 10.0 * std::log10(p_signal / std::max(p_noise, 1e-12));
}

}  // namespace cascade
