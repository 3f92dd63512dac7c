// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascade/audio.hpp"
#include "cascade/error.hpp"
#include "cascade/tensor.hpp"

namespace cascade {

enum class Task : uint8_t { STT = 1, TTS = 2 };
enum class Part { Edge, Cloud, All };
enum class EncoderBranch : uint8_t { Edge, Cloud };

const char* task_name(Task task) noexcept;
Task parse_task(const std::string& name);

/// Multiply-accumulate tally. Forward passes add to it when one is supplied.
struct OpCounter {
  uint64_t macs = 0;
};

inline constexpr int32_t kEosToken = 0;
inline constexpr int32_t kBosToken = 1;

struct ModelConfig {
  Task task = Task::STT;
  uint32_t d_model = 64;
  uint32_t n_heads = 2;
  uint32_t n_enc_layers_full = 8;
  uint32_t n_enc_layers_edge = 3;
  uint32_t n_dec_layers = 5;
  uint32_t vocab_size = 128;
  uint32_t n_mel = 40;
  uint32_t max_src_len = 3000;
  uint32_t max_tgt_len = 64;
  uint32_t enc_fixed_len = 64;  // STT only; 0 for TTS
  uint64_t seed = 1234;

  // Audio front end (STT input / TTS vocoder).
  uint32_t sample_rate = 16000;
  uint32_t n_fft = 400;
  uint32_t hop_length = 160;

  // Feed-forward width; 0 means 4 * d_model.
  uint32_t ffn_dim = 0;
  // TTS: the stop flag is ignored until this many frames per input token.
  uint32_t min_frames_per_token = 4;

  uint32_t ffn_width() const noexcept { return ffn_dim ? ffn_dim : 4 * d_model; }

  /// Throws InvalidConfig.
  void validate() const;

  static ModelConfig bundled_stt();
  static ModelConfig bundled_tts();
  static ModelConfig bundled(Task task) {
    return task == Task::STT ? bundled_stt() : bundled_tts();
  }
};

using ParamMap = std::map<std::string, Tensor>;

struct SplitModel {
  ModelConfig config;
  // Prenet, compressed encoder, decoder and postnet.
  ParamMap edge;
  // Full-depth encoder hosted remotely.
  ParamMap cloud;
  std::optional<ParamMap> edge_quantized;

  const Tensor& edge_param(const std::string& name) const;
  const Tensor& cloud_param(const std::string& name) const;
};

struct HiddenStates {
  Tensor states;  // [enc_len, d_model]
  EncoderBranch origin = EncoderBranch::Edge;
};

struct DecodeResult {
  std::vector<int32_t> tokens;       // STT, EOS excluded
  std::vector<float> step_logprobs;  // STT, one per decode step (EOS step included)
  std::optional<MelSpec> mel;        // TTS
  uint32_t steps = 0;
};

/// Seeded build; weights uniform in [-1/sqrt(d_model), 1/sqrt(d_model)],
/// layer-norm gains 1 and offsets 0. Edge and cloud encoders are independent.
SplitModel build_split_model(const ModelConfig& config);

/// Fills `edge_quantized` with an INT8 copy of every edge tensor.
void quantize_edge(SplitModel& model);

/// Model whose edge weights went through an INT8 round trip.
SplitModel with_int8_edge_weights(const SplitModel& model);

/// Test rig: the cloud encoder becomes the edge encoder followed by identity
/// layers (zeroed output projections), with the edge's final norm.
SplitModel with_identity_extended_cloud(const SplitModel& model);

/// STT: mel frames -> projection, stride-2 pooling, positional encoding,
/// zero-pad or truncate to enc_fixed_len rows.
Tensor prenet_forward(const SplitModel& model, const MelSpec& mel, OpCounter* ops = nullptr);
/// TTS: embedding lookup plus sinusoidal positions, one row per token.
Tensor prenet_forward(const SplitModel& model, std::span<const int32_t> tokens,
                      OpCounter* ops = nullptr);

/// Pre-norm self-attention stack. `attention_capture` collects per-layer,
/// per-head attention weights when non-null.
HiddenStates encoder_forward(const SplitModel& model, const Tensor& features,
                             EncoderBranch which, OpCounter* ops = nullptr,
                             std::vector<Tensor>* attention_capture = nullptr);

/// Greedy autoregressive decode bounded by max_tgt_len (or `max_steps` when
/// smaller).
DecodeResult decoder_greedy(const SplitModel& model, const HiddenStates& hidden,
                            OpCounter* ops = nullptr,
                            std::optional<uint32_t> max_steps = std::nullopt);

uint64_t param_count(const SplitModel& model, Part part);

/// Text to TTS token ids (byte values); throws TokenOutOfRange.
std::vector<int32_t> text_to_tokens(const std::string& text, uint32_t vocab_size);

}  // namespace cascade
