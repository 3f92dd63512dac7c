// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "cascade/model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cascade;
using testutil::expect_code;

namespace {

MelSpec random_mel(uint32_t frames, uint32_t n_mel, uint32_t seed) {
  std::mt19937 rng(seed);
  return {Tensor({frames, n_mel}, oracle::uniform(rng, std::size_t(frames) * n_mel, -8.0f, 2.0f)), 160, 16000};
}

ModelConfig tiny_stt() {
  ModelConfig c;
  c.task = Task::STT;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_enc_layers_full = 1;
  c.n_enc_layers_edge = 1;
  c.n_dec_layers = 1;
  c.vocab_size = 16;
  c.n_mel = 6;
  c.max_src_len = 100;
  c.max_tgt_len = 10;
  c.enc_fixed_len = 4;
  return c;
}


}  // namespace

TEST_CASE("closed-form parameter count for a one-layer model") {
  const auto c = tiny_stt();
  const auto m = build_split_model(c);
  const uint64_t d = 8, f = 32, V = 16, M = 6;
  const uint64_t edge = (M * d + d) + oracle::encoder_layer_params(d, f) + 2 * d + V * d +
                        oracle::decoder_layer_params(d, f) + 2 * d + (d * V + V);
  const uint64_t cloud = oracle::encoder_layer_params(d, f) + 2 * d;
  CHECK(param_count(m, Part::Edge) == edge);
  CHECK(param_count(m, Part::Cloud) == cloud);
  CHECK(param_count(m, Part::All) == edge + cloud);
}

TEST_CASE("bundled configs hit the edge parameter fractions") {
  const auto stt = build_split_model(ModelConfig::bundled_stt());
  const auto tts = build_split_model(ModelConfig::bundled_tts());
  const double fs = double(param_count(stt, Part::Edge)) / double(param_count(stt, Part::All));
  const double ft = double(param_count(tts, Part::Edge)) / double(param_count(tts, Part::All));
  CHECK(std::fabs(fs - 0.56) <= 0.02);
  CHECK(std::fabs(ft - 0.38) <= 0.02);
  auto q = stt;
  quantize_edge(q);
  CHECK(param_count(q, Part::Edge) == param_count(stt, Part::Edge));
}

TEST_CASE("same seed builds are bit-identical, different seeds differ") {
  auto c = ModelConfig::bundled_tts();
  const auto a = build_split_model(c);
  const auto b = build_split_model(c);
  CHECK(a.edge == b.edge);
  CHECK(a.cloud == b.cloud);
  c.seed += 1;
  CHECK(build_split_model(c).edge != a.edge);
}

TEST_CASE("config validation") {
  auto c = tiny_stt();
  c.n_heads = 3;
  expect_code(ErrorCode::InvalidConfig, [&] { build_split_model(c); });
  c = tiny_stt();
  c.n_enc_layers_edge = 2;
  expect_code(ErrorCode::InvalidConfig, [&] { build_split_model(c); });
  c = tiny_stt();
  c.enc_fixed_len = 0;
  expect_code(ErrorCode::InvalidConfig, [&] { build_split_model(c); });
}

TEST_CASE("prenet shapes") {
  const auto stt = build_split_model(ModelConfig::bundled_stt());
  CHECK(prenet_forward(stt, random_mel(1, 40, 1)).shape() == Shape{64, 64});
  CHECK(prenet_forward(stt, random_mel(120, 40, 2)).shape() == Shape{64, 64});
  CHECK(prenet_forward(stt, random_mel(3000, 40, 3)).shape() == Shape{64, 64});
  expect_code(ErrorCode::InputTooLong, [&] { prenet_forward(stt, random_mel(3001, 40, 4)); });
  const auto zeros = prenet_forward(stt, MelSpec{Tensor::zeros({10, 40}), 160, 16000});
  for (float v : zeros.f32()) CHECK(std::isfinite(v));

  const auto tts = build_split_model(ModelConfig::bundled_tts());
  const std::vector<int32_t> tokens(12, 65);
  CHECK(prenet_forward(tts, tokens).shape() == Shape{12, 64});
  const std::vector<int32_t> bad{1, 128};
  expect_code(ErrorCode::TokenOutOfRange, [&] { prenet_forward(tts, bad); });
  expect_code(ErrorCode::TokenOutOfRange, [&] { text_to_tokens("caf\xc3\xa9", 128); });
}

TEST_CASE("encoder shapes, attention rows and independent branches") {
  const auto m = build_split_model(ModelConfig::bundled_stt());
  const auto feats = prenet_forward(m, random_mel(90, 40, 5));
  std::vector<Tensor> attn;
  const auto edge = encoder_forward(m, feats, EncoderBranch::Edge, nullptr, &attn);
  const auto cloud = encoder_forward(m, feats, EncoderBranch::Cloud);
  CHECK(edge.states.shape() == feats.shape());
  CHECK(cloud.states.shape() == feats.shape());
  CHECK(edge.origin == EncoderBranch::Edge);
  CHECK(cloud.origin == EncoderBranch::Cloud);
  CHECK(edge.states != cloud.states);
  CHECK(attn.size() == 3 * 2);
  for (const auto& a : attn) {
    const uint32_t rows = a.shape()[0], cols = a.shape()[1];
    for (uint32_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (uint32_t c = 0; c < cols; ++c) s += a.f32()[std::size_t(r) * cols + c];
      CHECK(std::fabs(s - 1.0) <= 1e-5);
    }
  }
  expect_code(ErrorCode::ShapeMismatch, [&] { encoder_forward(m, Tensor::zeros({4, 32}), EncoderBranch::Edge); });
}

TEST_CASE("decoder causal prefix over 20 seeds") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto c = ModelConfig::bundled_stt();
    c.seed = seed;
    const auto m = build_split_model(c);
    const auto h = encoder_forward(m, prenet_forward(m, random_mel(50, 40, uint32_t(seed))), EncoderBranch::Edge);
    const auto full = decoder_greedy(m, h);
    CHECK(full.tokens.size() <= c.max_tgt_len);
    CHECK(full.steps <= c.max_tgt_len);
    for (uint32_t t : {1u, 7u, 20u}) {
      const auto part = decoder_greedy(m, h, nullptr, t);
      const std::size_t n = std::min<std::size_t>(part.tokens.size(), full.tokens.size());
      CHECK(std::equal(part.tokens.begin(), part.tokens.begin() + n, full.tokens.begin()));
      CHECK(std::equal(part.step_logprobs.begin(), part.step_logprobs.end(), full.step_logprobs.begin()));
    }
  }
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto c = ModelConfig::bundled_tts();
    c.seed = seed;
    const auto m = build_split_model(c);
    const auto tokens = text_to_tokens("seed test", c.vocab_size);
    const auto h = encoder_forward(m, prenet_forward(m, tokens), EncoderBranch::Edge);
    const auto full = decoder_greedy(m, h, nullptr, 24);
    const auto part = decoder_greedy(m, h, nullptr, 10);
    REQUIRE(part.mel.has_value());
    const auto a = part.mel->frames.f32(), b = full.mel->frames.f32();
    REQUIRE(a.size() <= b.size());
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("decoding is deterministic and STT logprobs are valid") {
  const auto m = build_split_model(ModelConfig::bundled_stt());
  const auto h = encoder_forward(m, prenet_forward(m, random_mel(30, 40, 8)), EncoderBranch::Cloud);
  const auto a = decoder_greedy(m, h), b = decoder_greedy(m, h);
  CHECK(a.tokens == b.tokens);
  CHECK(a.step_logprobs == b.step_logprobs);
  for (float lp : a.step_logprobs) {
    CHECK(lp <= 0.0f);
    CHECK(lp >= -std::log(128.0f) - 1e-4f - 10.0f);
  }
  CHECK((a.step_logprobs.size() == a.tokens.size() || a.step_logprobs.size() == a.tokens.size() + 1));
}

TEST_CASE("TTS output length scales with input") {
  const auto m = build_split_model(ModelConfig::bundled_tts());
  auto run = [&](const std::string& text) {
    const auto tokens = text_to_tokens(text, 128);
    return decoder_greedy(m, encoder_forward(m, prenet_forward(m, tokens), EncoderBranch::Edge)).steps;
  };
  const uint32_t short_steps = run("Hi"), long_steps = run("A somewhat longer sentence.");
  CHECK(short_steps >= 4 * 2);
  CHECK(long_steps >= 4 * 27);
  CHECK(long_steps <= m.config.max_tgt_len);
}

TEST_CASE("identity-extended cloud reproduces the edge encoder") {
  const auto m = with_identity_extended_cloud(build_split_model(ModelConfig::bundled_stt()));
  const auto feats = prenet_forward(m, random_mel(40, 40, 6));
  CHECK(encoder_forward(m, feats, EncoderBranch::Cloud).states == encoder_forward(m, feats, EncoderBranch::Edge).states);
}

TEST_CASE("int8 edge weights stay within half a step") {
  const auto m = build_split_model(ModelConfig::bundled_tts());
  const auto q = with_int8_edge_weights(m);
  for (const auto& [name, t] : m.edge) {
    const auto scale = quantize_linear(t).quant()->scale;
    const auto a = t.f32(), b = q.edge.at(name).f32();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= scale / 2 + 1e-6);
  }
  CHECK(q.cloud == m.cloud);
}
