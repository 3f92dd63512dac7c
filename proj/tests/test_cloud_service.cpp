// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "cascade/cloud_service.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cascade;
using testutil::expect_code;

namespace {

ServiceConfig bundled_service() {
  ServiceConfig cfg;
  cfg.stt = std::make_shared<const SplitModel>(build_split_model(ModelConfig::bundled_stt()));
  cfg.tts = std::make_shared<const SplitModel>(build_split_model(ModelConfig::bundled_tts()));
  return cfg;
}

Tensor random_features(uint32_t rows, uint32_t seed) {
  std::mt19937 rng(seed);
  return Tensor({rows, 64}, oracle::uniform(rng, rows * 64, -1.0f, 1.0f));
}

uint8_t code_of(const std::vector<uint8_t>& frame) {
  const auto d = decode_frame(frame);
  REQUIRE(d.kind == FrameKind::Error);
  return error_frame_code(d);
}

}  // namespace

TEST_CASE("loopback responses match in-process cloud encoding bit for bit") {
  const auto cfg = bundled_service();
  CloudServer server(cfg);
  server.start();
  SocketLink link(LinkSpec::from_kbs(1e6), server.address());
  const struct {
    Task task;
    uint32_t rows;
    const SplitModel* model;
  } cases[] = {{Task::STT, 64, cfg.stt.get()}, {Task::TTS, 12, cfg.tts.get()}, {Task::TTS, 270, cfg.tts.get()}};
  uint32_t seed = 0;
  for (const auto& c : cases) {
    const auto features = random_features(c.rows, ++seed);
    const auto expected = encoder_forward(*c.model, features, EncoderBranch::Cloud).states;
    const auto ex = link.send_recv(encode_frame(c.task, FrameKind::Features, features));
    const auto d = decode_frame(ex.response);
    CHECK(d.kind == FrameKind::HiddenStates);
    CHECK(d.task == c.task);
    CHECK(d.tensor == expected);
  }
  server.stop();
  server.wait();
}

TEST_CASE("int8 features are dequantized before encoding") {
  const auto cfg = bundled_service();
  const CloudService svc(cfg);
  const auto q = quantize_linear(random_features(20, 4));
  const auto d = decode_frame(svc.handle_request(encode_frame(Task::TTS, FrameKind::Features, q)));
  CHECK(d.tensor == encoder_forward(*cfg.tts, dequantize(q), EncoderBranch::Cloud).states);
}

TEST_CASE("bad requests become error frames") {
  const CloudService svc(bundled_service());
  const std::vector<uint8_t> garbage{'n', 'o', 'p', 'e', 1, 2, 3};
  CHECK(code_of(svc.handle_request(garbage)) == 1);
  CHECK(code_of(svc.handle_request({})) == 1);

  const auto wrong_width = encode_frame(Task::STT, FrameKind::Features, Tensor::zeros({64, 32}));
  CHECK(code_of(svc.handle_request(wrong_width)) == 2);

  auto versioned = encode_frame(Task::STT, FrameKind::Features, random_features(64, 1));
  versioned[4] = 9;
  CHECK(code_of(svc.handle_request(versioned)) == 3);

  const auto hidden = encode_frame(Task::STT, FrameKind::HiddenStates, random_features(64, 1));
  CHECK(code_of(svc.handle_request(hidden)) == 1);

  auto small = bundled_service();
  small.tts.reset();
  const CloudService stt_only(small);
  CHECK(code_of(stt_only.handle_request(encode_frame(Task::TTS, FrameKind::Features, random_features(5, 2)))) == 2);
}

TEST_CASE("timed handler reports modeled cloud compute") {
  auto cfg = bundled_service();
  const CloudService svc(cfg);
  const auto features = random_features(64, 3);
  OpCounter ops;
  encoder_forward(*cfg.stt, features, EncoderBranch::Cloud, &ops);
  const auto r = svc.handle_timed(encode_frame(Task::STT, FrameKind::Features, features));
  CHECK(r.compute_s == cfg.device.seconds_for(ops.macs));
  CHECK(r.compute_s > 0.0);
}

TEST_CASE("service config validation") {
  ServiceConfig empty;
  expect_code(ErrorCode::InvalidConfig, [&] { CloudService{empty}; });
  auto swapped = bundled_service();
  std::swap(swapped.stt, swapped.tts);
  expect_code(ErrorCode::InvalidConfig, [&] { CloudService{swapped}; });
  auto tiny = bundled_service();
  tiny.server.max_payload_bytes = 100;
  expect_code(ErrorCode::InvalidConfig, [&] { CloudService{tiny}; });
}
