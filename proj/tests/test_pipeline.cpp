// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "cascade/fixtures.hpp"
#include "cascade/pipeline.hpp"
#include "helpers.hpp"

using namespace cascade;
using testutil::expect_code;

namespace {

struct Rig {
  std::shared_ptr<const SplitModel> model;
  std::unique_ptr<CloudService> service;

  explicit Rig(SplitModel m) : model(std::make_shared<const SplitModel>(std::move(m))) {
    ServiceConfig cfg;
    (model->config.task == Task::STT ? cfg.stt : cfg.tts) = model;
    service = std::make_unique<CloudService>(cfg);
  }

  VirtualLink link(double kbs, double rtt = 0.0) const {
    return VirtualLink(LinkSpec::from_kbs(kbs, rtt), [svc = service.get()](std::span<const uint8_t> f) {
      return svc->handle_timed(f);
    });
  }
};

const Rig& stt_rig() {
  static const Rig rig(build_split_model(ModelConfig::bundled_stt()));
  return rig;
}

const Rig& tts_rig() {
  static const Rig rig(build_split_model(ModelConfig::bundled_tts()));
  return rig;
}

PipelineOptions passing() {
  PipelineOptions o;
  o.gate.stt_threshold = kAlwaysPass;
  o.gate.tts_threshold = kAlwaysPass;
  return o;
}

PipelineOptions forced() {
  PipelineOptions o;
  o.force_escalate = true;
  return o;
}

std::vector<int32_t> tokens_of(const std::string& s) { return text_to_tokens(s, 128); }

}  // namespace

TEST_CASE("gate pass matches edge-only output with no network traffic") {
  const auto& rig = stt_rig();
  const auto wave = speech_like_wave(1.0);
  auto link = rig.link(512);
  const auto with_link = run_stt(*rig.model, wave, &link, passing());
  const auto alone = run_stt(*rig.model, wave, nullptr, passing());
  CHECK(with_link.tokens == alone.tokens);
  CHECK_FALSE(with_link.trace.escalated);
  CHECK(with_link.trace.uplink_bytes == 0);
  CHECK(with_link.trace.downlink_bytes == 0);
  CHECK(with_link.trace.transfer_time_s == 0.0);
  CHECK(with_link.trace.wall_time_s == with_link.trace.cpu_time_s);
  CHECK(with_link.trace.decode_passes == 1);
  CHECK(link.clock().now() == 0.0);

  const auto& trig = tts_rig();
  auto tlink = trig.link(512);
  const auto toks = tokens_of(short_tts_text());
  const auto a = run_tts(*trig.model, toks, &tlink, passing());
  const auto b = run_tts(*trig.model, toks, nullptr, passing());
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.trace.uplink_bytes + a.trace.downlink_bytes == 0);
}

TEST_CASE("stt payload is fixed regardless of utterance length") {
  const auto& rig = stt_rig();
  auto link = rig.link(256);
  const auto short_run = run_stt(*rig.model, speech_like_wave(0.1), &link, forced()).trace;
  const auto long_run = run_stt(*rig.model, speech_like_wave(1.9), &link, forced()).trace;
  const uint64_t expected = predicted_frame_length(2, DType::FP32, 64 * 64);
  CHECK(short_run.uplink_bytes == expected);
  CHECK(long_run.uplink_bytes == expected);
  CHECK(short_run.downlink_bytes == long_run.downlink_bytes);
  CHECK(short_run.transfer_time_s == long_run.transfer_time_s);
  CHECK(short_run.cloud_time_s == long_run.cloud_time_s);
  CHECK(long_run.wall_time_s - short_run.wall_time_s == long_run.cpu_time_s - short_run.cpu_time_s);
  CHECK(long_run.cpu_time_s > short_run.cpu_time_s);
  CHECK(short_run.decode_passes == 2);
  CHECK(short_run.wall_time_s == short_run.cpu_time_s + short_run.cloud_time_s + short_run.transfer_time_s);
}

TEST_CASE("tts payload is affine in the token count") {
  const auto& rig = tts_rig();
  auto link = rig.link(1024);
  for (const std::string text : {"Hi.", "Hello there.", "A sentence of moderate length, forty chars"}) {
    const auto toks = tokens_of(text);
    const auto tr = run_tts(*rig.model, toks, &link, forced()).trace;
    const uint64_t expected = kFrameHeaderBytes + 2 * 4 + toks.size() * 64 * 4 + 4;
    CHECK(tr.uplink_bytes == expected);
    CHECK(tr.downlink_bytes == expected);
  }
}

TEST_CASE("unreachable cloud degrades to the edge output") {
  const auto& rig = stt_rig();
  const auto wave = speech_like_wave(0.5);
  struct DeadLink final : Link {
    LinkSpec s = LinkSpec::from_kbs(512);
    Exchange send_recv(std::span<const uint8_t>) override {
      throw Error(ErrorCode::ConnectionFailed, "unreachable");
    }
    const LinkSpec& spec() const noexcept override { return s; }
  } dead;
  const auto r = run_stt(*rig.model, wave, &dead, forced());
  const auto edge = run_stt(*rig.model, wave, nullptr, passing());
  CHECK(r.trace.escalated);
  CHECK(r.trace.degraded);
  CHECK(r.trace.failure.find("unreachable") != std::string::npos);
  CHECK(r.tokens == edge.tokens);
  CHECK(r.trace.uplink_bytes == 0);

  const auto none = run_stt(*rig.model, wave, nullptr, forced());
  CHECK(none.trace.degraded);
  CHECK(none.tokens == edge.tokens);
}

TEST_CASE("service errors degrade instead of throwing") {
  const auto& rig = stt_rig();
  VirtualLink link(LinkSpec::from_kbs(512), [](std::span<const uint8_t>) {
    return HandlerResult{encode_error_frame(Task::STT, ServiceError::Shape), 0.0};
  });
  const auto r = run_stt(*rig.model, speech_like_wave(0.3), &link, forced());
  CHECK(r.trace.degraded);
  CHECK(r.trace.decode_passes == 1);
}

TEST_CASE("identity-extended cloud reproduces the edge-only result") {
  const Rig rig(with_identity_extended_cloud(build_split_model(ModelConfig::bundled_stt())));
  const auto wave = speech_like_wave(0.8);
  auto link = rig.link(512);
  const auto esc = run_stt(*rig.model, wave, &link, forced());
  const auto edge = run_stt(*rig.model, wave, nullptr, passing());
  CHECK_FALSE(esc.trace.degraded);
  CHECK(esc.trace.decode_passes == 2);
  CHECK(esc.tokens == edge.tokens);
}

TEST_CASE("escalation without force follows the gate") {
  const auto& rig = stt_rig();
  auto link = rig.link(512);
  PipelineOptions strict;
  strict.gate.stt_threshold = 0.0;
  const auto r = run_stt(*rig.model, speech_like_wave(0.4), &link, strict);
  CHECK(r.trace.escalated);
  CHECK(r.trace.decode_passes == 2);
  CHECK(r.trace.gate.verdict == Verdict::Escalate);
  // No link: the gate failure keeps the edge output and is not a failure.
  const auto alone = run_stt(*rig.model, speech_like_wave(0.4), nullptr, strict);
  CHECK_FALSE(alone.trace.escalated);
  CHECK_FALSE(alone.trace.degraded);
}

TEST_CASE("sweep properties") {
  const auto& rig = stt_rig();
  const auto rows = sweep_bandwidth(*rig.model, speech_like_wave(1.0), kDefaultSweepKbs, LinkSpec{}, {});
  REQUIRE(rows.size() == 7);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].wall_time_s < rows[i - 1].wall_time_s);
    CHECK(rows[i].cpu_time_s == rows[0].cpu_time_s);
    CHECK(rows[i].uplink_bytes == rows[0].uplink_bytes);
    CHECK(rows[i].transfer_time_s < rows[i - 1].transfer_time_s);
  }
  for (const auto& r : rows) CHECK(r.wall_time_s > r.cpu_time_s + r.transfer_time_s);

  const std::vector<double> bad{512, 0};
  expect_code(ErrorCode::InvalidArgument, [&] { sweep_bandwidth(*rig.model, speech_like_wave(1.0), bad, {}, {}); });
  const std::vector<double> one{512};
  expect_code(ErrorCode::InvalidArgument,
              [&] { sweep_bandwidth(*rig.model, std::vector<int32_t>{72, 105}, one, {}, {}); });
}

TEST_CASE("runs are deterministic in virtual mode") {
  const auto& rig = tts_rig();
  auto l1 = rig.link(256, 0.04);
  auto l2 = rig.link(256, 0.04);
  const auto toks = tokens_of("Determinism");
  const auto a = run_tts(*rig.model, toks, &l1, forced());
  const auto b = run_tts(*rig.model, toks, &l2, forced());
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.trace.wall_time_s == b.trace.wall_time_s);
  CHECK(a.trace.edge_macs == b.trace.edge_macs);
}

TEST_CASE("task and sample-rate mismatches are rejected") {
  const auto& rig = stt_rig();
  auto wave = speech_like_wave(0.2);
  wave.sample_rate = 8000;
  expect_code(ErrorCode::InvalidArgument, [&] { run_stt(*rig.model, wave, nullptr, {}); });
  const std::vector<int32_t> toks{72};
  expect_code(ErrorCode::InvalidArgument, [&] { run_tts(*rig.model, toks, nullptr, {}); });
}
