// SPDX-License-Identifier: Apache-2.0
#include "cascade/pipeline.hpp"

#include <chrono>

#include "cascade/wire.hpp"

namespace cascade {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

bool is_virtual(const Link* link) { return !link || link->spec().mode == LinkMode::Virtual; }

// Sends the features, returns the cloud hidden states. Fills the network part
// of the trace.
HiddenStates escalate(const SplitModel& model, const Tensor& features, Link& link, RunTrace& trace,
                      std::size_t expected_rows) {
  const auto frame = encode_frame(model.config.task, FrameKind::Features, features);
  Exchange ex = link.send_recv(frame);
  trace.uplink_bytes = ex.uplink.bytes;
  trace.downlink_bytes = ex.downlink.bytes;
  trace.transfer_time_s = ex.uplink.transfer_time + ex.downlink.transfer_time;
  trace.cloud_time_s = ex.handler_s;

  DecodedFrame resp = decode_frame(ex.response);
  if (resp.kind != FrameKind::HiddenStates || resp.task != model.config.task ||
      resp.tensor.dtype() != DType::FP32 || resp.tensor.rank() != 2 ||
      resp.tensor.shape()[0] != expected_rows || resp.tensor.shape()[1] != model.config.d_model) {
    throw Error(ErrorCode::ShapeMismatch, "cloud returned hidden states of the wrong shape");
  }
  return {std::move(resp.tensor), EncoderBranch::Cloud};
}

void mark_degraded(RunTrace& trace, const std::exception& e) {
  trace.degraded = true;
  trace.failure = e.what();
  trace.uplink_bytes = trace.downlink_bytes = 0;
  trace.transfer_time_s = trace.cloud_time_s = 0.0;
}

void finish_timing(RunTrace& trace, const ComputeDevice& device, bool virtual_link,
                   double measured_cpu_s, Clock::time_point start) {
  if (virtual_link) {
    trace.cpu_time_s = to_virtual_ticks(device.seconds_for(trace.edge_macs));
    trace.wall_time_s = trace.cpu_time_s + trace.cloud_time_s + trace.transfer_time_s;
  } else {
    trace.cpu_time_s = measured_cpu_s;
    trace.wall_time_s = since(start);
  }
}

}  // namespace

SttResult run_stt(const SplitModel& model, const Waveform& audio, Link* link, const PipelineOptions& opts) {
  const auto& cfg = model.config;
  if (cfg.task != Task::STT) throw Error(ErrorCode::InvalidArgument, "run_stt needs an STT model");
  if (audio.sample_rate != cfg.sample_rate) {
    throw Error(ErrorCode::InvalidArgument, "audio sample rate " + std::to_string(audio.sample_rate) +
                                                " does not match model rate " + std::to_string(cfg.sample_rate));
  }
  const auto start = Clock::now();
  double cpu_measured = 0.0;
  OpCounter ops;
  SttResult out;
  RunTrace& trace = out.trace;
  trace.task = Task::STT;

  auto t = Clock::now();
  const MelSpec mel = log_mel(audio, cfg.n_fft, cfg.hop_length, cfg.n_mel, &ops);
  const Tensor features = prenet_forward(model, mel, &ops);
  const HiddenStates edge_hidden = encoder_forward(model, features, EncoderBranch::Edge, &ops);
  DecodeResult decoded = decoder_greedy(model, edge_hidden, &ops);
  trace.decode_passes = 1;
  trace.gate = stt_gate(decoded.step_logprobs, opts.gate);
  cpu_measured += since(t);

  // Without a link a gate failure just keeps the edge output; only a forced
  // escalation counts as a failed attempt.
  if (opts.force_escalate || (link && trace.gate.verdict == Verdict::Escalate)) {
    trace.escalated = true;
    if (!link) {
      trace.degraded = true;
      trace.failure = "no cloud link configured";
    } else {
      try {
        const HiddenStates cloud_hidden = escalate(model, features, *link, trace, cfg.enc_fixed_len);
        t = Clock::now();
        decoded = decoder_greedy(model, cloud_hidden, &ops);
        trace.decode_passes = 2;
        cpu_measured += since(t);
      } catch (const Error& e) {
        mark_degraded(trace, e);
      }
    }
  }

  out.tokens = std::move(decoded.tokens);
  trace.output_tokens = static_cast<uint32_t>(out.tokens.size());
  trace.edge_macs = ops.macs;
  finish_timing(trace, opts.edge_device, is_virtual(link), cpu_measured, start);
  return out;
}

TtsResult run_tts(const SplitModel& model, std::span<const int32_t> tokens, Link* link,
                  const PipelineOptions& opts) {
  const auto& cfg = model.config;
  if (cfg.task != Task::TTS) throw Error(ErrorCode::InvalidArgument, "run_tts needs a TTS model");
  const auto start = Clock::now();
  double cpu_measured = 0.0;
  OpCounter ops;
  TtsResult out;
  RunTrace& trace = out.trace;
  trace.task = Task::TTS;

  auto t = Clock::now();
  const Tensor features = prenet_forward(model, tokens, &ops);
  const HiddenStates edge_hidden = encoder_forward(model, features, EncoderBranch::Edge, &ops);
  DecodeResult decoded = decoder_greedy(model, edge_hidden, &ops);
  out.audio = griffin_lim(*decoded.mel, cfg.n_fft, opts.griffin_lim_iters, &ops);
  trace.decode_passes = 1;
  trace.gate = tts_gate(out.audio, opts.gate);
  cpu_measured += since(t);

  if (opts.force_escalate || (link && trace.gate.verdict == Verdict::Escalate)) {
    trace.escalated = true;
    if (!link) {
      trace.degraded = true;
      trace.failure = "no cloud link configured";
    } else {
      try {
        const HiddenStates cloud_hidden = escalate(model, features, *link, trace, tokens.size());
        t = Clock::now();
        decoded = decoder_greedy(model, cloud_hidden, &ops);
        out.audio = griffin_lim(*decoded.mel, cfg.n_fft, opts.griffin_lim_iters, &ops);
        trace.decode_passes = 2;
        cpu_measured += since(t);
      } catch (const Error& e) {
        mark_degraded(trace, e);
      }
    }
  }

  trace.output_audio_s = out.audio.duration_s();
  trace.edge_macs = ops.macs;
  finish_timing(trace, opts.edge_device, is_virtual(link), cpu_measured, start);
  return out;
}

std::vector<SweepRow> sweep_bandwidth(const SplitModel& model, const SweepInput& input,
                                      std::span<const double> bandwidths_kbs, const LinkSpec& link_template,
                                      const PipelineOptions& opts, const ComputeDevice& cloud_device) {
  if (bandwidths_kbs.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one bandwidth");
  for (double b : bandwidths_kbs) {
    if (!(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "sweep bandwidths must be positive");
  }
  // Non-owning handle; the service lives only for this call.
  const std::shared_ptr<const SplitModel> shared(std::shared_ptr<void>{}, &model);
  ServiceConfig scfg;
  (model.config.task == Task::STT ? scfg.stt : scfg.tts) = shared;
  scfg.device = cloud_device;
  scfg.server.max_payload_bytes = static_cast<uint32_t>(std::max<uint64_t>(
      scfg.server.max_payload_bytes, scfg.largest_features_frame()));
  const CloudService service(scfg);

  const bool want_audio = model.config.task == Task::STT;
  if (want_audio != std::holds_alternative<Waveform>(input)) {
    throw Error(ErrorCode::InvalidArgument, std::string("sweep input does not match the ") +
                                                task_name(model.config.task) + " model");
  }
  PipelineOptions forced = opts;
  forced.force_escalate = true;

  std::vector<SweepRow> rows;
  for (double kbs : bandwidths_kbs) {
    LinkSpec spec = link_template;
    spec.bandwidth = kbs * kBytesPerKB;
    spec.mode = LinkMode::Virtual;
    VirtualLink link(spec, [&service](std::span<const uint8_t> f) { return service.handle_timed(f); });
    RunTrace trace;
    if (model.config.task == Task::STT) {
      trace = run_stt(model, std::get<Waveform>(input), &link, forced).trace;
    } else {
      trace = run_tts(model, std::get<std::vector<int32_t>>(input), &link, forced).trace;
    }
    if (trace.degraded) throw Error(ErrorCode::HandlerError, "sweep escalation failed: " + trace.failure);
    rows.push_back({kbs, trace.cpu_time_s, trace.wall_time_s, trace.transfer_time_s, trace.uplink_bytes,
                    trace.downlink_bytes});
  }
  return rows;
}

}  // namespace cascade
