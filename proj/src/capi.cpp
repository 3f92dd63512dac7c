// SPDX-License-Identifier: Apache-2.0
#include "cascade/cascade.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "cascade/cloud_service.hpp"
#include "cascade/config.hpp"
#include "cascade/costmodel.hpp"
#include "cascade/fixtures.hpp"
#include "cascade/fleet.hpp"
#include "cascade/pipeline.hpp"
#include "cascade/report.hpp"

using json = nlohmann::ordered_json;
using namespace cascade;

struct cascade_model {
  AppConfig config;
  std::shared_ptr<const SplitModel> model;
};

struct cascade_result {
  Task task = Task::STT;
  std::vector<int32_t> tokens;
  Waveform audio;
  RunTrace trace;
};

struct cascade_server {
  std::unique_ptr<CloudServer> server;
};

namespace {

thread_local std::string g_last_error;

int fail(int status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <typename F>
int guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CASCADE_OK;
  } catch (const Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CASCADE_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CASCADE_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

AppConfig config_from(const char* path) {
  return path ? load_config(path) : AppConfig{};
}

PipelineOptions pipeline_options(const cascade_model& m, const cascade_run_options* o) {
  PipelineOptions p;
  p.gate = m.config.gate;
  p.edge_device = m.config.edge_device;
  if (o) {
    p.force_escalate = o->force_escalate != 0;
    if (o->has_stt_threshold) p.gate.stt_threshold = o->stt_threshold;
    if (o->has_tts_threshold) p.gate.tts_threshold = o->tts_threshold;
  }
  p.gate.validate();
  return p;
}

// Owns whatever link the options ask for, plus the in-process service behind
// a virtual one.
struct LinkHolder {
  std::unique_ptr<CloudService> service;
  std::unique_ptr<Link> link;
};

LinkHolder make_link(const cascade_model& m, const cascade_run_options* o) {
  LinkHolder h;
  if (!o) return h;
  if (o->cloud_addr && *o->cloud_addr) {
    const double kbs = o->real_bandwidth_kbs > 0.0 ? o->real_bandwidth_kbs : 1e9;
    try {
      h.link = std::make_unique<SocketLink>(LinkSpec::from_kbs(kbs, o->rtt_s, LinkMode::Real), o->cloud_addr);
    } catch (const Error& e) {
      // The pipeline reports an unreachable cloud as a degraded run.
      if (e.code() != ErrorCode::ConnectionFailed) throw;
      struct DeadLink final : Link {
        LinkSpec s;
        std::string why;
        Exchange send_recv(std::span<const uint8_t>) override {
          throw Error(ErrorCode::ConnectionFailed, why);
        }
        const LinkSpec& spec() const noexcept override { return s; }
      };
      auto dead = std::make_unique<DeadLink>();
      dead->s = LinkSpec::from_kbs(kbs, o->rtt_s, LinkMode::Real);
      dead->why = e.what();
      h.link = std::move(dead);
    }
    return h;
  }
  if (o->virtual_bandwidth_kbs > 0.0) {
    ServiceConfig sc;
    (m.model->config.task == Task::STT ? sc.stt : sc.tts) = m.model;
    sc.device = m.config.cloud_device;
    sc.server = m.config.server;
    sc.server.max_payload_bytes =
        static_cast<uint32_t>(std::max<uint64_t>(sc.server.max_payload_bytes, sc.largest_features_frame()));
    h.service = std::make_unique<CloudService>(sc);
    const CloudService* svc = h.service.get();
    h.link = std::make_unique<VirtualLink>(LinkSpec::from_kbs(o->virtual_bandwidth_kbs, o->rtt_s),
                                           [svc](std::span<const uint8_t> f) { return svc->handle_timed(f); });
  }
  return h;
}

json trace_json(const RunTrace& t) {
  return json{{"task", task_name(t.task)},
              {"escalated", t.escalated},
              {"degraded", t.degraded},
              {"failure", t.failure},
              {"gate",
               {{"verdict", t.gate.verdict == Verdict::Pass ? "pass" : "escalate"},
                {"metric", t.gate.metric},
                {"threshold", t.gate.threshold}}},
              {"decode_passes", t.decode_passes},
              {"edge_macs", t.edge_macs},
              {"cpu_time_s", t.cpu_time_s},
              {"cloud_time_s", t.cloud_time_s},
              {"uplink_bytes", t.uplink_bytes},
              {"downlink_bytes", t.downlink_bytes},
              {"transfer_time_s", t.transfer_time_s},
              {"wall_time_s", t.wall_time_s},
              {"output_tokens", t.output_tokens},
              {"output_audio_s", t.output_audio_s}};
}

int run_stt_wave(const cascade_model* model, Waveform w, const cascade_run_options* opts, cascade_result** out) {
  return guarded([&] {
    require(model && out, "model and out are required");
    require(model->model->config.task == Task::STT, "model is not an STT model");
    auto holder = make_link(*model, opts);
    auto r = std::make_unique<cascade_result>();
    auto res = run_stt(*model->model, w, holder.link.get(), pipeline_options(*model, opts));
    r->task = Task::STT;
    r->tokens = std::move(res.tokens);
    r->trace = res.trace;
    *out = r.release();
  });
}

std::optional<double> positive(double v) { return v > 0.0 ? std::optional<double>(v) : std::nullopt; }

}  // namespace

extern "C" {

const char* cascade_last_error(void) { return g_last_error.c_str(); }

const char* cascade_status_name(int status) {
  if (status == CASCADE_OK) return "Ok";
  if (status == CASCADE_INTERNAL) return "Internal";
  if (status >= 1 && status <= CASCADE_IO_ERROR) return error_code_name(static_cast<ErrorCode>(status));
  return "Unknown";
}

void cascade_string_free(char* s) { std::free(s); }

int cascade_model_create(const char* config_path, int task, int64_t seed, cascade_model** out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    require(task == CASCADE_TASK_STT || task == CASCADE_TASK_TTS, "unknown task");
    auto m = std::make_unique<cascade_model>();
    m->config = config_from(config_path);
    ModelConfig mc = m->config.model(static_cast<Task>(task));
    if (seed >= 0) mc.seed = static_cast<uint64_t>(seed);
    m->model = std::make_shared<const SplitModel>(build_split_model(mc));
    *out = m.release();
  });
}

void cascade_model_free(cascade_model* model) { delete model; }

int cascade_model_describe(const cascade_model* model, char** json_out) {
  return guarded([&] {
    require(model && json_out, "model and json_out are required");
    const SplitModel& sm = *model->model;
    uint64_t fp32 = 0, int8 = 0;
    SplitModel qm = sm;
    quantize_edge(qm);
    for (const auto& [name, t] : sm.edge) fp32 += memory_bytes(t);
    for (const auto& [name, t] : *qm.edge_quantized) int8 += memory_bytes(t);
    const uint64_t edge = param_count(sm, Part::Edge), all = param_count(sm, Part::All);
    json j{{"task", task_name(sm.config.task)},
           {"seed", sm.config.seed},
           {"edge_params", edge},
           {"cloud_params", param_count(sm, Part::Cloud)},
           {"total_params", all},
           {"edge_fraction", static_cast<double>(edge) / static_cast<double>(all)},
           {"edge_fp32_bytes", fp32},
           {"edge_int8_bytes", int8}};
    *json_out = dup_string(j.dump(2));
  });
}

void cascade_run_options_init(cascade_run_options* opts) {
  if (!opts) return;
  *opts = cascade_run_options{};
  opts->real_bandwidth_kbs = 0.0;
}

int cascade_run_stt_wav(const cascade_model* model, const char* wav_path, const cascade_run_options* opts,
                        cascade_result** out) {
  Waveform w;
  const int st = guarded([&] {
    require(wav_path != nullptr, "wav_path is required");
    w = read_wav(wav_path);
  });
  return st != CASCADE_OK ? st : run_stt_wave(model, std::move(w), opts, out);
}

int cascade_run_stt_samples(const cascade_model* model, const float* samples, size_t n_samples, uint32_t sample_rate,
                            const cascade_run_options* opts, cascade_result** out) {
  if (!samples && n_samples) return fail(CASCADE_INVALID_ARGUMENT, "samples is NULL");
  Waveform w;
  w.samples.assign(samples, samples + n_samples);
  w.sample_rate = sample_rate;
  return run_stt_wave(model, std::move(w), opts, out);
}

int cascade_run_tts(const cascade_model* model, const char* text, const cascade_run_options* opts,
                    cascade_result** out) {
  return guarded([&] {
    require(model && text && out, "model, text and out are required");
    require(model->model->config.task == Task::TTS, "model is not a TTS model");
    const auto tokens = text_to_tokens(text, model->model->config.vocab_size);
    auto holder = make_link(*model, opts);
    auto res = run_tts(*model->model, tokens, holder.link.get(), pipeline_options(*model, opts));
    auto r = std::make_unique<cascade_result>();
    r->task = Task::TTS;
    r->audio = std::move(res.audio);
    r->trace = res.trace;
    *out = r.release();
  });
}

int cascade_result_escalated(const cascade_result* r) { return r && r->trace.escalated ? 1 : 0; }
int cascade_result_degraded(const cascade_result* r) { return r && r->trace.degraded ? 1 : 0; }

int cascade_result_tokens(const cascade_result* r, const int32_t** tokens, size_t* n_tokens) {
  return guarded([&] {
    require(r && tokens && n_tokens, "arguments are required");
    *tokens = r->tokens.data();
    *n_tokens = r->tokens.size();
  });
}

int cascade_result_write_wav(const cascade_result* r, const char* path) {
  return guarded([&] {
    require(r && path, "arguments are required");
    require(r->task == Task::TTS, "result has no audio");
    write_wav(path, r->audio);
  });
}

int cascade_result_trace_json(const cascade_result* r, char** json_out) {
  return guarded([&] {
    require(r && json_out, "arguments are required");
    json j = trace_json(r->trace);
    if (r->task == Task::STT) j["tokens"] = r->tokens;
    *json_out = dup_string(j.dump(2));
  });
}

void cascade_result_free(cascade_result* r) { delete r; }

int cascade_sweep(const cascade_model* model, const char* wav_path, const char* text, const double* bandwidths_kbs,
                  size_t n_bandwidths, double rtt_s, const char* csv_path, char** csv_out) {
  return guarded([&] {
    require(model != nullptr, "model is required");
    require(bandwidths_kbs || n_bandwidths == 0, "bandwidths is NULL");
    const SplitModel& sm = *model->model;
    SweepInput input;
    if (sm.config.task == Task::STT) {
      input = wav_path ? read_wav(wav_path) : speech_like_wave(1.9, sm.config.sample_rate);
    } else {
      input = text_to_tokens(text ? text : long_tts_text(), sm.config.vocab_size);
    }
    PipelineOptions p;
    p.gate = model->config.gate;
    p.edge_device = model->config.edge_device;
    const auto rows = sweep_bandwidth(sm, input, std::span(bandwidths_kbs, n_bandwidths),
                                      LinkSpec::from_kbs(1.0, rtt_s), p, model->config.cloud_device);
    if (csv_path) emit_sweep_report(rows, sm.config.task, csv_path);
    if (csv_out) *csv_out = dup_string(sweep_csv(rows));
  });
}

int cascade_quantize_report(const char* config_path, char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "json_out is required");
    const AppConfig cfg = config_from(config_path);
    json deployments = json::array();
    for (const DeploymentSpec* d : {&cfg.speecht5, &cfg.whisper}) {
      json j{{"name", d->name},
             {"edge_fp32_mb", d->edge_fp32_bytes / kBytesPerMB},
             {"full_fp32_mb", d->full_fp32_bytes / kBytesPerMB},
             {"edge_fraction_pct", edge_fraction_pct(*d)},
             {"edge_int8_requirement_mb", edge_memory_requirement(*d) / kBytesPerMB},
             {"overall_usage_pct", overall_usage_pct(*d)}};
      if (d->reported_edge_requirement_mb) j["reported_requirement_mb"] = *d->reported_edge_requirement_mb;
      const std::string note = requirement_annotation(*d);
      if (!note.empty()) j["annotation"] = note;
      deployments.push_back(j);
    }
    json models = json::array();
    for (Task t : {Task::STT, Task::TTS}) {
      SplitModel sm = build_split_model(cfg.model(t));
      uint64_t fp32 = 0;
      for (const auto& [name, tensor] : sm.edge) fp32 += memory_bytes(tensor);
      quantize_edge(sm);
      uint64_t int8 = 0;
      double max_err = 0.0, max_bound = 0.0;
      for (const auto& [name, q] : *sm.edge_quantized) {
        int8 += memory_bytes(q);
        const Tensor back = dequantize(q);
        const auto orig = sm.edge.at(name).f32();
        const auto rec = back.f32();
        for (std::size_t i = 0; i < orig.size(); ++i) {
          max_err = std::max(max_err, std::fabs(static_cast<double>(orig[i]) - rec[i]));
        }
        max_bound = std::max(max_bound, static_cast<double>(q.quant()->scale) / 2.0);
      }
      const uint64_t edge = param_count(sm, Part::Edge), all = param_count(sm, Part::All);
      models.push_back(json{{"task", task_name(t)},
                            {"edge_params", edge},
                            {"total_params", all},
                            {"edge_fraction", static_cast<double>(edge) / static_cast<double>(all)},
                            {"edge_fp32_bytes", fp32},
                            {"edge_int8_bytes", int8},
                            {"int8_to_fp32", static_cast<double>(int8) / static_cast<double>(fp32)},
                            {"max_abs_error", max_err},
                            {"max_half_scale", max_bound}});
    }
    *json_out = dup_string(json{{"deployments", deployments}, {"toy_models", models}}.dump(2));
  });
}

void cascade_fleet_options_init(cascade_fleet_options* opts) {
  if (!opts) return;
  *opts = cascade_fleet_options{};
  opts->mem_req_mb = 149.0;
  opts->task = CASCADE_TASK_STT;
}

int cascade_fleet_report(const char* data_path, const char* report_dir, const cascade_fleet_options* opts,
                         char** summary_json) {
  return guarded([&] {
    require(data_path && report_dir, "data_path and report_dir are required");
    cascade_fleet_options o;
    cascade_fleet_options_init(&o);
    if (opts) o = *opts;
    require(o.task == CASCADE_TASK_STT || o.task == CASCADE_TASK_TTS, "unknown task");
    const Fleet fleet = load_fleet(data_path);
    FleetReportOptions fo;
    fo.mem_req_mb = o.mem_req_mb > 0.0 ? o.mem_req_mb : 149.0;
    fo.task = static_cast<Task>(o.task);
    fo.input_length = positive(o.input_length);
    fo.t_max_s = positive(o.t_max_s);
    fo.unweighted = o.unweighted != 0;
    const FleetSummary s = emit_fleet_report(fleet, fo, report_dir);
    if (summary_json) {
      json files = json::array();
      for (const auto& f : s.files) files.push_back(f.string());
      *summary_json = dup_string(json{{"task", task_name(s.task)},
                                      {"weighting", fo.unweighted ? "unweighted" : "market_share"},
                                      {"mem_req_mb", s.mem_req_mb},
                                      {"memory_shortfall_fraction", s.memory_shortfall},
                                      {"share_below_ref_clock", s.share_below_ref_clock},
                                      {"input_length", s.input_length},
                                      {"t_max_s", s.t_max_s},
                                      {"feasibility_fraction", s.feasibility},
                                      {"files", files}}
                                     .dump(2));
    }
  });
}

int cascade_server_start(const char* config_path, const char* listen, int64_t seed, cascade_server** out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    const AppConfig cfg = config_from(config_path);
    ServiceConfig sc;
    sc.server = cfg.server;
    if (listen && *listen) sc.server.listen = listen;
    ModelConfig stt = cfg.stt, tts = cfg.tts;
    if (seed >= 0) stt.seed = tts.seed = static_cast<uint64_t>(seed);
    sc.stt = std::make_shared<const SplitModel>(build_split_model(stt));
    sc.tts = std::make_shared<const SplitModel>(build_split_model(tts));
    sc.device = cfg.cloud_device;
    auto s = std::make_unique<cascade_server>();
    s->server = std::make_unique<CloudServer>(sc);
    s->server->start();
    *out = s.release();
  });
}

int cascade_server_address(const cascade_server* s, char** address_out) {
  return guarded([&] {
    require(s && address_out, "arguments are required");
    *address_out = dup_string(s->server->address());
  });
}

void cascade_server_stop(cascade_server* s) {
  if (s) s->server->stop();
}

void cascade_server_free(cascade_server* s) {
  if (!s) return;
  s->server->stop();
  s->server->wait();
  delete s;
}

}  // extern "C"
