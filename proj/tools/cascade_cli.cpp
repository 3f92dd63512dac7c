// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library only through the C API.
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cascade/cascade.h"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Globals {
  std::string config;
  int64_t seed = -1;
  std::string cloud_addr;
  double virtual_kbs = 0.0;
  double real_kbs = 0.0;
  double rtt_s = 0.0;
  bool force_escalate = false;
  std::optional<double> stt_threshold;
  std::optional<double> tts_threshold;
  std::string out;
};

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report(int status) {
  if (status != CASCADE_OK) {
    std::fprintf(stderr, "error: %s: %s\n", cascade_status_name(status), cascade_last_error());
  }
  return status;
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  cascade_string_free(s);
  return out;
}

int emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return 0;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    return CASCADE_IO_ERROR;
  }
  return 0;
}

cascade_run_options run_options(const Globals& g) {
  cascade_run_options o;
  cascade_run_options_init(&o);
  o.cloud_addr = or_null(g.cloud_addr);
  o.virtual_bandwidth_kbs = g.virtual_kbs;
  o.real_bandwidth_kbs = g.real_kbs;
  o.rtt_s = g.rtt_s;
  o.force_escalate = g.force_escalate ? 1 : 0;
  o.has_stt_threshold = g.stt_threshold.has_value();
  o.stt_threshold = g.stt_threshold.value_or(0.0);
  o.has_tts_threshold = g.tts_threshold.has_value();
  o.tts_threshold = g.tts_threshold.value_or(0.0);
  return o;
}

class Model {
 public:
  Model(const Globals& g, int task) { status_ = report(cascade_model_create(or_null(g.config), task, g.seed, &m_)); }
  ~Model() { cascade_model_free(m_); }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  int status() const { return status_; }
  const cascade_model* get() const { return m_; }

 private:
  cascade_model* m_ = nullptr;
  int status_ = 0;
};

int finish_run(int status, cascade_result* r, const Globals& g, const std::string& wav_out) {
  if (report(status) != CASCADE_OK) return status;
  int rc = 0;
  if (!wav_out.empty()) rc = report(cascade_result_write_wav(r, wav_out.c_str()));
  char* json = nullptr;
  if (rc == 0) rc = report(cascade_result_trace_json(r, &json));
  if (rc == 0) rc = emit(take(json), g.out);
  if (rc == 0 && cascade_result_degraded(r)) std::fprintf(stderr, "warning: cloud unreachable, edge result kept\n");
  cascade_result_free(r);
  return rc;
}

int cmd_stt(const Globals& g, const std::string& in) {
  Model m(g, CASCADE_TASK_STT);
  if (m.status()) return m.status();
  const auto opts = run_options(g);
  cascade_result* r = nullptr;
  const int st = cascade_run_stt_wav(m.get(), in.c_str(), &opts, &r);
  return finish_run(st, r, g, "");
}

int cmd_tts(const Globals& g, const std::string& text, const std::string& wav_out) {
  Model m(g, CASCADE_TASK_TTS);
  if (m.status()) return m.status();
  const auto opts = run_options(g);
  cascade_result* r = nullptr;
  const int st = cascade_run_tts(m.get(), text.c_str(), &opts, &r);
  return finish_run(st, r, g, wav_out);
}

int cmd_serve(const Globals& g, const std::string& listen) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  cascade_server* s = nullptr;
  if (int st = report(cascade_server_start(or_null(g.config), or_null(listen), g.seed, &s))) return st;
  char* addr = nullptr;
  if (cascade_server_address(s, &addr) == CASCADE_OK) {
    std::cout << "listening on " << take(addr) << std::endl;
  }
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  cascade_server_free(s);
  std::cout << "stopped" << std::endl;
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& task, std::vector<double> kbs, const std::string& in,
              const std::optional<std::string>& text) {
  const int t = task == "stt" ? CASCADE_TASK_STT : CASCADE_TASK_TTS;
  Model m(g, t);
  if (m.status()) return m.status();
  char* csv = nullptr;
  const int st = report(cascade_sweep(m.get(), or_null(in), text ? text->c_str() : nullptr, kbs.data(), kbs.size(),
                                      g.rtt_s, or_null(g.out), &csv));
  if (st) return st;
  std::cout << take(csv);
  return 0;
}

int cmd_quantize(const Globals& g) {
  char* json = nullptr;
  if (int st = report(cascade_quantize_report(or_null(g.config), &json))) return st;
  return emit(take(json), g.out);
}

int cmd_fleet(const Globals& g, const std::string& data, const std::string& dir, const cascade_fleet_options& o) {
  char* json = nullptr;
  if (int st = report(cascade_fleet_report(data.c_str(), dir.c_str(), &o, &json))) return st;
  return emit(take(json), g.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded edge/cloud speech inference"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "model seed override")->check(CLI::NonNegativeNumber);
  app.add_option("--cloud-addr", g.cloud_addr, "host:port of a running service");
  app.add_option("--virtual-bandwidth-kbs", g.virtual_kbs, "in-process virtual link bandwidth")
      ->check(CLI::PositiveNumber);
  app.add_option("--bandwidth-kbs", g.real_kbs, "throttle for --cloud-addr, KB/s")->check(CLI::PositiveNumber);
  app.add_option("--rtt", g.rtt_s, "round-trip time, seconds")->check(CLI::NonNegativeNumber);
  app.add_flag("--force-escalate", g.force_escalate, "escalate regardless of the gate");
  app.add_option("--stt-threshold", g.stt_threshold, "mean log-probability gate, nats");
  app.add_option("--tts-threshold", g.tts_threshold, "SNR gate, dB");
  app.add_option("--out", g.out, "output file");

  std::string in_wav;
  auto* stt = app.add_subcommand("stt", "transcribe a WAV file");
  stt->add_option("--in", in_wav, "16-bit mono WAV")->required()->check(CLI::ExistingFile);

  std::string text, wav_out;
  auto* tts = app.add_subcommand("tts", "synthesize text");
  tts->add_option("--text", text, "ASCII text")->required();
  tts->add_option("--wav", wav_out, "write the synthesized audio here");

  std::string listen;
  auto* serve = app.add_subcommand("serve", "run the cloud encoder service");
  serve->add_option("--listen", listen, "host:port (default from config)");

  std::string sweep_task = "tts", sweep_in;
  std::optional<std::string> sweep_text;
  std::vector<double> bandwidths{64, 128, 256, 512, 1024, 2048, 4096};
  auto* sweep = app.add_subcommand("sweep", "forced-escalation bandwidth sweep");
  sweep->add_option("--task", sweep_task)->check(CLI::IsMember({"stt", "tts"}));
  sweep->add_option("--bandwidths", bandwidths, "KB/s list")->delimiter(',')->check(CLI::PositiveNumber);
  sweep->add_option("--in", sweep_in, "STT input WAV (default: 1.9 s fixture)")->check(CLI::ExistingFile);
  sweep->add_option("--text", sweep_text, "TTS input (default: 270-character fixture)");

  auto* quantize = app.add_subcommand("quantize", "INT8 memory report");

  std::string fleet_data, report_dir, fleet_task = "stt";
  cascade_fleet_options fo;
  cascade_fleet_options_init(&fo);
  bool unweighted = false;
  auto* fleet = app.add_subcommand("fleet", "device fleet analysis");
  fleet->add_option("--data", fleet_data, "model,share,memory_mb,cpu_ghz CSV")->required();
  fleet->add_option("--report-dir", report_dir)->required();
  fleet->add_option("--mem-req", fo.mem_req_mb, "required memory, MB")->check(CLI::NonNegativeNumber);
  fleet->add_option("--task", fleet_task)->check(CLI::IsMember({"stt", "tts"}));
  fleet->add_option("--t-max", fo.t_max_s, "CPU time budget, seconds")->check(CLI::PositiveNumber);
  fleet->add_option("--input-length", fo.input_length, "characters (tts) or audio seconds (stt)")
      ->check(CLI::PositiveNumber);
  fleet->add_flag("--unweighted", unweighted, "weight every device equally");

  CLI11_PARSE(app, argc, argv);

  if (*stt) return cmd_stt(g, in_wav);
  if (*tts) return cmd_tts(g, text, wav_out);
  if (*serve) return cmd_serve(g, listen);
  if (*sweep) return cmd_sweep(g, sweep_task, bandwidths, sweep_in, sweep_text);
  if (*quantize) return cmd_quantize(g);
  if (*fleet) {
    fo.task = fleet_task == "tts" ? CASCADE_TASK_TTS : CASCADE_TASK_STT;
    fo.unweighted = unweighted ? 1 : 0;
    return cmd_fleet(g, fleet_data, report_dir, fo);
  }
  return 0;
}
