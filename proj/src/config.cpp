// SPDX-License-Identifier: Apache-2.0
#include "cascade/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cascade/error.hpp"
#include "cascade/wire.hpp"

namespace cascade {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct BadValue {
  std::string what;
};

template <typename T>
T parse_number(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw BadValue{"not a number"};
  return out;
}

std::vector<TimingPoint> parse_points(std::string_view v) {
  std::vector<TimingPoint> pts;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw BadValue{"expected length:seconds"};
    pts.push_back({parse_number<double>(trim(item.substr(0, colon))),
                   parse_number<double>(trim(item.substr(colon + 1)))});
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return pts;
}

using Setter = std::function<void(AppConfig&, std::string_view)>;

template <typename T, typename Obj>
Setter num(Obj AppConfig::*section, T Obj::*field) {
  return [=](AppConfig& c, std::string_view v) { (c.*section).*field = parse_number<T>(v); };
}

void add_model_keys(std::map<std::string, Setter>& keys, const std::string& prefix,
                    ModelConfig AppConfig::*m) {
  keys[prefix + "d_model"] = num(m, &ModelConfig::d_model);
  keys[prefix + "n_heads"] = num(m, &ModelConfig::n_heads);
  keys[prefix + "n_enc_layers_full"] = num(m, &ModelConfig::n_enc_layers_full);
  keys[prefix + "n_enc_layers_edge"] = num(m, &ModelConfig::n_enc_layers_edge);
  keys[prefix + "n_dec_layers"] = num(m, &ModelConfig::n_dec_layers);
  keys[prefix + "vocab_size"] = num(m, &ModelConfig::vocab_size);
  keys[prefix + "n_mel"] = num(m, &ModelConfig::n_mel);
  keys[prefix + "max_src_len"] = num(m, &ModelConfig::max_src_len);
  keys[prefix + "max_tgt_len"] = num(m, &ModelConfig::max_tgt_len);
  keys[prefix + "enc_fixed_len"] = num(m, &ModelConfig::enc_fixed_len);
  keys[prefix + "seed"] = num(m, &ModelConfig::seed);
  keys[prefix + "sample_rate"] = num(m, &ModelConfig::sample_rate);
  keys[prefix + "n_fft"] = num(m, &ModelConfig::n_fft);
  keys[prefix + "hop_length"] = num(m, &ModelConfig::hop_length);
  keys[prefix + "ffn_dim"] = num(m, &ModelConfig::ffn_dim);
  keys[prefix + "min_frames_per_token"] = num(m, &ModelConfig::min_frames_per_token);
}

void add_deployment_keys(std::map<std::string, Setter>& keys, const std::string& prefix,
                         DeploymentSpec AppConfig::*d) {
  keys[prefix + "edge_mb"] = [=](AppConfig& c, std::string_view v) {
    (c.*d).edge_fp32_bytes = parse_number<double>(v) * kBytesPerMB;
  };
  keys[prefix + "full_mb"] = [=](AppConfig& c, std::string_view v) {
    (c.*d).full_fp32_bytes = parse_number<double>(v) * kBytesPerMB;
  };
  keys[prefix + "reported_requirement_mb"] = [=](AppConfig& c, std::string_view v) {
    (c.*d).reported_edge_requirement_mb = parse_number<double>(v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> k;
    add_model_keys(k, "stt.", &AppConfig::stt);
    add_model_keys(k, "tts.", &AppConfig::tts);
    k["seed"] = [](AppConfig& c, std::string_view v) { c.stt.seed = c.tts.seed = parse_number<uint64_t>(v); };
    k["gate.stt_threshold"] = num(&AppConfig::gate, &GateConfig::stt_threshold);
    k["gate.tts_threshold"] = num(&AppConfig::gate, &GateConfig::tts_threshold);
    k["device.edge_clock_ghz"] = num(&AppConfig::edge_device, &ComputeDevice::clock_ghz);
    k["device.edge_macs_per_cycle"] = num(&AppConfig::edge_device, &ComputeDevice::macs_per_cycle);
    k["device.cloud_clock_ghz"] = num(&AppConfig::cloud_device, &ComputeDevice::clock_ghz);
    k["device.cloud_macs_per_cycle"] = num(&AppConfig::cloud_device, &ComputeDevice::macs_per_cycle);
    add_deployment_keys(k, "cost.speecht5.", &AppConfig::speecht5);
    add_deployment_keys(k, "cost.whisper.", &AppConfig::whisper);
    k["cost.ref_clock_ghz"] = num(&AppConfig::timings, &ReferenceTimings::ref_clock_ghz);
    k["cost.tts_points"] = [](AppConfig& c, std::string_view v) { c.timings.tts = parse_points(v); };
    k["cost.stt_points"] = [](AppConfig& c, std::string_view v) { c.timings.stt = parse_points(v); };
    k["service.listen"] = [](AppConfig& c, std::string_view v) {
      if (v.empty()) throw BadValue{"empty address"};
      c.server.listen = std::string(v);
    };
    k["service.max_payload_bytes"] = num(&AppConfig::server, &ServerOptions::max_payload_bytes);
    return k;
  }();
  return keys;
}

}  // namespace

void AppConfig::validate() const {
  stt.validate();
  tts.validate();
  if (stt.task != Task::STT || tts.task != Task::TTS) {
    throw Error(ErrorCode::InvalidConfig, "model sections have the wrong task");
  }
  gate.validate();
  edge_device.validate();
  cloud_device.validate();
  try {
    speecht5.validate();
    whisper.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  timings.validate();
  // The service must accept the largest features frame either task can send.
  const uint64_t need = std::max(predicted_frame_length(2, DType::FP32, uint64_t(stt.enc_fixed_len) * stt.d_model),
                                 predicted_frame_length(2, DType::FP32, uint64_t(tts.max_src_len) * tts.d_model));
  if (server.max_payload_bytes < need) {
    throw Error(ErrorCode::InvalidConfig, "service.max_payload_bytes " + std::to_string(server.max_payload_bytes) +
                                              " is below the largest features frame (" + std::to_string(need) +
                                              " bytes)");
  }
}

AppConfig parse_config(std::string_view text, const std::string& source) {
  AppConfig cfg;
  const auto& keys = setters();
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw Error(ErrorCode::ParseError, where + ": unknown key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const BadValue& bad) {
      throw Error(ErrorCode::ParseError, where + ": " + key + ": " + bad.what);
    }
  }
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace cascade
