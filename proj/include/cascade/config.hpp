// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cascade/costmodel.hpp"
#include "cascade/gating.hpp"
#include "cascade/model.hpp"
#include "cascade/netsim.hpp"

namespace cascade {

/// Everything the CLI and service read from a config file.
///
/// Format: one `key = value` per line, `#` starts a comment. Keys are
/// prefixed by section: `stt.` / `tts.` (ModelConfig fields), `gate.`,
/// `device.`, `cost.`, `service.`. A bare `seed` sets both model seeds.
/// Timing points are written `length:seconds, length:seconds`.
struct AppConfig {
  ModelConfig stt = ModelConfig::bundled_stt();
  ModelConfig tts = ModelConfig::bundled_tts();
  GateConfig gate;
  ComputeDevice edge_device = ComputeDevice::reference_edge();
  ComputeDevice cloud_device = ComputeDevice::reference_cloud();
  DeploymentSpec speecht5 = DeploymentSpec::speecht5();
  DeploymentSpec whisper = DeploymentSpec::whisper();
  ReferenceTimings timings;
  ServerOptions server;

  const ModelConfig& model(Task task) const { return task == Task::STT ? stt : tts; }
  ModelConfig& model(Task task) { return task == Task::STT ? stt : tts; }

  /// Throws InvalidConfig from the first invalid section.
  void validate() const;
};

/// Throws ParseError (line number and key) for malformed lines, unknown keys
/// or bad values; InvalidConfig when the result fails validation.
AppConfig parse_config(std::string_view text, const std::string& source = "<memory>");
/// Throws FileNotFound.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace cascade
