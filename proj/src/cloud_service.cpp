// SPDX-License-Identifier: Apache-2.0
#include "cascade/cloud_service.hpp"

#include <chrono>
#include <thread>

namespace cascade {

uint64_t ServiceConfig::largest_features_frame() const {
  uint64_t largest = 0;
  for (const auto* m : {stt.get(), tts.get()}) {
    if (!m) continue;
    const auto& c = m->config;
    const uint64_t rows = c.task == Task::STT ? c.enc_fixed_len : c.max_src_len;
    largest = std::max(largest, predicted_frame_length(2, DType::FP32, rows * c.d_model));
  }
  return largest;
}

void ServiceConfig::validate() const {
  if (!stt && !tts) throw Error(ErrorCode::InvalidConfig, "service needs at least one model");
  if (stt && stt->config.task != Task::STT) throw Error(ErrorCode::InvalidConfig, "stt slot holds a TTS model");
  if (tts && tts->config.task != Task::TTS) throw Error(ErrorCode::InvalidConfig, "tts slot holds an STT model");
  if (server.max_payload_bytes < largest_features_frame()) {
    throw Error(ErrorCode::InvalidConfig, "max_payload_bytes " + std::to_string(server.max_payload_bytes) +
                                              " is below the largest features frame (" +
                                              std::to_string(largest_features_frame()) + " bytes)");
  }
  device.validate();
}

CloudService::CloudService(ServiceConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {

ServiceError classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedVersion: return ServiceError::Version;
    case ErrorCode::ShapeMismatch: return ServiceError::Shape;
    default: return ServiceError::Malformed;
  }
}

Task task_hint(std::span<const uint8_t> frame) {
  return frame.size() > 5 && frame[5] == static_cast<uint8_t>(Task::TTS) ? Task::TTS : Task::STT;
}

}  // namespace

HandlerResult CloudService::handle_timed(std::span<const uint8_t> frame) const {
  const Task hint = task_hint(frame);
  if (frame.size() > cfg_.server.max_payload_bytes) {
    return {encode_error_frame(hint, ServiceError::TooLarge), 0.0};
  }
  DecodedFrame req;
  try {
    req = decode_frame(frame);
  } catch (const Error& e) {
    return {encode_error_frame(hint, classify(e.code())), 0.0};
  }
  if (req.kind != FrameKind::Features) {
    return {encode_error_frame(req.task, ServiceError::Malformed), 0.0};
  }
  const SplitModel* model = req.task == Task::STT ? cfg_.stt.get() : cfg_.tts.get();
  if (!model) return {encode_error_frame(req.task, ServiceError::Shape), 0.0};
  try {
    const Tensor features = req.tensor.dtype() == DType::INT8 ? dequantize(req.tensor) : req.tensor;
    OpCounter ops;
    const HiddenStates hidden = encoder_forward(*model, features, EncoderBranch::Cloud, &ops);
    return {encode_frame(req.task, FrameKind::HiddenStates, hidden.states), cfg_.device.seconds_for(ops.macs)};
  } catch (const Error& e) {
    return {encode_error_frame(req.task, classify(e.code())), 0.0};
  }
}

std::vector<uint8_t> CloudService::handle_request(std::span<const uint8_t> frame) const {
  return handle_timed(frame).response;
}

CloudServer::CloudServer(ServiceConfig cfg)
    : service_(std::make_shared<const CloudService>(std::move(cfg))),
      server_([svc = service_](std::span<const uint8_t> f) { return svc->handle_timed(f); },
              service_->config().server,
              [] { return encode_error_frame(Task::STT, ServiceError::TooLarge); }) {}

void CloudServer::start() { server_.start(); }

void serve(ServiceConfig cfg, const std::atomic<bool>& shutdown) {
  CloudServer server(std::move(cfg));
  server.start();
  while (!shutdown.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  server.wait();
}

}  // namespace cascade
