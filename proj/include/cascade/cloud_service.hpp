// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <vector>

#include "cascade/costmodel.hpp"
#include "cascade/model.hpp"
#include "cascade/netsim.hpp"
#include "cascade/wire.hpp"

namespace cascade {

struct ServiceConfig {
  ServerOptions server;
  std::shared_ptr<const SplitModel> stt;
  std::shared_ptr<const SplitModel> tts;
  ComputeDevice device = ComputeDevice::reference_cloud();

  /// Largest features frame either configured task can legally send.
  uint64_t largest_features_frame() const;
  /// Throws InvalidConfig.
  void validate() const;
};

/// Stateless full-encoder service: features frame in, hidden-states frame out.
class CloudService {
 public:
  explicit CloudService(ServiceConfig cfg);

  /// Never throws for bad input; failures become kind=3 error frames.
  std::vector<uint8_t> handle_request(std::span<const uint8_t> frame) const;
  /// As handle_request, plus encoder compute time on the configured device.
  HandlerResult handle_timed(std::span<const uint8_t> frame) const;

  const ServiceConfig& config() const noexcept { return cfg_; }

 private:
  ServiceConfig cfg_;
};

/// CloudService behind a FrameServer.
class CloudServer {
 public:
  explicit CloudServer(ServiceConfig cfg);

  void start();
  uint16_t port() const noexcept { return server_.port(); }
  std::string address() const { return server_.address(); }
  void stop() { server_.stop(); }
  void wait() { server_.wait(); }

 private:
  std::shared_ptr<const CloudService> service_;
  FrameServer server_;
};

/// Blocks until `shutdown` becomes true, then drains in-flight requests.
void serve(ServiceConfig cfg, const std::atomic<bool>& shutdown);

}  // namespace cascade
