// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace cascade {

// 1 KB = 1024 bytes, 1 MB = 1024 KB.
inline constexpr double kBytesPerKB = 1024.0;
inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

enum class LinkMode { Virtual, Real };
enum class Direction { Uplink, Downlink };

struct LinkSpec {
  double bandwidth = 1024.0 * kBytesPerKB;  // bytes per second
  double rtt = 0.0;                         // seconds
  LinkMode mode = LinkMode::Virtual;

  static LinkSpec from_kbs(double kbs, double rtt_s = 0.0, LinkMode mode = LinkMode::Virtual) {
    return {kbs * kBytesPerKB, rtt_s, mode};
  }
  double bandwidth_kbs() const noexcept { return bandwidth / kBytesPerKB; }

  /// Throws InvalidArgument unless bandwidth > 0 and rtt >= 0.
  void validate() const;
};

/// rtt/2 + bytes/bandwidth.
double transfer_time(uint64_t bytes, const LinkSpec& link);

/// Virtual time advances in ticks of 2^-32 s so that sums of durations are
/// exact in double precision.
inline constexpr double kVirtualTick = 0x1.0p-32;
double to_virtual_ticks(double seconds);

class VirtualClock {
 public:
  double now() const noexcept { return now_; }
  /// Rounds `seconds` to the tick grid, advances, and returns the rounded delta.
  double advance(double seconds);

 private:
  double now_ = 0.0;
};

struct TransferReceipt {
  uint64_t bytes = 0;
  double transfer_time = 0.0;
  Direction direction = Direction::Uplink;
};

struct HandlerResult {
  std::vector<uint8_t> response;
  double compute_s = 0.0;
};

using RequestHandler = std::function<HandlerResult(std::span<const uint8_t>)>;

struct Exchange {
  std::vector<uint8_t> response;
  TransferReceipt uplink;
  TransferReceipt downlink;
  double handler_s = 0.0;
  double elapsed_s = 0.0;
};

class Link {
 public:
  virtual ~Link() = default;
  /// Throws ConnectionFailed, or HandlerError when the peer answered with an
  /// error frame.
  virtual Exchange send_recv(std::span<const uint8_t> request) = 0;
  virtual const LinkSpec& spec() const noexcept = 0;
};

/// In-process channel driven by a virtual clock. Deterministic.
class VirtualLink final : public Link {
 public:
  VirtualLink(LinkSpec spec, RequestHandler handler);

  Exchange send_recv(std::span<const uint8_t> request) override;
  const LinkSpec& spec() const noexcept override { return spec_; }
  const VirtualClock& clock() const noexcept { return clock_; }

 private:
  LinkSpec spec_;
  RequestHandler handler_;
  VirtualClock clock_;
};

/// Token bucket with capacity bandwidth * 50 ms.
class TokenBucket {
 public:
  explicit TokenBucket(double bytes_per_second);

  double capacity() const noexcept { return capacity_; }
  /// Blocks until `n` (<= capacity) tokens are available, then takes them.
  void acquire(std::size_t n);

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

/// Length-prefixed (u32 LE) frames over TCP, throttled in both directions on
/// the client side.
class SocketLink final : public Link {
 public:
  /// Connects to "host:port"; throws ConnectionFailed.
  SocketLink(LinkSpec spec, const std::string& address);
  ~SocketLink() override;
  SocketLink(const SocketLink&) = delete;
  SocketLink& operator=(const SocketLink&) = delete;

  Exchange send_recv(std::span<const uint8_t> request) override;
  const LinkSpec& spec() const noexcept override { return spec_; }

 private:
  LinkSpec spec_;
  int fd_ = -1;
  TokenBucket up_;
  TokenBucket down_;
};

struct ServerOptions {
  std::string listen = "127.0.0.1:0";
  uint32_t max_payload_bytes = 16u << 20;
};

/// Accepts concurrent connections and answers each length-prefixed request
/// with the handler's response. Oversized requests are drained and answered
/// with `oversize_reply()`; the connection stays open.
class FrameServer {
 public:
  FrameServer(RequestHandler handler, ServerOptions options,
              std::function<std::vector<uint8_t>()> oversize_reply);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  /// Binds and starts accepting; throws BindFailed.
  void start();
  uint16_t port() const noexcept { return port_; }
  std::string address() const;
  /// Stops accepting; idle connections close, in-flight requests finish.
  void stop();
  void wait();
  bool running() const noexcept { return running_.load(); }

 private:
  struct Connection {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void accept_loop();
  void serve_connection(int fd, std::shared_ptr<std::atomic<bool>> done);
  void reap(bool all);

  RequestHandler handler_;
  ServerOptions options_;
  std::function<std::vector<uint8_t>()> oversize_reply_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::string host_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::vector<Connection> connections_;
};

}  // namespace cascade
