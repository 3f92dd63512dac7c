// SPDX-License-Identifier: Apache-2.0
#include "cascade/netsim.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "cascade/error.hpp"
#include "cascade/wire.hpp"

namespace cascade {

void LinkSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::InvalidArgument, "link bandwidth must be positive");
  }
  if (!(rtt >= 0.0) || !std::isfinite(rtt)) {
    throw Error(ErrorCode::InvalidArgument, "link rtt must be non-negative");
  }
}

double transfer_time(uint64_t bytes, const LinkSpec& link) {
  return link.rtt / 2.0 + static_cast<double>(bytes) / link.bandwidth;
}

double to_virtual_ticks(double seconds) {
  return std::round(seconds / kVirtualTick) * kVirtualTick;
}

double VirtualClock::advance(double seconds) {
  const double delta = to_virtual_ticks(seconds);
  now_ += delta;
  return delta;
}

namespace {

// Throws HandlerError if `frame` is a well-formed error frame.
void raise_if_error_frame(const std::vector<uint8_t>& frame) {
  if (frame.size() > 6 && frame[6] == static_cast<uint8_t>(FrameKind::Error)) {
    DecodedFrame decoded;
    try {
      decoded = decode_frame(frame);
    } catch (const Error&) {
      return;
    }
    throw HandlerError(error_frame_code(decoded), frame);
  }
}

}  // namespace

VirtualLink::VirtualLink(LinkSpec spec, RequestHandler handler)
    : spec_(spec), handler_(std::move(handler)) {
  spec_.validate();
}

Exchange VirtualLink::send_recv(std::span<const uint8_t> request) {
  Exchange ex;
  ex.uplink = {request.size(), to_virtual_ticks(transfer_time(request.size(), spec_)), Direction::Uplink};
  HandlerResult r = handler_(request);
  ex.handler_s = to_virtual_ticks(r.compute_s);
  ex.downlink = {r.response.size(), to_virtual_ticks(transfer_time(r.response.size(), spec_)),
                 Direction::Downlink};
  const double before = clock_.now();
  clock_.advance(ex.uplink.transfer_time);
  clock_.advance(ex.handler_s);
  clock_.advance(ex.downlink.transfer_time);
  ex.elapsed_s = clock_.now() - before;
  ex.response = std::move(r.response);
  raise_if_error_frame(ex.response);
  return ex;
}

TokenBucket::TokenBucket(double bytes_per_second)
    : rate_(bytes_per_second),
      capacity_(std::max(1.0, bytes_per_second * 0.050)),
      tokens_(capacity_),
      last_(Clock::now()) {}

void TokenBucket::acquire(std::size_t n) {
  const double need = std::min<double>(static_cast<double>(n), capacity_);
  for (;;) {
    const auto now = Clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= need) {
      tokens_ -= need;
      return;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>((need - tokens_) / rate_));
  }
}

namespace {

struct HostPort {
  std::string host;
  std::string port;
};

HostPort split_address(const std::string& address, ErrorCode code) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw Error(code, "address '" + address + "' is not host:port");
  }
  HostPort hp{address.substr(0, colon), address.substr(colon + 1)};
  if (hp.host.empty()) hp.host = "0.0.0.0";
  return hp;
}

void write_all(int fd, const uint8_t* data, std::size_t n, TokenBucket* bucket) {
  while (n > 0) {
    std::size_t chunk = n;
    if (bucket) {
      chunk = std::min<std::size_t>(n, static_cast<std::size_t>(bucket->capacity()));
      bucket->acquire(chunk);
    }
    std::size_t sent = 0;
    while (sent < chunk) {
      const ssize_t w = ::send(fd, data + sent, chunk - sent, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::ConnectionFailed, std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(w);
    }
    data += chunk;
    n -= chunk;
  }
}

// Returns false on orderly EOF before the first byte.
bool read_all(int fd, uint8_t* data, std::size_t n, TokenBucket* bucket) {
  std::size_t got = 0;
  while (got < n) {
    std::size_t want = n - got;
    if (bucket) {
      want = std::min<std::size_t>(want, static_cast<std::size_t>(bucket->capacity()));
      bucket->acquire(want);
    }
    std::size_t chunk_got = 0;
    while (chunk_got < want) {
      const ssize_t r = ::recv(fd, data + got + chunk_got, want - chunk_got, 0);
      if (r == 0) {
        if (got + chunk_got == 0) return false;
        throw Error(ErrorCode::ConnectionFailed, "connection closed mid-frame");
      }
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::ConnectionFailed, std::string("recv failed: ") + std::strerror(errno));
      }
      chunk_got += static_cast<std::size_t>(r);
    }
    got += chunk_got;
  }
  return true;
}

void put_length(uint8_t* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint32_t get_length(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

void set_timeouts(int fd, int seconds) {
  timeval tv{seconds, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void sleep_seconds(double s) {
  if (s > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

}  // namespace

SocketLink::SocketLink(LinkSpec spec, const std::string& address)
    : spec_(spec), up_(spec.bandwidth), down_(spec.bandwidth) {
  spec_.validate();
  const auto hp = split_address(address, ErrorCode::ConnectionFailed);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(hp.host.c_str(), hp.port.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::ConnectionFailed, "cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  for (addrinfo* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
    } else {
      ::close(fd);
    }
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw Error(ErrorCode::ConnectionFailed, "cannot connect to " + address);
  set_timeouts(fd_, 60);
}

SocketLink::~SocketLink() {
  if (fd_ >= 0) ::close(fd_);
}

Exchange SocketLink::send_recv(std::span<const uint8_t> request) {
  using Clock = std::chrono::steady_clock;
  auto secs = [](Clock::duration d) { return std::chrono::duration<double>(d).count(); };
  Exchange ex;

  const auto t0 = Clock::now();
  sleep_seconds(spec_.rtt / 2.0);
  uint8_t prefix[4];
  put_length(prefix, static_cast<uint32_t>(request.size()));
  write_all(fd_, prefix, 4, &up_);
  write_all(fd_, request.data(), request.size(), &up_);
  const auto t1 = Clock::now();

  if (!read_all(fd_, prefix, 4, nullptr)) {
    throw Error(ErrorCode::ConnectionFailed, "server closed the connection");
  }
  const auto t2 = Clock::now();
  const uint32_t len = get_length(prefix);
  ex.response.resize(len);
  sleep_seconds(spec_.rtt / 2.0);
  read_all(fd_, ex.response.data(), len, &down_);
  const auto t3 = Clock::now();

  ex.uplink = {request.size(), secs(t1 - t0), Direction::Uplink};
  ex.handler_s = secs(t2 - t1);
  ex.downlink = {ex.response.size(), secs(t3 - t2), Direction::Downlink};
  ex.elapsed_s = secs(t3 - t0);
  raise_if_error_frame(ex.response);
  return ex;
}

FrameServer::FrameServer(RequestHandler handler, ServerOptions options,
                         std::function<std::vector<uint8_t>()> oversize_reply)
    : handler_(std::move(handler)),
      options_(std::move(options)),
      oversize_reply_(std::move(oversize_reply)) {}

FrameServer::~FrameServer() {
  stop();
  wait();
}

void FrameServer::start() {
  const auto hp = split_address(options_.listen, ErrorCode::BindFailed);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(hp.host.c_str(), hp.port.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::BindFailed, "cannot resolve " + options_.listen + ": " + ::gai_strerror(rc));
  }
  std::string last_err = "no usable address";
  for (addrinfo* ai = res; ai && listen_fd_ < 0; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
    } else {
      last_err = std::strerror(errno);
      ::close(fd);
    }
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw Error(ErrorCode::BindFailed, "cannot bind " + options_.listen + ": " + last_err);

  sockaddr_storage ss{};
  socklen_t sl = sizeof(ss);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&ss), &sl);
  port_ = ntohs(ss.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port
                                         : reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  host_ = hp.host;
  stopping_ = false;
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

std::string FrameServer::address() const { return host_ + ":" + std::to_string(port_); }

void FrameServer::stop() { stopping_ = true; }

void FrameServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
  reap(true);
  running_ = false;
}

void FrameServer::reap(bool all) {
  std::vector<Connection> finished;
  {
    std::lock_guard lock(conn_mu_);
    auto keep = std::partition(connections_.begin(), connections_.end(),
                               [&](const Connection& c) { return !all && !c.done->load(); });
    std::move(keep, connections_.end(), std::back_inserter(finished));
    connections_.erase(keep, connections_.end());
  }
  for (auto& c : finished) c.thread.join();
}

void FrameServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    reap(false);
    if (rc <= 0 || !(pfd.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    set_timeouts(fd, 30);
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(conn_mu_);
    connections_.push_back({std::thread([this, fd, done] { serve_connection(fd, done); }), done});
  }
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void FrameServer::serve_connection(int fd, std::shared_ptr<std::atomic<bool>> done) {
  try {
    while (!stopping_) {
      pollfd pfd{fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, 100);
      if (rc == 0) continue;
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) break;
      uint8_t prefix[4];
      if (!read_all(fd, prefix, 4, nullptr)) break;
      const uint32_t len = get_length(prefix);
      std::vector<uint8_t> response;
      if (len > options_.max_payload_bytes) {
        std::vector<uint8_t> sink(64 * 1024);
        for (uint32_t left = len; left > 0;) {
          const uint32_t n = std::min<uint32_t>(left, static_cast<uint32_t>(sink.size()));
          read_all(fd, sink.data(), n, nullptr);
          left -= n;
        }
        response = oversize_reply_();
      } else {
        std::vector<uint8_t> request(len);
        read_all(fd, request.data(), len, nullptr);
        response = handler_(request).response;
      }
      put_length(prefix, static_cast<uint32_t>(response.size()));
      write_all(fd, prefix, 4, nullptr);
      write_all(fd, response.data(), response.size(), nullptr);
    }
  } catch (const std::exception&) {
    // Peer went away or timed out; drop the connection.
  }
  ::close(fd);
  done->store(true);
}

}  // namespace cascade
