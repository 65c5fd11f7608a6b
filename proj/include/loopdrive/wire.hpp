// Copyright 2026 The loopdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"
#include "loopdrive/planner.hpp"

namespace loopdrive::wire {

inline constexpr int kProtocolVersion = 1;

class HandshakeVersionMismatch : public std::runtime_error {
 public:
  HandshakeVersionMismatch(int expected, int got)
      : std::runtime_error("protocol version mismatch: expected " + std::to_string(expected) + ", got " +
                           std::to_string(got)),
        expected(expected),
        got(got) {}
  int expected;
  int got;
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Session parameters announced by the harness when a client connects.
struct Handshake {
  int protocol_version = kProtocolVersion;
  double dt = 0.1;
  double waypoint_spacing = 0.5;
  bool attention_prefix = true;
};

inline nlohmann::json to_json(const Handshake& h) {
  return {{"type", "handshake"},
          {"protocol_version", h.protocol_version},
          {"dt", h.dt},
          {"waypoint_spacing", h.waypoint_spacing},
          {"attention_prefix", h.attention_prefix}};
}

inline Handshake handshake_from_json(const nlohmann::json& j) {
  return {j.at("protocol_version").get<int>(), j.value("dt", 0.1), j.value("waypoint_spacing", 0.5),
          j.value("attention_prefix", true)};
}

/// "tcp://host:port" (port 0 picks a free port) or "unix:///path".
struct Endpoint {
  enum class Kind { tcp, unix_socket } kind = Kind::tcp;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string path;

  static Endpoint parse(std::string_view s) {
    Endpoint e;
    if (s.rfind("unix://", 0) == 0) {
      e.kind = Kind::unix_socket;
      e.path = std::string(s.substr(7));
      if (e.path.empty()) throw std::invalid_argument("unix endpoint needs a path");
      return e;
    }
    const std::string text(s);
    if (s.rfind("tcp://", 0) == 0) s.remove_prefix(6);
    else if (s.find("://") != std::string_view::npos) throw std::invalid_argument("unsupported endpoint '" + text + "'");
    const auto colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw std::invalid_argument("endpoint '" + text + "' needs host:port");
    }
    e.host = std::string(s.substr(0, colon));
    const auto port = s.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), e.port);
    if (ec != std::errc{} || ptr != port.data() + port.size() || e.port < 0 || e.port > 65535) {
      throw std::invalid_argument("endpoint '" + text + "' has a bad port");
    }
    return e;
  }

  std::string str() const {
    return kind == Kind::unix_socket ? "unix://" + path : "tcp://" + host + ":" + std::to_string(port);
  }
};

/// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Newline-delimited UTF-8 records over a stream socket.
class LineChannel {
 public:
  LineChannel() = default;
  explicit LineChannel(Fd fd) : fd_(std::move(fd)) {}

  bool open() const { return fd_.valid(); }
  void close() { fd_.reset(); }

  void send(const nlohmann::json& record) { send_line(record.dump()); }

  void send_line(std::string_view line) {
    std::string buf(line);
    buf += '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd_.get(), buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PlannerDisconnected(std::string("send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  /// Next line, waiting at most `timeout_ms` (negative waits forever).
  /// nullopt on timeout; throws PlannerDisconnected on EOF.
  std::optional<std::string> recv_line(int timeout_ms) {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::milliseconds(timeout_ms < 0 ? 0 : timeout_ms);
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      int wait = -1;
      if (timeout_ms >= 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
        if (left <= 0) return std::nullopt;
        wait = static_cast<int>(left);
      }
      pollfd p{fd_.get(), POLLIN, 0};
      const int r = ::poll(&p, 1, wait);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw PlannerDisconnected(std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::recv(fd_.get(), chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PlannerDisconnected(std::string("recv failed: ") + std::strerror(errno));
      }
      if (n == 0) throw PlannerDisconnected("peer closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::optional<nlohmann::json> recv(int timeout_ms) {
    auto line = recv_line(timeout_ms);
    if (!line) return std::nullopt;
    try {
      return nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception& e) {
      throw WireError(std::string("malformed record: ") + e.what());
    }
  }

 private:
  Fd fd_;
  std::string buffer_;
};

namespace detail {

inline Fd make_socket(const Endpoint& e) {
  const int fd = ::socket(e.kind == Endpoint::Kind::tcp ? AF_INET : AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw WireError(std::string("socket: ") + std::strerror(errno));
  return Fd(fd);
}

inline sockaddr_in tcp_addr(const Endpoint& e) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(static_cast<std::uint16_t>(e.port));
  const std::string host = e.host == "localhost" ? "127.0.0.1" : e.host;
  if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw WireError("bad IPv4 address '" + e.host + "'");
  return a;
}

inline sockaddr_un unix_addr(const Endpoint& e) {
  sockaddr_un a{};
  a.sun_family = AF_UNIX;
  if (e.path.size() >= sizeof a.sun_path) throw WireError("unix socket path too long");
  std::memcpy(a.sun_path, e.path.c_str(), e.path.size() + 1);
  return a;
}

}  // namespace detail

/// Harness side of the wire: binds, accepts one client, then serves as a
/// Planner whose answers come from the remote process.
class ExternalPlanner : public Planner {
 public:
  explicit ExternalPlanner(const Endpoint& endpoint) : endpoint_(endpoint) {
    listener_ = detail::make_socket(endpoint_);
    if (endpoint_.kind == Endpoint::Kind::tcp) {
      int one = 1;
      ::setsockopt(listener_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      auto a = detail::tcp_addr(endpoint_);
      if (::bind(listener_.get(), reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        throw WireError("bind " + endpoint_.str() + ": " + std::strerror(errno));
      }
      socklen_t len = sizeof a;
      ::getsockname(listener_.get(), reinterpret_cast<sockaddr*>(&a), &len);
      endpoint_.port = ntohs(a.sin_port);
    } else {
      ::unlink(endpoint_.path.c_str());
      auto a = detail::unix_addr(endpoint_);
      if (::bind(listener_.get(), reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        throw WireError("bind " + endpoint_.str() + ": " + std::strerror(errno));
      }
    }
    if (::listen(listener_.get(), 1) != 0) throw WireError(std::string("listen: ") + std::strerror(errno));
  }

  ~ExternalPlanner() override {
    close();
    if (endpoint_.kind == Endpoint::Kind::unix_socket) ::unlink(endpoint_.path.c_str());
  }

  /// Sends "close" to the connected planner and drops the connection.
  void close() {
    if (!channel_.open()) return;
    try {
      channel_.send({{"type", "close"}});
    } catch (const std::exception&) {
    }
    channel_.close();
  }

  ExternalPlanner(const ExternalPlanner&) = delete;
  ExternalPlanner& operator=(const ExternalPlanner&) = delete;

  /// Address actually bound (resolves port 0).
  const Endpoint& endpoint() const { return endpoint_; }

  /// Waits for a client, sends the handshake and checks the client's reply.
  /// Throws HandshakeVersionMismatch, PlannerTimeout or PlannerDisconnected.
  void accept(const Handshake& hs, int timeout_ms) {
    pollfd p{listener_.get(), POLLIN, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r <= 0) throw PlannerTimeout("no planner connected to " + endpoint_.str());
    const int fd = ::accept(listener_.get(), nullptr, nullptr);
    if (fd < 0) throw PlannerDisconnected(std::string("accept: ") + std::strerror(errno));
    channel_ = LineChannel(Fd(fd));
    channel_.send(to_json(hs));
    const auto reply = channel_.recv(timeout_ms);
    if (!reply) throw PlannerTimeout("planner did not answer the handshake");
    const int version = reply->value("protocol_version", -1);
    if (reply->value("type", "") != "handshake" || version != hs.protocol_version) {
      channel_.send({{"type", "error"}, {"message", "protocol version mismatch"}});
      channel_.close();
      throw HandshakeVersionMismatch(hs.protocol_version, version);
    }
  }

  PlannerResponse plan(const PlannerRequest& req) override {
    using clock = std::chrono::steady_clock;
    if (!channel_.open()) throw PlannerDisconnected("no planner connected");
    const auto start = clock::now();
    channel_.send(to_json(req));
    for (;;) {
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start).count();
      const auto left = req.deadline_ms - elapsed;
      if (left <= 0) throw PlannerTimeout("no response for tick " + std::to_string(req.tick));
      std::optional<nlohmann::json> rec;
      try {
        rec = channel_.recv(static_cast<int>(left));
      } catch (const WireError&) {
        continue;  // unparseable line; keep waiting for a valid response
      }
      if (!rec) throw PlannerTimeout("no response for tick " + std::to_string(req.tick));
      if (rec->value("type", "") != "response") continue;
      PlannerResponse resp;
      try {
        resp = response_from_json(*rec);
      } catch (const nlohmann::json::exception&) {
        continue;
      }
      // Late answers to earlier requests are dropped.
      if (resp.episode_id != req.episode_id || resp.tick != req.tick) continue;
      resp.latency_ms =
          std::chrono::duration<double, std::milli>(clock::now() - start).count();
      return resp;
    }
  }

 private:
  Endpoint endpoint_;
  Fd listener_;
  LineChannel channel_;
};

/// Planner side of the wire: connects to a harness and answers requests
/// with a callback until the harness closes the session.
class PlannerClient {
 public:
  using Callback = std::function<std::string(const PlannerRequest&)>;

  struct Summary {
    std::size_t served = 0;
    std::size_t failed = 0;
  };

  static PlannerClient connect(const Endpoint& e, int protocol_version = kProtocolVersion) {
    Fd fd = detail::make_socket(e);
    int rc = 0;
    if (e.kind == Endpoint::Kind::tcp) {
      auto a = detail::tcp_addr(e);
      rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&a), sizeof a);
    } else {
      auto a = detail::unix_addr(e);
      rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&a), sizeof a);
    }
    if (rc != 0) throw PlannerDisconnected("connect " + e.str() + ": " + std::strerror(errno));
    PlannerClient c;
    c.channel_ = LineChannel(std::move(fd));
    const auto hs = c.channel_.recv(10000);
    if (!hs || hs->value("type", "") != "handshake") throw WireError("expected handshake record");
    c.handshake_ = handshake_from_json(*hs);
    c.channel_.send({{"type", "handshake"}, {"protocol_version", protocol_version}});
    if (c.handshake_.protocol_version != protocol_version) {
      throw HandshakeVersionMismatch(protocol_version, c.handshake_.protocol_version);
    }
    return c;
  }

  const Handshake& handshake() const { return handshake_; }

  /// Serves until the harness sends "close" or drops the connection.
  /// A throwing callback yields an empty answer.
  Summary serve(const Callback& cb) {
    Summary s;
    for (;;) {
      std::optional<nlohmann::json> rec;
      try {
        rec = channel_.recv(-1);
      } catch (const PlannerDisconnected&) {
        return s;
      }
      if (!rec) continue;
      const std::string type = rec->value("type", "");
      if (type == "close" || type == "error") return s;
      if (type != "request") continue;
      const PlannerRequest req = request_from_json(*rec);
      std::string text;
      try {
        text = cb(req);
        ++s.served;
      } catch (const std::exception&) {
        ++s.failed;
      }
      channel_.send(to_json(PlannerResponse{req.episode_id, req.tick, text, 0.0}));
    }
  }

 private:
  LineChannel channel_;
  Handshake handshake_;
};

}  // namespace loopdrive::wire
