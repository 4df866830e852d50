// Copyright 2026 The fuzzyspec Authors.
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

#ifndef FUZZYSPEC_REMOTE_HPP
#define FUZZYSPEC_REMOTE_HPP

/** @file
 * Client and test-double server for the newline-delimited logit protocol.
 *
 * Every frame is one JSON object on one line:
 *
 *   -> {"type":"hello","protocol":1}
 *   <- {"type":"hello","vocab_size":V,"name":"..."}
 *   -> {"type":"dists","id":n,"tokens":[t0,...,tk],"start":s}
 *   <- {"type":"dists","id":n,"probs":[[...V...], ...]}   one row per s..k
 *   <- {"type":"error","id":n,"message":"..."}
 *
 * Rows must each sum to one within 1e-6; the client renormalises accepted
 * rows before handing them out as ProbDist.
 */

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fuzzyspec/model.hpp"

namespace fuzzyspec {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kWireSumTolerance = 1e-6;

/// Bidirectional line channel. Lines exclude the trailing newline.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Throws kTimeout if no complete line arrives in time and
  /// kProtocolViolation if the peer closed the channel.
  virtual std::string recv_line(std::chrono::milliseconds timeout) = 0;
};

/// Spawns a child process and speaks over its stdin/stdout.
class SubprocessTransport final : public LineTransport {
 public:
  explicit SubprocessTransport(const std::vector<std::string>& argv);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void send_line(const std::string& line) override;
  std::string recv_line(std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Plain TCP with identical framing.
class TcpTransport final : public LineTransport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send_line(const std::string& line) override;
  std::string recv_line(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// In-process channel backed by a request handler; for tests and for
/// wiring a server object directly to a client.
class LoopbackTransport final : public LineTransport {
 public:
  using Handler = std::function<std::optional<std::string>(const std::string&)>;
  explicit LoopbackTransport(Handler handler) : handler_(std::move(handler)) {}

  void send_line(const std::string& line) override;
  std::string recv_line(std::chrono::milliseconds timeout) override;

 private:
  Handler handler_;
  std::vector<std::string> pending_;
};

struct SubprocessEndpoint {
  std::vector<std::string> argv;
};

struct TcpEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct RemoteModelConfig {
  std::variant<SubprocessEndpoint, TcpEndpoint> transport;
  std::chrono::milliseconds timeout{5000};
  std::size_t vocab_size = 0;
};

std::unique_ptr<LineTransport> open_transport(const RemoteModelConfig& cfg);

/// ModelBackend over the logit protocol. The constructor performs the
/// handshake and raises kVocabMismatch if the server's vocabulary differs
/// from the configured one. A session is single-owner.
class RemoteModel final : public ModelBackend {
 public:
  RemoteModel(std::unique_ptr<LineTransport> transport, std::size_t vocab_size,
              std::chrono::milliseconds timeout);
  explicit RemoteModel(const RemoteModelConfig& cfg);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t max_context_length() const override { return 0; }
  ProbDist next_dist(std::span<const TokenId> context) const override;
  std::vector<ProbDist> next_dists(std::span<const TokenId> context,
                                   std::size_t start) const override;

  const std::string& server_name() const { return name_; }
  std::uint64_t requests_sent() const { return next_id_; }

 private:
  std::unique_ptr<LineTransport> transport_;
  std::size_t vocab_size_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  mutable std::uint64_t next_id_ = 0;
};

/// Behaviour of the echo test double.
struct EchoServerOptions {
  std::size_t vocab_size = 8;
  std::string name = "echo";
  /// Replies with rows that sum to 0.5 instead of 1.
  bool halve_sums = false;
};

/// Logit server test double: answers every dists request with uniform rows.
class EchoServer {
 public:
  explicit EchoServer(EchoServerOptions options) : options_(std::move(options)) {}

  /// Response line for a request line, or nullopt if none is due.
  std::optional<std::string> handle(const std::string& line) const;

  /// Serves until end of input.
  void serve(std::istream& in, std::ostream& out) const;

  /// Accepts connections on the given port one after another until
  /// `max_connections` have been served (0 means forever). Calls `on_ready`
  /// with the bound port once listening.
  void serve_tcp(std::uint16_t port, std::size_t max_connections,
                 const std::function<void(std::uint16_t)>& on_ready = {}) const;

 private:
  EchoServerOptions options_;
};

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_REMOTE_HPP
