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

#include "fuzzyspec/remote.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <iostream>

#include <json.hpp>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec {

using json = nlohmann::json;

namespace {

void write_all(int fd, const std::string& data, bool socket) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto newline = buffer.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer.substr(0, newline);
      buffer.erase(0, newline + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      throw Error(ErrorCode::kTimeout, "no response within " +
                                           std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw Error(ErrorCode::kProtocolViolation, "peer closed the channel");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Transports

SubprocessTransport::SubprocessTransport(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(ErrorCode::kInvalidArgument, "empty command");
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::kIo, "pipe creation failed");
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorCode::kIo, "fork failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks a well-behaved server to exit; give it a moment.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(2000);
    }
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }
}

void SubprocessTransport::send_line(const std::string& line) {
  write_all(to_child_, line + "\n", false);
}

std::string SubprocessTransport::recv_line(std::chrono::milliseconds timeout) {
  return read_line(from_child_, buffer_, timeout);
}

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &result) != 0) {
    throw Error(ErrorCode::kIo, "cannot resolve " + host);
  }
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(result);
  if (fd_ < 0) {
    throw Error(ErrorCode::kIo, "cannot connect to " + host + ":" + service);
  }
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send_line(const std::string& line) {
  write_all(fd_, line + "\n", true);
}

std::string TcpTransport::recv_line(std::chrono::milliseconds timeout) {
  return read_line(fd_, buffer_, timeout);
}

void LoopbackTransport::send_line(const std::string& line) {
  if (auto reply = handler_(line)) pending_.push_back(std::move(*reply));
}

std::string LoopbackTransport::recv_line(std::chrono::milliseconds timeout) {
  if (pending_.empty()) {
    throw Error(ErrorCode::kTimeout, "no response within " +
                                         std::to_string(timeout.count()) + " ms");
  }
  std::string line = std::move(pending_.front());
  pending_.erase(pending_.begin());
  return line;
}

std::unique_ptr<LineTransport> open_transport(const RemoteModelConfig& cfg) {
  if (const auto* sub = std::get_if<SubprocessEndpoint>(&cfg.transport)) {
    return std::make_unique<SubprocessTransport>(sub->argv);
  }
  const auto& tcp = std::get<TcpEndpoint>(cfg.transport);
  return std::make_unique<TcpTransport>(tcp.host, tcp.port);
}

// ---------------------------------------------------------------------------
// Client

namespace {

json parse_frame(const std::string& line) {
  try {
    json frame = json::parse(line);
    if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string()) {
      throw Error(ErrorCode::kProtocolViolation, "frame without a type: " + line);
    }
    return frame;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolViolation, std::string("malformed frame: ") + e.what());
  }
}

ProbDist validate_row(const json& row, std::size_t vocab_size, std::size_t index) {
  if (!row.is_array() || row.size() != vocab_size) {
    throw Error(ErrorCode::kProtocolViolation,
                "row " + std::to_string(index) + " does not have vocab_size entries");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(vocab_size));
  for (std::size_t t = 0; t < vocab_size; ++t) {
    if (!row[t].is_number()) {
      throw Error(ErrorCode::kProtocolViolation, "non-numeric probability");
    }
    const double p = row[t].get<double>();
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kProtocolViolation, "negative or non-finite probability");
    }
    v[static_cast<Eigen::Index>(t)] = p;
  }
  const double total = v.sum();
  if (std::abs(total - 1.0) > kWireSumTolerance) {
    throw Error(ErrorCode::kProtocolViolation,
                "row " + std::to_string(index) + " sums to " + std::to_string(total));
  }
  return normalize(v);
}

}  // namespace

RemoteModel::RemoteModel(std::unique_ptr<LineTransport> transport,
                         std::size_t vocab_size, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), vocab_size_(vocab_size), timeout_(timeout) {
  transport_->send_line(json{{"type", "hello"}, {"protocol", kProtocolVersion}}.dump());
  const json reply = parse_frame(transport_->recv_line(timeout_));
  if (reply["type"] != "hello" || !reply.contains("vocab_size") ||
      !reply["vocab_size"].is_number_unsigned()) {
    throw Error(ErrorCode::kProtocolViolation, "bad handshake reply");
  }
  const auto remote_vocab = reply["vocab_size"].get<std::size_t>();
  if (remote_vocab != vocab_size_) {
    throw Error(ErrorCode::kVocabMismatch,
                "server declares vocab_size " + std::to_string(remote_vocab) +
                    ", expected " + std::to_string(vocab_size_));
  }
  if (reply.contains("name") && reply["name"].is_string()) {
    name_ = reply["name"].get<std::string>();
  }
}

RemoteModel::RemoteModel(const RemoteModelConfig& cfg)
    : RemoteModel(open_transport(cfg), cfg.vocab_size, cfg.timeout) {}

ProbDist RemoteModel::next_dist(std::span<const TokenId> context) const {
  if (context.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "remote models need a non-empty context");
  }
  auto rows = next_dists(context, context.size() - 1);
  return std::move(rows.front());
}

std::vector<ProbDist> RemoteModel::next_dists(std::span<const TokenId> context,
                                              std::size_t start) const {
  if (start >= context.size()) return {};
  for (TokenId t : context) {
    if (t >= vocab_size_) throw Error(ErrorCode::kTokenOutOfRange, "context token");
  }
  const std::uint64_t id = next_id_++;
  json request{{"type", "dists"},
               {"id", id},
               {"tokens", std::vector<TokenId>(context.begin(), context.end())},
               {"start", start}};
  transport_->send_line(request.dump());
  const json reply = parse_frame(transport_->recv_line(timeout_));
  if (!reply.contains("id") || !reply["id"].is_number_unsigned() ||
      reply["id"].get<std::uint64_t>() != id) {
    throw Error(ErrorCode::kProtocolViolation, "response id does not match request");
  }
  if (reply["type"] == "error") {
    throw Error(ErrorCode::kRemoteError, reply.value("message", std::string("unspecified")));
  }
  if (reply["type"] != "dists" || !reply.contains("probs") || !reply["probs"].is_array()) {
    throw Error(ErrorCode::kProtocolViolation, "expected a dists frame");
  }
  const json& probs = reply["probs"];
  if (probs.size() != context.size() - start) {
    throw Error(ErrorCode::kProtocolViolation,
                "expected " + std::to_string(context.size() - start) + " rows, got " +
                    std::to_string(probs.size()));
  }
  std::vector<ProbDist> out;
  out.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out.push_back(validate_row(probs[i], vocab_size_, i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Echo server

std::optional<std::string> EchoServer::handle(const std::string& line) const {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception&) {
    return json{{"type", "error"}, {"id", nullptr}, {"message", "malformed frame"}}.dump();
  }
  const json id = request.contains("id") ? request["id"] : json(nullptr);
  const std::string type = request.value("type", std::string());
  if (type == "hello") {
    return json{{"type", "hello"},
                {"vocab_size", options_.vocab_size},
                {"name", options_.name}}
        .dump();
  }
  if (type != "dists") {
    return json{{"type", "error"}, {"id", id}, {"message", "unknown request type"}}.dump();
  }
  try {
    const auto tokens = request.at("tokens").get<std::vector<std::int64_t>>();
    const auto start = request.at("start").get<std::int64_t>();
    if (start < 0) throw std::invalid_argument("negative start");
    for (auto t : tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= options_.vocab_size) {
        throw std::invalid_argument("token out of range");
      }
    }
    const double value = (options_.halve_sums ? 0.5 : 1.0) /
                         static_cast<double>(options_.vocab_size);
    json probs = json::array();
    for (std::int64_t pos = start; pos < static_cast<std::int64_t>(tokens.size()); ++pos) {
      probs.push_back(std::vector<double>(options_.vocab_size, value));
    }
    return json{{"type", "dists"}, {"id", id}, {"probs", std::move(probs)}}.dump();
  } catch (const std::exception& e) {
    return json{{"type", "error"}, {"id", id}, {"message", e.what()}}.dump();
  }
}

void EchoServer::serve(std::istream& in, std::ostream& out) const {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (auto reply = handle(line)) out << *reply << '\n' << std::flush;
  }
}

void EchoServer::serve_tcp(std::uint16_t port, std::size_t max_connections,
                           const std::function<void(std::uint16_t)>& on_ready) const {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw Error(ErrorCode::kIo, "socket failed");
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 4) != 0) {
    ::close(listener);
    throw Error(ErrorCode::kIo, "cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_ready) on_ready(ntohs(addr.sin_port));

  for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
    const int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) continue;
    std::string buffer;
    try {
      while (true) {
        const std::string line = read_line(conn, buffer, std::chrono::hours(24));
        if (line.empty()) continue;
        if (auto reply = handle(line)) write_all(conn, *reply + "\n", true);
      }
    } catch (const Error&) {
      // Peer closed the connection.
    }
    ::close(conn);
  }
  ::close(listener);
}

}  // namespace fuzzyspec
