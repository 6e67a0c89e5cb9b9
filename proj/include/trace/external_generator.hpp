#pragma once

// Generator backed by an external process speaking line-delimited JSON over
// its standard streams. One request in flight per session.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "trace/generators.hpp"
#include "trace/serialize.hpp"

namespace trace {

inline json propose_request(const GeneratorContext& ctx, const AgentState& state, int k) {
  return json{{"type", "propose"},
              {"map", ctx.env ? render_map(*ctx.env) : std::string()},
              {"anchor", ctx.anchor},
              {"last_obs", ctx.last_obs},
              {"accepted_motifs", ctx.accepted_motifs},
              {"rejection_notes", ctx.rejection_notes},
              {"k", k},
              {"iteration", ctx.iteration},
              {"state", state}};
}

/// Decodes a candidates response; anything else is a peer failure.
inline std::vector<AgentState> parse_candidates(std::string_view line, int k) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ExternalGeneratorFailure(std::string("malformed response: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "candidates" || !j.contains("states") || !j["states"].is_array()) {
    throw ExternalGeneratorFailure("response is not a candidates record");
  }
  std::vector<AgentState> out;
  try {
    for (const auto& s : j["states"]) {
      if (static_cast<int>(out.size()) == k) break;
      out.push_back(s.get<AgentState>());
    }
  } catch (const std::exception& e) {
    throw ExternalGeneratorFailure(std::string("malformed state in response: ") + e.what());
  }
  return out;
}

class ExternalGenerator final : public Generator {
public:
  ExternalGenerator(std::string command, int timeout_ms) : command_(std::move(command)), timeout_ms_(timeout_ms) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) throw ExternalGeneratorFailure("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) throw ExternalGeneratorFailure("fork failed");
    if (pid_ == 0) {
      ::setpgid(0, 0);  // own group, so teardown reaches grandchildren of the shell
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ExternalGenerator(const ExternalGenerator&) = delete;
  ExternalGenerator& operator=(const ExternalGenerator&) = delete;

  ~ExternalGenerator() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  std::vector<AgentState> propose(const GeneratorContext& ctx, const AgentState& state, int k) override {
    if (k <= 0) return {};
    if (failed_) throw ExternalGeneratorFailure("peer session already failed");
    try {
      send(propose_request(ctx, state, k).dump() + "\n");
      auto out = parse_candidates(read_line(), k);
      // Exclusions are not part of the protocol; they are enforced here.
      std::erase_if(out, [&](const AgentState& c) { return ctx.exclusions.count({state, c}) > 0; });
      return out;
    } catch (...) {
      failed_ = true;
      throw;
    }
  }

  const std::string& command() const { return command_; }

private:
  void send(const std::string& msg) {
    std::size_t off = 0;
    while (off < msg.size()) {
      const auto n = ::write(write_fd_, msg.data() + off, msg.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ExternalGeneratorFailure(std::string("write to peer failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ExternalGeneratorFailure("peer timed out");
      pollfd p{read_fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ExternalGeneratorFailure(std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) throw ExternalGeneratorFailure("peer timed out");
      char chunk[4096];
      const auto n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ExternalGeneratorFailure(std::string("read from peer failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ExternalGeneratorFailure("peer closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  bool failed_ = false;
};

}  // namespace trace
