#pragma once

// Protocol service over TCP (one session per connection) and over a pair of
// byte streams (one session, ticks only on request).

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pegmentor/config.hpp"

namespace pegmentor {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 lets the system pick a free port
  double tick_hz = 30.0;
  std::uint64_t seed = 1;  // first episode seed of every session
  /// Loaded into every new session.
  std::optional<std::filesystem::path> checkpoint;
  /// Episode logs are written here when a session ends.
  std::optional<std::filesystem::path> log_dir;
};

using LogFn = std::function<void(const std::string&)>;

class Connection;

/// Each connection gets its own session, confined to one executor thread
/// that handles messages in arrival order and renders frames at tick_hz.
/// A reader thread feeds it and a writer thread drains its replies; when the
/// client lags, unsent frames are replaced by newer ones instead of queuing.
class Server {
 public:
  Server(AppConfig cfg, ServerOptions opts, LogFn log = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; throws IoError (for example when the port is taken).
  void listen();
  int port() const { return port_; }
  /// Accepts connections until stop() or `*external_stop` becomes true,
  /// then closes every session (flushing its episode log) and returns.
  void run(const std::atomic<bool>* external_stop = nullptr);
  void stop() { stopping_ = true; }
  std::size_t sessions_started() const { return sessions_started_; }

 private:
  void reap(bool all);

  AppConfig cfg_;
  ServerOptions opts_;
  LogFn log_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> sessions_started_{0};
  std::vector<std::unique_ptr<Connection>> connections_;
};

/// Serves one session over length-prefixed messages on `in`/`out` until end
/// of input. Returns 0, or 2 when the stream is corrupt.
int serve_stream(const AppConfig& cfg, const ServerOptions& opts, std::istream& in, std::ostream& out,
                 LogFn log = {});

}  // namespace pegmentor
