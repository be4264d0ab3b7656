#include "pegmentor/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <istream>
#include <ostream>
#include <thread>

#include "pegmentor/episode_log.hpp"
#include "pegmentor/error.hpp"
#include "pegmentor/protocol.hpp"

namespace pegmentor {
namespace {

std::unique_ptr<Session> make_session(const AppConfig& cfg, const ServerOptions& opts, const std::string& id,
                                      const LogFn& log) {
  auto session = std::make_unique<Session>(cfg, id, opts.seed);
  if (opts.checkpoint) {
    try {
      session->set_policy(LoadedPolicy::load(*opts.checkpoint));
    } catch (const Error& e) {
      if (log) log("session " + id + ": checkpoint not loaded: " + e.what());
    }
  }
  return session;
}

void flush_session(const Session& s, const ServerOptions& opts, const LogFn& log) {
  if (!opts.log_dir) return;
  const auto episodes = s.episode_log();
  if (episodes.empty()) return;
  const auto path = *opts.log_dir / ("session-" + s.id() + ".jsonl");
  try {
    Json header{{"session", s.id()}, {"seed", opts.seed}, {"config", to_json(s.config())}};
    write_episode_log(path, header, episodes);
    if (log) log("session " + s.id() + ": wrote " + std::to_string(episodes.size()) + " episodes to " + path.string());
  } catch (const std::exception& e) {
    if (log) log("session " + s.id() + ": could not write episode log: " + e.what());
  }
}

bool send_all(int fd, const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

/// Replies go out in order; frame pairs keep only the newest unsent one.
class Outbox {
 public:
  void push(std::string bytes) {
    {
      std::lock_guard lock(mu_);
      control_.push_back(std::move(bytes));
    }
    cv_.notify_one();
  }

  void offer_frames(std::string bytes) {
    {
      std::lock_guard lock(mu_);
      if (frames_) ++dropped_;
      frames_ = std::move(bytes);
    }
    cv_.notify_one();
  }

  /// Blocks until something is ready or the outbox is closed.
  std::optional<std::string> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !control_.empty() || frames_; });
    if (!control_.empty()) {
      std::string s = std::move(control_.front());
      control_.pop_front();
      return s;
    }
    if (frames_) {
      std::string s = std::move(*frames_);
      frames_.reset();
      return s;
    }
    return std::nullopt;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> control_;
  std::optional<std::string> frames_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

class Connection {
 public:
  Connection(int fd, std::unique_ptr<Session> session, const ServerOptions& opts, LogFn log)
      : fd_(fd), session_(std::move(session)), opts_(opts), log_(std::move(log)) {
    executor_ = std::thread([this] { execute(); });
    reader_ = std::thread([this] { read_loop(); });
    writer_ = std::thread([this] { write_loop(); });
  }

  ~Connection() { close(); }

  bool finished() const { return finished_; }

  void close() {
    if (closed_.exchange(true)) {
      join();
      return;
    }
    ::shutdown(fd_, SHUT_RDWR);
    mark_input_closed();
    join();
    ::close(fd_);
  }

 private:
  void join() {
    for (std::thread* t : {&reader_, &executor_, &writer_})
      if (t->joinable() && t->get_id() != std::this_thread::get_id()) t->join();
  }

  void mark_input_closed() {
    {
      std::lock_guard lock(mu_);
      input_closed_ = true;
    }
    cv_.notify_all();
  }

  void read_loop() {
    FrameDecoder decoder;
    char buf[65536];
    for (;;) {
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      try {
        while (auto payload = decoder.next()) {
          Json msg;
          try {
            msg = parse_message(*payload);
          } catch (const Error& e) {
            outbox_.push(encode_frame(error_message(e.code(), e.detail())));
            continue;
          }
          {
            std::lock_guard lock(mu_);
            inbox_.push_back(std::move(msg));
          }
          cv_.notify_all();
        }
      } catch (const Error& e) {
        // A bad length prefix leaves the stream unsynchronized; end the session.
        outbox_.push(encode_frame(error_message(e.code(), e.detail())));
        break;
      }
    }
    mark_input_closed();
  }

  void execute() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / opts_.tick_hz));
    auto next_tick = clock::now() + period;
    for (;;) {
      std::deque<Json> batch;
      bool closing = false;
      {
        std::unique_lock lock(mu_);
        cv_.wait_until(lock, next_tick, [&] { return input_closed_ || !inbox_.empty(); });
        batch.swap(inbox_);
        closing = input_closed_;
      }
      for (const auto& msg : batch)
        for (const auto& reply : handle_message(*session_, msg)) outbox_.push(encode_frame(reply));
      if (closing) break;
      const auto now = clock::now();
      if (now >= next_tick) {
        if (auto step = session_->tick()) outbox_.push(encode_frame(step_message(*step)));
        std::string frames;
        for (const auto& f : frame_messages(*session_)) frames += encode_frame(f);
        outbox_.offer_frames(std::move(frames));
        next_tick += period;
        if (next_tick < now) next_tick = now + period;  // fell behind: skip, do not burst
      }
    }
    flush_session(*session_, opts_, log_);
    if (log_)
      log_("session " + session_->id() + " closed (" + std::to_string(session_->tick_count()) + " ticks, " +
           std::to_string(outbox_.dropped()) + " stale frame pairs dropped)");
    outbox_.close();
    finished_ = true;
  }

  void write_loop() {
    while (auto bytes = outbox_.pop()) {
      if (!send_all(fd_, *bytes)) {
        ::shutdown(fd_, SHUT_RDWR);
        break;
      }
    }
  }

  int fd_;
  std::unique_ptr<Session> session_;
  ServerOptions opts_;
  LogFn log_;
  Outbox outbox_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Json> inbox_;
  bool input_closed_ = false;
  std::atomic<bool> finished_{false};
  std::atomic<bool> closed_{false};
  std::thread executor_;
  std::thread reader_;
  std::thread writer_;
};

Server::Server(AppConfig cfg, ServerOptions opts, LogFn log)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), log_(std::move(log)) {
  cfg_.validate();
  if (!(opts_.tick_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "tick rate must be positive");
}

Server::~Server() {
  reap(true);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::listen() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(opts_.port);
  if (const int rc = ::getaddrinfo(opts_.host.c_str(), port.c_str(), &hints, &found); rc != 0)
    throw Error(ErrorCode::IoError, "cannot resolve " + opts_.host + ": " + ::gai_strerror(rc));
  std::string last_error = "no usable address";
  for (addrinfo* a = found; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) throw Error(ErrorCode::IoError, "cannot listen on " + opts_.host + ":" + port + ": " + last_error);
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  if (log_) log_("listening on " + opts_.host + ":" + std::to_string(port_));
}

void Server::run(const std::atomic<bool>* external_stop) {
  if (listen_fd_ < 0) listen();
  while (!stopping_ && !(external_stop && *external_stop)) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, 100);
    reap(false);
    if (rc <= 0 || !(p.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const std::string id = "s" + std::to_string(++sessions_started_);
    try {
      auto session = make_session(cfg_, opts_, id, log_);
      if (log_) log_("session " + id + " opened");
      connections_.push_back(std::make_unique<Connection>(fd, std::move(session), opts_, log_));
    } catch (const std::exception& e) {
      if (log_) log_("session " + id + " failed to start: " + e.what());
      ::close(fd);
    }
  }
  reap(true);
  if (log_) log_("server stopped");
}

void Server::reap(bool all) {
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (all || (*it)->finished()) {
      (*it)->close();
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

int serve_stream(const AppConfig& cfg, const ServerOptions& opts, std::istream& in, std::ostream& out, LogFn log) {
  auto session = make_session(cfg, opts, "stdio", log);
  int status = 0;
  // Reads exactly one message at a time so an interactive peer gets each
  // reply before it sends the next request.
  for (;;) {
    char header[4];
    in.read(header, 4);
    if (in.gcount() == 0) break;
    std::size_t length = 0;
    for (int i = 0; i < in.gcount(); ++i) length = (length << 8) | static_cast<unsigned char>(header[i]);
    if (in.gcount() < 4 || length > kMaxInboundMessageBytes) {
      out << encode_frame(error_message(ErrorCode::BadMessage, in.gcount() < 4 ? "input ended inside a length prefix"
                                                                                 : "declared message length exceeds the limit"));
      status = 2;
      break;
    }
    std::string payload(length, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(length));
    if (static_cast<std::size_t>(in.gcount()) != length) {
      out << encode_frame(error_message(ErrorCode::BadMessage, "input ended inside a message"));
      status = 2;
      break;
    }
    std::vector<Json> replies;
    try {
      replies = handle_message(*session, parse_message(payload));
    } catch (const Error& e) {
      replies = {error_message(e.code(), e.detail())};
    }
    for (const auto& r : replies) out << encode_frame(r);
    out.flush();
  }
  out.flush();
  flush_session(*session, opts, log);
  return status;
}

}  // namespace pegmentor
