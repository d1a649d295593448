#pragma once

// Control protocol (NDJSON over a local TCP socket, one JSON object per line).
//
// client -> engine
//   {"type":"get"}                                   full config
//   {"type":"get","field":"head.ear_on"}             one value
//   {"type":"set","field":"head.ear_on","value":0.22}
//   {"type":"set","values":{"head.ear_on":0.22,"hand.pinch_on":0.3}}   atomic batch
//   {"type":"profile","name":"gaming"}
//   {"type":"record","action":"start","name":"wave","mode":"hold"|"rep"}
//   {"type":"record","action":"stop"}
//   optional "id" on any request is echoed in its replies.
//
// engine -> client
//   {"type":"ack","ok":true,"request":"get","config":{...},"epoch":E}
//   {"type":"ack","ok":true,"request":"set"|"profile"|"record","effective_frame":N,"epoch":E}
//       sent when the change is applied, at the boundary before frame N;
//       telemetry for frames >= N carries epoch >= E
//   {"type":"record","ok":true,"template":{...}}      after a recording stops
//   {"type":"error","ok":false,"field":"head.ear_on","message":"..."}
//   {"type":"telemetry","frame":N,"epoch":E,...,"config":{...}}   once per frame

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <streambuf>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/config.hpp"
#include "touchless/engine.hpp"
#include "touchless/error.hpp"

namespace touchless {

using ReplyFn = std::function<void(const std::string&)>;

inline std::string error_reply(const std::string& field, const std::string& message,
                               const nlohmann::json& id = nullptr) {
  nlohmann::ordered_json j{{"type", "error"}, {"ok", false}, {"field", field}, {"message", message}};
  if (!id.is_null()) j["id"] = id;
  return j.dump();
}

// Message handling shared by every connection. Requests arrive on socket
// threads; the engine thread drains them at frame boundaries.
class ControlHub final : public FrameObserver {
 public:
  explicit ControlHub(const EngineConfig& initial) : latest_(initial) {}

  void handle(const std::string& line, const ReplyFn& reply) {
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      reply(error_reply("message", std::string("not valid JSON: ") + e.what()));
      return;
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      reply(error_reply("type", "message needs a string \"type\""));
      return;
    }
    const nlohmann::json id = msg.value("id", nlohmann::json());
    const std::string type = msg["type"].get<std::string>();
    try {
      if (type == "get") handle_get(msg, id, reply);
      else if (type == "set") handle_set(msg, id, reply);
      else if (type == "profile") handle_profile(msg, id, reply);
      else if (type == "record") handle_record(msg, id, reply);
      else reply(error_reply("type", "unknown message type '" + type + "'", id));
    } catch (const Error& e) {
      reply(error_reply(e.field().empty() ? type : e.field(), e.detail(), id));
    } catch (const nlohmann::json::exception& e) {
      reply(error_reply(type, e.what(), id));
    }
  }

  // Telemetry listeners (one per connection).
  int subscribe(ReplyFn fn) {
    std::lock_guard lock(mu_);
    listeners_.emplace(next_listener_, std::move(fn));
    return next_listener_++;
  }
  void unsubscribe(int handle) {
    std::lock_guard lock(mu_);
    listeners_.erase(handle);
  }

  std::vector<InputCommand> before_frame(Engine& engine) override {
    std::vector<Deferred> acks;
    std::vector<RecordRequest> records;
    std::optional<EngineConfig> pending;
    {
      std::lock_guard lock(mu_);
      pending.swap(pending_);
      acks.swap(waiting_);
      records.swap(records_);
    }
    std::vector<InputCommand> commands;
    if (pending) commands = engine.apply_config(std::move(*pending));
    const auto frame = engine.frame_index();
    for (const auto& a : acks) {
      nlohmann::ordered_json j{{"type", "ack"}, {"ok", true}, {"request", a.request},
                               {"effective_frame", frame}, {"epoch", engine.epoch()}};
      if (!a.id.is_null()) j["id"] = a.id;
      a.reply(j.dump());
    }
    for (auto& r : records) {
      if (r.start) {
        engine.start_recording(r.name, r.mode);
        ack(r, frame, engine.epoch());
        continue;
      }
      try {
        GestureTemplate t = engine.stop_recording();
        EngineConfig next = engine.config();
        std::erase_if(next.templates, [&](const GestureTemplate& o) { return o.name == t.name; });
        next.templates.push_back(t);
        auto more = engine.apply_config(next);
        commands.insert(commands.end(), more.begin(), more.end());
        {
          std::lock_guard lock(mu_);
          std::erase_if(latest_.templates, [&](const GestureTemplate& o) { return o.name == t.name; });
          latest_.templates.push_back(t);
        }
        ack(r, frame, engine.epoch());
        nlohmann::ordered_json j{{"type", "record"}, {"ok", true}, {"template", template_to_json(t)}};
        if (!r.id.is_null()) j["id"] = r.id;
        r.reply(j.dump());
      } catch (const Error& e) {
        r.reply(error_reply("record", e.detail(), r.id));
      }
    }
    return commands;
  }

  void after_frame(const Engine& engine) override {
    auto j = engine.telemetry().to_json();
    j["config"] = config_to_json(engine.config());
    const std::string text = j.dump();
    std::lock_guard lock(mu_);
    for (const auto& [handle, fn] : listeners_) fn(text);
  }

  void stopped() override {
    std::lock_guard lock(mu_);
    for (const auto& a : waiting_) a.reply(error_reply(a.request, "engine stopped before the change took effect", a.id));
    for (const auto& r : records_) r.reply(error_reply("record", "engine stopped before the request was applied", r.id));
    waiting_.clear();
    records_.clear();
    pending_.reset();
    stopped_ = true;
  }

 private:
  struct Deferred {
    std::string request;
    nlohmann::json id;
    ReplyFn reply;
  };
  struct RecordRequest {
    bool start = false;
    std::string name;
    TemplateMode mode = TemplateMode::WhileActive;
    nlohmann::json id;
    ReplyFn reply;
  };

  static void ack(const RecordRequest& r, std::uint64_t frame, std::uint64_t epoch) {
    nlohmann::ordered_json j{{"type", "ack"}, {"ok", true}, {"request", "record"}, {"effective_frame", frame},
                             {"epoch", epoch}};
    if (!r.id.is_null()) j["id"] = r.id;
    r.reply(j.dump());
  }

  void handle_get(const nlohmann::json& msg, const nlohmann::json& id, const ReplyFn& reply) {
    std::lock_guard lock(mu_);
    nlohmann::ordered_json j{{"type", "ack"}, {"ok", true}, {"request", "get"}};
    const auto config = config_to_json(latest_);
    if (const auto f = msg.find("field"); f != msg.end()) {
      if (!f->is_string()) throw Error(ErrorKind::ConfigError, "field must be a string", "field");
      const std::string path = f->get<std::string>();
      const nlohmann::ordered_json* node = &config;
      std::size_t start = 0;
      while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(key))
          throw Error(ErrorKind::ConfigError, path + " is not a known setting", path);
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      j["field"] = path;
      j["value"] = *node;
    } else {
      j["config"] = config;
    }
    if (!id.is_null()) j["id"] = id;
    reply(j.dump());
  }

  void enqueue(EngineConfig next, const std::string& request, const nlohmann::json& id, const ReplyFn& reply) {
    // caller holds mu_
    if (stopped_) throw Error(ErrorKind::ConfigError, "engine has stopped", request);
    latest_ = next;
    pending_ = std::move(next);
    waiting_.push_back({request, id, reply});
  }

  void handle_set(const nlohmann::json& msg, const nlohmann::json& id, const ReplyFn& reply) {
    std::lock_guard lock(mu_);
    EngineConfig next = latest_;
    if (const auto values = msg.find("values"); values != msg.end()) {
      if (!values->is_object() || values->empty())
        throw Error(ErrorKind::ConfigError, "values must be a non-empty object", "values");
      for (const auto& [path, value] : values->items()) next = set_field(next, path, value);
    } else {
      const auto field = msg.find("field");
      if (field == msg.end() || !field->is_string())
        throw Error(ErrorKind::ConfigError, "set needs a string field", "field");
      if (!msg.contains("value")) throw Error(ErrorKind::ConfigError, "set needs a value", field->get<std::string>());
      next = set_field(next, field->get<std::string>(), msg["value"]);
    }
    enqueue(std::move(next), "set", id, reply);
  }

  void handle_profile(const nlohmann::json& msg, const nlohmann::json& id, const ReplyFn& reply) {
    const auto name = msg.find("name");
    if (name == msg.end() || !name->is_string()) throw Error(ErrorKind::ConfigError, "profile needs a name", "name");
    std::lock_guard lock(mu_);
    enqueue(set_field(latest_, "profile", *name), "profile", id, reply);
  }

  void handle_record(const nlohmann::json& msg, const nlohmann::json& id, const ReplyFn& reply) {
    const std::string action = msg.value("action", "");
    RecordRequest r;
    r.id = id;
    r.reply = reply;
    if (action == "start") {
      r.start = true;
      const auto name = msg.find("name");
      if (name == msg.end() || !name->is_string() || name->get<std::string>().empty())
        throw Error(ErrorKind::ConfigError, "record start needs a name", "name");
      r.name = name->get<std::string>();
      const std::string mode = msg.value("mode", "hold");
      if (mode == "rep") r.mode = TemplateMode::PerRep;
      else if (mode != "hold") throw Error(ErrorKind::ConfigError, "mode must be \"hold\" or \"rep\"", "mode");
    } else if (action != "stop") {
      throw Error(ErrorKind::ConfigError, "action must be \"start\" or \"stop\"", "action");
    }
    std::lock_guard lock(mu_);
    if (stopped_) throw Error(ErrorKind::ConfigError, "engine has stopped", "record");
    records_.push_back(std::move(r));
  }

  std::mutex mu_;
  EngineConfig latest_;  // current config plus every accepted change
  std::optional<EngineConfig> pending_;
  std::vector<Deferred> waiting_;
  std::vector<RecordRequest> records_;
  std::map<int, ReplyFn> listeners_;
  int next_listener_ = 0;
  bool stopped_ = false;
};

namespace detail {

inline bool write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace detail

// Serves ControlHub over TCP on the loopback interface. Each connection gets
// a reader and a writer thread; telemetry is dropped for a client that falls
// more than kMaxQueued messages behind.
class ControlServer {
 public:
  static constexpr std::size_t kMaxQueued = 256;

  // port 0 picks a free port (see port()).
  ControlServer(ControlHub& hub, std::uint16_t port, const std::string& host = "127.0.0.1") : hub_(hub) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorKind::IoError, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw Error(ErrorKind::IoError, "control host must be an IPv4 address: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 8) < 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      throw Error(ErrorKind::IoError, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  ~ControlServer() { stop(); }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::shared_ptr<Connection>> conns;
    {
      std::lock_guard lock(mu_);
      conns.swap(connections_);
    }
    for (auto& c : conns) c->close();
    for (auto& c : conns) c->join();
  }

  [[nodiscard]] std::uint16_t port() const noexcept { return port_; }

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    explicit Connection(int fd) : fd_(fd) {}
    ~Connection() {
      if (fd_ >= 0) ::close(fd_);
    }

    void start(ControlHub& hub) {
      std::weak_ptr<Connection> weak = shared_from_this();
      const ReplyFn reply = [weak](const std::string& s) {
        if (auto c = weak.lock()) c->send(s, false);
      };
      listener_ = hub.subscribe([weak](const std::string& s) {
        if (auto c = weak.lock()) c->send(s, true);
      });
      hub_ = &hub;
      writer_ = std::thread([this] { write_loop(); });
      reader_ = std::thread([this, reply] { read_loop(reply); });
    }

    void send(const std::string& line, bool droppable) {
      std::lock_guard lock(mu_);
      if (closed_ || (droppable && outbox_.size() >= kMaxQueued)) return;
      outbox_.push_back(line + "\n");
      cv_.notify_one();
    }

    void close() {
      {
        std::lock_guard lock(mu_);
        closed_ = true;
        cv_.notify_all();
      }
      ::shutdown(fd_, SHUT_RDWR);
    }

    void join() {
      if (reader_.joinable()) reader_.join();
      if (writer_.joinable()) writer_.join();
      if (hub_) hub_->unsubscribe(listener_);
    }

   private:
    void read_loop(const ReplyFn& reply) {
      std::string buffer;
      char chunk[4096];
      while (true) {
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = buffer.find('\n')) != std::string::npos) {
          std::string line = buffer.substr(0, nl);
          buffer.erase(0, nl + 1);
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (line.find_first_not_of(" \t") == std::string::npos) continue;
          hub_->handle(line, reply);
        }
      }
      std::lock_guard lock(mu_);
      closed_ = true;
      cv_.notify_all();
    }

    void write_loop() {
      while (true) {
        std::string next;
        {
          std::unique_lock lock(mu_);
          cv_.wait(lock, [&] { return closed_ || !outbox_.empty(); });
          if (outbox_.empty()) return;
          next = std::move(outbox_.front());
          outbox_.pop_front();
        }
        if (!detail::write_all(fd_, next)) {
          std::lock_guard lock(mu_);
          closed_ = true;
          outbox_.clear();
          return;
        }
      }
    }

    int fd_;
    ControlHub* hub_ = nullptr;
    int listener_ = -1;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> outbox_;
    bool closed_ = false;
    std::thread reader_;
    std::thread writer_;
  };

  void accept_loop() {
    while (!stopping_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      auto conn = std::make_shared<Connection>(fd);
      conn->start(hub_);
      std::lock_guard lock(mu_);
      connections_.push_back(std::move(conn));
    }
  }

  ControlHub& hub_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::shared_ptr<Connection>> connections_;
};

// --- TCP frame input ---------------------------------------------------------

class SocketStreamBuf final : public std::streambuf {
 public:
  explicit SocketStreamBuf(int fd) : fd_(fd) {}
  ~SocketStreamBuf() override {
    if (fd_ >= 0) ::close(fd_);
  }
  SocketStreamBuf(const SocketStreamBuf&) = delete;
  SocketStreamBuf& operator=(const SocketStreamBuf&) = delete;

 protected:
  int_type underflow() override {
    if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
    ssize_t n;
    do {
      n = ::recv(fd_, buffer_, sizeof buffer_, 0);
    } while (n < 0 && errno == EINTR);
    if (n <= 0) return traits_type::eof();
    setg(buffer_, buffer_, buffer_ + n);
    return traits_type::to_int_type(*gptr());
  }

 private:
  int fd_;
  char buffer_[65536];
};

inline int connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw Error(ErrorKind::IoError, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorKind::IoError, "cannot connect to " + host + ":" + port);
  return fd;
}

// Stream over a tcp://HOST:PORT frame source.
class TcpInput {
 public:
  explicit TcpInput(const std::string& url) {
    constexpr std::string_view kScheme = "tcp://";
    if (!url.starts_with(kScheme)) throw Error(ErrorKind::IoError, "input must be stdin or tcp://HOST:PORT");
    const std::string rest = url.substr(kScheme.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
      throw Error(ErrorKind::IoError, "input must be tcp://HOST:PORT, got " + url);
    buf_ = std::make_unique<SocketStreamBuf>(connect_tcp(rest.substr(0, colon), rest.substr(colon + 1)));
    stream_ = std::make_unique<std::istream>(buf_.get());
  }

  std::istream& stream() noexcept { return *stream_; }

 private:
  std::unique_ptr<SocketStreamBuf> buf_;
  std::unique_ptr<std::istream> stream_;
};

}  // namespace touchless
