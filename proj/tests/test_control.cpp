#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support/synth.hpp"
#include "support/traces.hpp"
#include "touchless/control.hpp"

namespace {

using namespace touchless;
using nlohmann::json;

constexpr double kFrameMs = 1000.0 / 30.0;

struct Inbox {
  std::vector<json> messages;
  ReplyFn fn() {
    return [this](const std::string& s) { messages.push_back(json::parse(s)); };
  }
};

// One engine frame with the hub at its boundaries.
void tick(ControlHub& hub, Engine& engine, int k, std::vector<InputCommand>* out = nullptr) {
  auto cmds = hub.before_frame(engine);
  auto more = engine.step(synth::frame_at(k * kFrameMs));
  if (out) {
    out->insert(out->end(), cmds.begin(), cmds.end());
    out->insert(out->end(), more.begin(), more.end());
  }
  hub.after_frame(engine);
}

TEST(ControlHub, SetIsAckedWhenApplied) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  for (int k = 0; k < 3; ++k) tick(hub, engine, k);
  hub.handle(R"({"type":"set","field":"head.ear_on","value":0.22,"id":7})", inbox.fn());
  EXPECT_TRUE(inbox.messages.empty());  // not applied yet
  EXPECT_EQ(engine.config().head.ear_on, 0.20);

  tick(hub, engine, 3);
  ASSERT_EQ(inbox.messages.size(), 1u);
  const auto& ack = inbox.messages[0];
  EXPECT_EQ(ack["type"], "ack");
  EXPECT_EQ(ack["ok"], true);
  EXPECT_EQ(ack["request"], "set");
  EXPECT_EQ(ack["id"], 7);
  EXPECT_EQ(ack["effective_frame"], 3);
  EXPECT_EQ(ack["epoch"], 1);
  EXPECT_EQ(engine.config().head.ear_on, 0.22);
  EXPECT_EQ(engine.telemetry().frame, 3u);
  EXPECT_EQ(engine.telemetry().epoch, 1u);
}

TEST(ControlHub, GetReturnsConfigAndFields) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"get"})", inbox.fn());
  hub.handle(R"({"type":"get","field":"hand.pinch_on"})", inbox.fn());
  hub.handle(R"({"type":"set","field":"hand.pinch_on","value":0.3})", inbox.fn());
  hub.handle(R"({"type":"get","field":"hand.pinch_on"})", inbox.fn());  // sees the accepted change
  ASSERT_EQ(inbox.messages.size(), 3u);
  EXPECT_EQ(inbox.messages[0]["config"], json::parse(config_to_json(engine.config()).dump()));
  EXPECT_EQ(inbox.messages[1]["value"], 0.35);
  EXPECT_EQ(inbox.messages[2]["value"], 0.3);
}

TEST(ControlHub, InvalidRequestsReportTheField) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"set","field":"head.ear_on","value":0.4})", inbox.fn());
  hub.handle(R"({"type":"set","field":"head.nope","value":1})", inbox.fn());
  hub.handle(R"({"type":"set","values":{"hand.pinch_on":0.3,"max_range_mm":-5}})", inbox.fn());
  hub.handle(R"({"type":"get","field":"bogus"})", inbox.fn());
  hub.handle(R"({"type":"profile","name":"nope"})", inbox.fn());
  hub.handle(R"({"type":"dance"})", inbox.fn());
  hub.handle("{oops", inbox.fn());
  hub.handle(R"({"type":"record","action":"pause"})", inbox.fn());
  const std::vector<std::string> fields{"head.ear_on", "head.nope", "max_range_mm", "bogus",
                                        "profile",     "type",      "message",      "action"};
  ASSERT_EQ(inbox.messages.size(), fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    EXPECT_EQ(inbox.messages[i]["type"], "error");
    EXPECT_EQ(inbox.messages[i]["ok"], false);
    EXPECT_EQ(inbox.messages[i]["field"], fields[i]);
  }
  // a rejected batch changes nothing
  tick(hub, engine, 0);
  EXPECT_EQ(engine.epoch(), 0u);
  EXPECT_EQ(engine.config().hand.pinch_on, 0.35);
}

TEST(ControlHub, BatchIsAtomic) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"set","values":{"hand.pinch_on":0.3,"hand.pinch_off":0.5}})", inbox.fn());
  tick(hub, engine, 0);
  ASSERT_EQ(inbox.messages.size(), 1u);
  EXPECT_EQ(engine.epoch(), 1u);
  EXPECT_EQ(engine.config().hand.pinch_on, 0.3);
  EXPECT_EQ(engine.config().hand.pinch_off, 0.5);
}

TEST(ControlHub, ProfileSwitch) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"profile","name":"gaming"})", inbox.fn());
  tick(hub, engine, 0);
  ASSERT_EQ(inbox.messages.size(), 1u);
  EXPECT_EQ(inbox.messages[0]["request"], "profile");
  EXPECT_EQ(engine.profile().name, "gaming");
}

TEST(ControlHub, RecordStartStop) {
  Engine engine(load_config(std::string(R"({"modules": {"exercise": true}})")));
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"record","action":"start","name":"low","mode":"hold"})", inbox.fn());
  int k = 0;
  const auto step = [&](double knee) {
    (void)hub.before_frame(engine);
    auto f = synth::frame_at(k++ * kFrameMs);
    f.pose = synth::make_pose({.knee_l = knee, .knee_r = knee}, f.image);
    (void)engine.step(f);
    hub.after_frame(engine);
  };
  for (int i = 0; i < 20; ++i) step(110.0);
  EXPECT_EQ(engine.telemetry().recording, "low");
  hub.handle(R"({"type":"record","action":"stop"})", inbox.fn());
  step(175.0);
  ASSERT_EQ(inbox.messages.size(), 3u);
  EXPECT_EQ(inbox.messages[0]["request"], "record");
  EXPECT_EQ(inbox.messages[1]["request"], "record");
  EXPECT_EQ(inbox.messages[2]["type"], "record");
  EXPECT_EQ(inbox.messages[2]["template"]["name"], "low");
  ASSERT_EQ(engine.config().templates.size(), 1u);
  EXPECT_NEAR(engine.config().templates[0].means.at(Feature::KneeL), 110.0, 1e-6);

  // the recorded pose is now recognised
  std::vector<GestureEvent> seen;
  for (int i = 0; i < 10; ++i) {
    step(110.0);
    for (const auto& e : engine.telemetry().recent_events)
      if (e.kind == EventKind::Activate && e.label == "low") seen.push_back(e);
  }
  EXPECT_FALSE(seen.empty());

  hub.handle(R"({"type":"record","action":"stop"})", inbox.fn());
  step(175.0);
  EXPECT_EQ(inbox.messages.back()["type"], "error");
}

TEST(ControlHub, TelemetryCarriesConfig) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  const int h = hub.subscribe(inbox.fn());
  tick(hub, engine, 0);
  tick(hub, engine, 1);
  hub.unsubscribe(h);
  tick(hub, engine, 2);
  ASSERT_EQ(inbox.messages.size(), 2u);
  EXPECT_EQ(inbox.messages[1]["type"], "telemetry");
  EXPECT_EQ(inbox.messages[1]["frame"], 1);
  EXPECT_EQ(inbox.messages[1]["config"]["profile"], "clinical");
}

TEST(ControlHub, StoppedFailsPendingRequests) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"set","field":"head.ear_on","value":0.22})", inbox.fn());
  hub.stopped();
  ASSERT_EQ(inbox.messages.size(), 1u);
  EXPECT_EQ(inbox.messages[0]["ok"], false);
  hub.handle(R"({"type":"profile","name":"gaming"})", inbox.fn());
  EXPECT_EQ(inbox.messages.back()["ok"], false);
}

TEST(ControlHub, DrivenByRunLoop) {
  Engine engine;
  ControlHub hub(engine.config());
  Inbox inbox;
  hub.handle(R"({"type":"profile","name":"creativity"})", inbox.fn());
  std::string text;
  for (int k = 0; k < 5; ++k) text += serialize_frame(synth::frame_at(k * kFrameMs)) + "\n";
  std::istringstream in(text);
  NullSink sink;
  (void)run(engine, in, sink, {.observer = &hub});
  ASSERT_FALSE(inbox.messages.empty());
  EXPECT_EQ(inbox.messages[0]["effective_frame"], 0);
  EXPECT_EQ(engine.profile().name, "creativity");
}

// --- sockets -----------------------------------------------------------------

class LineClient {
 public:
  explicit LineClient(std::uint16_t port)
      : fd_(connect_tcp("127.0.0.1", std::to_string(port))), buf_(::dup(fd_)), in_(&buf_) {
    reader_ = std::thread([this] {
      std::string line;
      while (std::getline(in_, line)) {
        std::lock_guard lock(mu_);
        lines_.push_back(json::parse(line));
      }
    });
  }
  ~LineClient() {
    ::shutdown(fd_, SHUT_RDWR);
    reader_.join();
    ::close(fd_);
  }
  void send(const std::string& line) {
    const std::string data = line + "\n";
    ASSERT_EQ(::send(fd_, data.data(), data.size(), MSG_NOSIGNAL), static_cast<ssize_t>(data.size()));
  }
  std::vector<json> lines() {
    std::lock_guard lock(mu_);
    return lines_;
  }

 private:
  int fd_;
  SocketStreamBuf buf_;
  std::istream in_;
  std::mutex mu_;
  std::vector<json> lines_;
  std::thread reader_;
};

TEST(ControlServer, SetOverTcp) {
  Engine engine;
  ControlHub hub(engine.config());
  ControlServer server(hub, 0);
  ASSERT_NE(server.port(), 0);
  LineClient client(server.port());
  client.send(R"({"type":"set","field":"head.ear_on","value":0.22,"id":"a"})");

  std::optional<json> ack;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  for (int k = 0; !ack && std::chrono::steady_clock::now() < deadline; ++k) {
    tick(hub, engine, k);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    for (const auto& m : client.lines())
      if (m["type"] == "ack") ack = m;
  }
  ASSERT_TRUE(ack);
  EXPECT_EQ((*ack)["id"], "a");
  EXPECT_EQ((*ack)["epoch"], 1);
  EXPECT_EQ(engine.config().head.ear_on, 0.22);
  // telemetry after the ack carries the new epoch
  const int effective = (*ack)["effective_frame"].get<int>();
  tick(hub, engine, 100000);
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  bool saw_telemetry = false;
  for (const auto& m : client.lines()) {
    if (m["type"] != "telemetry") continue;
    saw_telemetry = true;
    EXPECT_EQ(m["epoch"], m["frame"].get<int>() >= effective ? 1 : 0);
  }
  EXPECT_TRUE(saw_telemetry);
  server.stop();
}

TEST(TcpInput, ReadsFramesFromSocket) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(listener, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(listener, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  const auto frames = synth::cycling_trace(6.0);
  std::thread provider([&] {
    const int fd = ::accept(listener, nullptr, nullptr);
    for (const auto& f : frames) {
      const std::string line = serialize_frame(f) + "\n";
      (void)detail::write_all(fd, line);
    }
    ::close(fd);
  });

  Engine engine(load_config(std::string(R"({"modules": {"exercise": true}, "profile": "gaming"})")));
  TcpInput input("tcp://127.0.0.1:" + std::to_string(port));
  VectorSink sink;
  const RunStats s = run(engine, input.stream(), sink);
  provider.join();
  ::close(listener);
  EXPECT_EQ(s.frames, frames.size());
  ASSERT_EQ(sink.commands.size(), 2u);
  EXPECT_EQ(sink.commands[0].key, "w");
  EXPECT_EQ(sink.commands[1].type, CommandType::KeyUp);

  EXPECT_THROW(TcpInput("udp://x:1"), Error);
  EXPECT_THROW(TcpInput("tcp://nohostport"), Error);
}

}  // namespace
