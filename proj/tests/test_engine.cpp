#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/synth.hpp"
#include "support/traces.hpp"
#include "touchless/engine.hpp"

namespace {

using namespace touchless;
using synth::Fingers;

constexpr double kFrameMs = 1000.0 / 30.0;

EngineConfig config_from(const std::string& text) { return load_config(text); }

EngineConfig cycling_config(double max_range = 2000.0) {
  return config_from(R"({"modules": {"hand": false, "exercise": true}, "profile": "gaming", "max_range_mm": )" +
                     std::to_string(max_range) + "}");
}

std::string to_ndjson(const std::vector<LandmarkFrame>& frames) {
  std::string out;
  for (const auto& f : frames) out += serialize_frame(f) + "\n";
  return out;
}

std::vector<InputCommand> run_all(Engine& engine, const std::vector<LandmarkFrame>& frames) {
  std::vector<InputCommand> out;
  for (const auto& f : frames)
    for (auto& c : engine.step(f)) out.push_back(c);
  for (auto& c : engine.finish()) out.push_back(c);
  return out;
}

int count_type(const std::vector<InputCommand>& cmds, CommandType type) {
  return static_cast<int>(std::count_if(cmds.begin(), cmds.end(), [&](auto& c) { return c.type == type; }));
}

bool balanced(const std::vector<InputCommand>& cmds) {
  std::map<std::string, int> held;
  for (const auto& c : cmds) {
    if (c.type == CommandType::KeyDown) ++held["k" + c.key];
    if (c.type == CommandType::KeyUp) --held["k" + c.key];
    if (c.type == CommandType::MouseDown) ++held["b" + std::string(to_string(c.button))];
    if (c.type == CommandType::MouseUp) --held["b" + std::string(to_string(c.button))];
    for (const auto& [k, n] : held)
      if (n < 0 || n > 1) return false;
  }
  return std::all_of(held.begin(), held.end(), [](auto& kv) { return kv.second == 0; });
}

TEST(RangeGate, DefaultDepthNeverSuppresses) {
  EXPECT_FALSE(range_suppressed({1e6, DepthSource::Default}, 100.0));
  EXPECT_TRUE(range_suppressed({2500, DepthSource::PoseMetric}, 2000.0));
  EXPECT_FALSE(range_suppressed({2000, DepthSource::PoseMetric}, 2000.0));
  EXPECT_FALSE(range_suppressed({1500, DepthSource::Iris}, 2000.0));
}

TEST(RangeGate, FarUserProducesNothing) {
  Engine engine(cycling_config());
  const auto frames = synth::cycling_trace(6.0, {.nose_mm = 2500.0});
  const auto cmds = run_all(engine, frames);
  EXPECT_TRUE(cmds.empty());
  EXPECT_TRUE(engine.telemetry().suppressed);
  EXPECT_TRUE(engine.exercise().active_labels().empty());
}

TEST(RangeGate, NearUserPassesThrough) {
  Engine engine(cycling_config());
  const auto cmds = run_all(engine, synth::cycling_trace(6.0, {.nose_mm = 1500.0}));
  EXPECT_FALSE(engine.telemetry().suppressed);
  ASSERT_EQ(count_type(cmds, CommandType::KeyDown), 1);
  EXPECT_EQ(cmds.front(), InputCommand::key_down(cmds.front().t_ms, "w"));
  EXPECT_TRUE(balanced(cmds));
}

TEST(RangeGate, UnknownDepthIsNotGated) {
  Engine engine(cycling_config(100.0));
  const auto cmds = run_all(engine, synth::cycling_trace(6.0));
  EXPECT_EQ(engine.telemetry().depth.source, DepthSource::Default);
  EXPECT_EQ(count_type(cmds, CommandType::KeyDown), 1);
}

TEST(Engine, RejectsTimeGoingBackwards) {
  Engine engine;
  (void)engine.step(synth::frame_at(100));
  (void)engine.step(synth::frame_at(100));
  try {
    (void)engine.step(synth::frame_at(50));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonMonotonicTime);
  }
}

TEST(Engine, FinishReleasesActiveHold) {
  // cycling still in progress when the stream ends
  Engine engine(cycling_config());
  const auto frames = synth::cycling_trace(6.0);
  std::vector<InputCommand> during;
  for (const auto& f : frames)
    for (auto& c : engine.step(f)) during.push_back(c);
  ASSERT_EQ(during.size(), 1u);
  EXPECT_FALSE(engine.balanced());
  const auto tail = engine.finish();
  EXPECT_EQ(tail, (std::vector<InputCommand>{InputCommand::key_up(frames.back().t_ms, "w")}));
  EXPECT_TRUE(engine.balanced());
}

TEST(Engine, PinchHoldReleasedWhenHandLeaves) {
  Engine engine;  // clinical: pinch holds the left button
  std::vector<InputCommand> cmds;
  int k = 0;
  const auto feed = [&](std::optional<double> gap, bool present) {
    auto f = synth::frame_at(k++ * kFrameMs);
    if (present) f.hands.push_back(synth::make_hand({.pinch_gap = gap}, f.image));
    for (auto& c : engine.step(f)) cmds.push_back(c);
  };
  for (int i = 0; i < 15; ++i) feed(0.6, true);
  for (int i = 0; i < 10; ++i) feed(0.05, true);
  ASSERT_EQ(count_type(cmds, CommandType::MouseDown), 1);
  for (int i = 0; i < 15; ++i) feed(std::nullopt, false);
  EXPECT_EQ(count_type(cmds, CommandType::MouseUp), 1);
  EXPECT_TRUE(engine.balanced());
  EXPECT_TRUE(engine.finish().empty());
}

TEST(Run, LenientSkipsBadLines) {
  Engine engine;
  std::istringstream in(serialize_frame(synth::frame_at(0)) + "\n" + "{not json\n" + "\n" +
                        R"({"t":10,"img":{"w":640,"h":480},"hands":[{"hand":"left","score":0.9,"lm":[]}]})" + "\n" +
                        serialize_frame(synth::frame_at(40)) + "\n" + serialize_frame(synth::frame_at(20)) + "\r\n" +
                        serialize_frame(synth::frame_at(80)) + "\n");
  VectorSink sink;
  std::ostringstream warnings;
  const RunStats s = run(engine, in, sink, {.warnings = &warnings});
  EXPECT_EQ(s.lines, 7u);
  EXPECT_EQ(s.frames, 3u);
  EXPECT_EQ(s.skipped, 3u);
  EXPECT_NE(warnings.str().find("line 2: skipped"), std::string::npos);
  EXPECT_NE(warnings.str().find("line 6: skipped: NonMonotonicTime"), std::string::npos);
}

TEST(Run, StrictStopsAtFirstBadLine) {
  Engine engine(cycling_config());
  auto frames = synth::cycling_trace(6.0);
  std::string text = to_ndjson(frames) + "{\"t\": 1e9, \"img\": {\"w\": 0, \"h\": 480}}\n";
  std::istringstream in(text);
  VectorSink sink;
  try {
    (void)run(engine, in, sink, {.strict = true});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaViolation);
    EXPECT_EQ(e.field(), "img.w");
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(frames.size() + 1)), std::string::npos);
  }
  // held keys are still released on the way out
  EXPECT_TRUE(balanced(sink.commands));
  EXPECT_EQ(count_type(sink.commands, CommandType::KeyUp), 1);
}

TEST(Run, EmptyInput) {
  Engine engine;
  std::istringstream in("");
  VectorSink sink;
  const RunStats s = run(engine, in, sink);
  EXPECT_EQ(s.lines, 0u);
  EXPECT_EQ(s.frames, 0u);
  EXPECT_TRUE(sink.commands.empty());
}

TEST(Run, DeterministicLog) {
  std::string text = to_ndjson(synth::cycling_trace(8.0, {.noise_deg = 2.0, .seed = 5}));
  const auto once = [&] {
    Engine engine(cycling_config());
    std::istringstream in(text);
    std::ostringstream out;
    LogSink sink(out);
    (void)run(engine, in, sink);
    return out.str();
  };
  const std::string a = once();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, once());
}

TEST(ApplyConfig, EpochAndThresholds) {
  Engine engine;
  EXPECT_EQ(engine.epoch(), 0u);
  (void)engine.step(synth::frame_at(0));
  EXPECT_EQ(engine.telemetry().epoch, 0u);
  (void)engine.apply_config(set_field(engine.config(), "head.ear_on", 0.22));
  EXPECT_EQ(engine.epoch(), 1u);
  EXPECT_EQ(engine.config().head.ear_on, 0.22);
  (void)engine.step(synth::frame_at(33));
  EXPECT_EQ(engine.telemetry().epoch, 1u);
  EXPECT_EQ(engine.telemetry().frame, 1u);
}

TEST(ApplyConfig, InvalidConfigLeavesEngineUnchanged) {
  Engine engine;
  EngineConfig bad = engine.config();
  bad.max_range_mm = -1.0;
  EXPECT_THROW((void)engine.apply_config(bad), Error);
  bad = engine.config();
  bad.profile = "nope";
  EXPECT_THROW((void)engine.apply_config(bad), Error);
  EXPECT_EQ(engine.epoch(), 0u);
  EXPECT_EQ(engine.config().max_range_mm, 2000.0);
  EXPECT_EQ(engine.profile().name, "clinical");
}

TEST(ApplyConfig, ProfileSwitchReleasesHolds) {
  Engine engine(cycling_config());
  for (const auto& f : synth::cycling_trace(6.0)) (void)engine.step(f);
  ASSERT_FALSE(engine.balanced());
  const auto cmds = engine.apply_config(set_field(engine.config(), "profile", "clinical"));
  EXPECT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds.at(0).type, CommandType::KeyUp);
  EXPECT_TRUE(engine.balanced());
  EXPECT_TRUE(engine.finish().empty());
}

TEST(ApplyConfig, DisablingExerciseDeactivates) {
  Engine engine(cycling_config());
  for (const auto& f : synth::cycling_trace(6.0)) (void)engine.step(f);
  EngineConfig next = engine.config();
  next.modules.exercise = false;
  next.modules.hand = true;
  const auto cmds = engine.apply_config(next);
  EXPECT_EQ(cmds, (std::vector<InputCommand>{InputCommand::key_up(cmds.at(0).t_ms, "w")}));
  EXPECT_TRUE(engine.balanced());
}

// Hand and head both steer the cursor; per frame only one source may win.
TEST(CursorPriority, HandBeatsHead) {
  for (const bool head_first : {false, true}) {
    EngineConfig c = config_from(R"({"modules": {"hand": true, "head": true}})");
    if (head_first) c = set_field(c, "cursor_priority", nlohmann::json::array({"head", "hand", "gaze"}));
    Engine engine(c);
    std::set<SourceModule> winners;
    for (int k = 0; k < 90; ++k) {
      auto f = synth::frame_at(k * kFrameMs);
      f.hands.push_back(synth::make_hand({.wrist_px = {250.0 + 1.5 * k, 360.0}}, f.image));
      f.face = synth::make_face({.yaw_deg = k < 5 ? 0.0 : 12.0}, f.image);  // slow enough to stay on screen
      (void)engine.step(f);
      std::set<SourceModule> sources;
      for (const auto& e : engine.telemetry().recent_events)
        if (e.t_ms == f.t_ms && e.kind == EventKind::CursorMove) sources.insert(e.source);
      EXPECT_LE(sources.size(), 1u);
      if (k > 30) winners.insert(sources.begin(), sources.end());
    }
    EXPECT_EQ(winners, (std::set<SourceModule>{head_first ? SourceModule::Head : SourceModule::Hand}));
  }
}

TEST(Telemetry, JsonShape) {
  Engine engine(config_from(R"({"modules": {"hand": true, "head": true, "gaze": true, "exercise": true}})"));
  auto f = synth::frame_at(0);
  f.face = synth::make_face({.iris_px = 20.0}, f.image);
  f.pose = synth::make_pose({}, f.image);
  (void)engine.step(f);
  const auto j = engine.telemetry().to_json();
  EXPECT_EQ(j["type"], "telemetry");
  EXPECT_EQ(j["depth"]["source"], "iris");
  EXPECT_TRUE(j["ear_l"].is_number());
  EXPECT_TRUE(j["head_pose"].is_object());
  EXPECT_TRUE(j["pinch"].is_null());
  EXPECT_TRUE(j["events"].is_array());
}

TEST(Recording, BuildsTemplateFromFrames) {
  Engine engine(config_from(R"({"modules": {"exercise": true}})"));
  engine.start_recording("arms", TemplateMode::WhileActive);
  for (int k = 0; k < 10; ++k) {
    auto f = synth::frame_at(k * kFrameMs);
    f.pose = synth::make_pose({.knee_l = 120, .knee_r = 120}, f.image);
    (void)engine.step(f);
  }
  const auto t = engine.stop_recording();
  EXPECT_EQ(t.name, "arms");
  EXPECT_NEAR(t.means.at(Feature::KneeL), 120.0, 1e-6);
  EXPECT_THROW((void)engine.stop_recording(), Error);
}

}  // namespace
