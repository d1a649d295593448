#pragma once

// The per-frame pipeline: range gate -> hand, head, gaze, exercise ->
// cursor contention -> bindings -> held-input bookkeeping -> sink.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/binding.hpp"
#include "touchless/commands.hpp"
#include "touchless/config.hpp"
#include "touchless/events.hpp"
#include "touchless/exercise.hpp"
#include "touchless/face_head.hpp"
#include "touchless/frame.hpp"
#include "touchless/frame_io.hpp"
#include "touchless/gaze.hpp"
#include "touchless/hand.hpp"

namespace touchless {

// True when the frame must be treated as if nobody were there. A default
// (guessed) depth never suppresses.
inline bool range_suppressed(const DepthEstimate& depth, double max_range_mm) noexcept {
  return depth.source != DepthSource::Default && depth.depth_mm > max_range_mm;
}

inline LandmarkFrame range_gate(const LandmarkFrame& frame, const DepthEstimate& depth, double max_range_mm) {
  if (!range_suppressed(depth, max_range_mm)) return frame;
  LandmarkFrame empty;
  empty.t_ms = frame.t_ms;
  empty.image = frame.image;
  return empty;
}

inline nlohmann::ordered_json event_to_json(const GestureEvent& e) {
  nlohmann::ordered_json j;
  j["t"] = detail::number_out(e.t_ms);
  j["source"] = std::string(to_string(e.source));
  j["kind"] = std::string(to_string(e.kind));
  if (!e.label.empty()) j["label"] = e.label;
  if (e.kind == EventKind::CursorMove) {
    j["x"] = detail::number_out(e.cursor.x);
    j["y"] = detail::number_out(e.cursor.y);
  }
  if (e.kind == EventKind::Scroll) j["scroll"] = e.scroll;
  if (e.confidence != 0.0) j["confidence"] = e.confidence;
  return j;
}

inline constexpr std::size_t kRecentEvents = 20;

// Immutable per-frame snapshot for the control channel.
struct Telemetry {
  std::uint64_t frame = 0;  // index of the frame this describes
  std::uint64_t epoch = 0;  // config epoch the frame was processed under
  double t_ms = 0.0;
  bool suppressed = false;
  DepthEstimate depth;
  std::optional<double> ear_left;
  std::optional<double> ear_right;
  std::optional<double> mar;
  std::optional<HeadPose> head_pose;
  std::optional<double> pinch_ratio;
  std::optional<DAoI> daoi;
  std::optional<Vec2> gaze_point;
  std::vector<std::string> active_labels;
  std::vector<std::pair<std::string, double>> template_confidences;
  std::deque<GestureEvent> recent_events;
  std::optional<std::string> recording;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    using oj = nlohmann::ordered_json;
    const auto opt = [](const std::optional<double>& v) -> oj { return v ? oj(*v) : oj(nullptr); };
    oj j;
    j["type"] = "telemetry";
    j["frame"] = frame;
    j["epoch"] = epoch;
    j["t"] = detail::number_out(t_ms);
    j["suppressed"] = suppressed;
    j["depth"] = {{"mm", depth.depth_mm}, {"source", std::string(to_string(depth.source))}};
    j["ear_l"] = opt(ear_left);
    j["ear_r"] = opt(ear_right);
    j["mar"] = opt(mar);
    j["head_pose"] = head_pose ? oj{{"yaw", head_pose->yaw}, {"pitch", head_pose->pitch}, {"roll", head_pose->roll}}
                               : oj(nullptr);
    j["pinch"] = opt(pinch_ratio);
    j["daoi"] = daoi ? oj{{"left", daoi->left()}, {"top", daoi->top()}, {"right", daoi->right()}, {"bottom", daoi->bottom()}}
                     : oj(nullptr);
    j["gaze"] = gaze_point ? oj{{"x", gaze_point->x}, {"y", gaze_point->y}} : oj(nullptr);
    j["active"] = active_labels;
    oj templates = oj::object();
    for (const auto& [name, c] : template_confidences) templates[name] = c;
    j["templates"] = std::move(templates);
    oj events = oj::array();
    for (const auto& e : recent_events) events.push_back(event_to_json(e));
    j["events"] = std::move(events);
    j["recording"] = recording ? oj(*recording) : oj(nullptr);
    return j;
  }
};

class Engine {
 public:
  explicit Engine(EngineConfig config = load_config(nlohmann::json()))
      : config_(std::move(config)),
        profile_(config_.active_profile()),
        hand_(config_.hand),
        head_(config_.head),
        gaze_(config_.gaze),
        exercise_(config_.exercise, config_.templates) {}

  // Swaps in a new configuration between frames. Module state is kept; only
  // thresholds change. Holds that the change would orphan (module switched
  // off, profile switched) are released first.
  std::vector<InputCommand> apply_config(EngineConfig next) {
    validate_config(next);
    std::vector<GestureEvent> releases;
    const double t = last_t_ms_.value_or(0.0);
    const auto disabled = [&](bool was, bool now, SourceModule m) {
      if (was && !now) release_open(t, releases, [m](SourceModule s) { return s == m; });
    };
    disabled(config_.modules.hand, next.modules.hand, SourceModule::Hand);
    disabled(config_.modules.head, next.modules.head, SourceModule::Head);
    disabled(config_.modules.gaze, next.modules.gaze, SourceModule::Gaze);
    if (config_.modules.exercise && !next.modules.exercise) exercise_.finish(t, releases);
    if (next.profile != config_.profile || next.user_profiles != config_.user_profiles)
      release_open(t, releases, [](SourceModule) { return true; });
    auto commands = dispatch(releases);

    const BindingProfile profile = next.active_profile();
    if (next.hand != config_.hand) hand_.set_params(next.hand);
    if (next.head != config_.head) head_.set_params(next.head);
    if (next.gaze != config_.gaze) gaze_.set_params(next.gaze);
    if (next.exercise != config_.exercise) exercise_.set_params(next.exercise);
    if (next.templates != config_.templates) {
      std::vector<GestureEvent> off;
      exercise_.set_templates(next.templates, t, off);
      auto more = dispatch(off);
      commands.insert(commands.end(), more.begin(), more.end());
    }
    if (!config_.modules.hand && next.modules.hand) hand_ = HandModule(next.hand);
    if (!config_.modules.head && next.modules.head) head_ = HeadModule(next.head);
    if (!config_.modules.gaze && next.modules.gaze) gaze_ = GazeModule(next.gaze);
    if (!config_.modules.exercise && next.modules.exercise) {
      std::vector<GestureEvent> unused;
      exercise_.finish(t, unused);
    }
    config_ = std::move(next);
    profile_ = profile;
    ++epoch_;
    return commands;
  }

  std::vector<InputCommand> step(const LandmarkFrame& input) {
    if (last_t_ms_ && input.t_ms < *last_t_ms_)
      throw Error(ErrorKind::NonMonotonicTime,
                  "frame at t=" + std::to_string(input.t_ms) + " follows t=" + std::to_string(*last_t_ms_));
    last_t_ms_ = input.t_ms;

    Telemetry tel;
    tel.frame = frame_index_;
    tel.epoch = epoch_;
    tel.t_ms = input.t_ms;

    const CameraModel camera = config_.camera_for(input.image);
    tel.depth = resolve_depth(input, camera, config_.hand.depth_k_mm_px, config_.default_depth_mm,
                              config_.gaze.iris_mm, config_.hand.cursor_hand);
    tel.suppressed = range_suppressed(tel.depth, config_.max_range_mm);
    const LandmarkFrame frame = range_gate(input, tel.depth, config_.max_range_mm);

    std::vector<GestureEvent> events;
    const auto append = [&](std::vector<GestureEvent>&& more) {
      events.insert(events.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    };
    const ScreenSize screen = config_.screen_size();
    if (config_.modules.hand) {
      append(hand_.step(frame, screen));
      const HandTracker& cursor = hand_.tracker(config_.hand.cursor_hand);
      const HandTracker& other = hand_.tracker(config_.hand.cursor_hand == Handedness::Right ? Handedness::Left
                                                                                          : Handedness::Right);
      tel.pinch_ratio = cursor.last_pinch_ratio() ? cursor.last_pinch_ratio() : other.last_pinch_ratio();
      tel.daoi = cursor.daoi() ? cursor.daoi() : other.daoi();
    }
    if (config_.modules.head) {
      append(head_.step(frame.face ? &*frame.face : nullptr, frame.image, screen, frame.t_ms));
      const auto& h = head_.telemetry();
      tel.ear_left = h.ear_left;
      tel.ear_right = h.ear_right;
      tel.mar = h.mar;
      tel.head_pose = h.pose;
    }
    if (config_.modules.gaze) {
      append(gaze_.step(frame, tel.depth, camera, config_.screen));
      tel.gaze_point = gaze_.last_point();
    }
    if (config_.modules.exercise) {
      append(exercise_.step(frame.pose ? &*frame.pose : nullptr, frame.image, frame.t_ms));
      tel.active_labels = exercise_.active_labels();
      tel.template_confidences = exercise_.template_confidences();
    }
    if (recording_ && frame.pose) {
      recorded_.push_back(config_.modules.exercise && exercise_.features()
                              ? *exercise_.features()
                              : extract_features(*frame.pose, frame.image, config_.exercise.min_visibility));
    }

    resolve_cursor_contention(events);
    auto commands = dispatch(events);

    for (const auto& e : events) {
      recent_.push_back(e);
      if (recent_.size() > kRecentEvents) recent_.pop_front();
    }
    tel.recent_events = recent_;
    if (recording_) tel.recording = recording_->first;
    telemetry_ = std::move(tel);
    event_count_ += events.size();
    ++frame_index_;
    return commands;
  }

  // End of session: deactivates exercise labels, releases open presses,
  // then anything still held.
  std::vector<InputCommand> finish() {
    const double t = last_t_ms_.value_or(0.0);
    std::vector<GestureEvent> events;
    if (config_.modules.exercise) exercise_.finish(t, events);
    release_open(t, events, [](SourceModule) { return true; });
    auto commands = dispatch(events);
    for (auto& c : held_.release_all(t)) commands.push_back(c);
    return commands;
  }

  void start_recording(std::string name, TemplateMode mode) {
    recording_ = {std::move(name), mode};
    recorded_.clear();
  }

  // Builds the template from the frames seen since start_recording.
  GestureTemplate stop_recording() {
    if (!recording_) throw Error(ErrorKind::EmptyTemplate, "no recording in progress");
    auto [name, mode] = *recording_;
    recording_.reset();
    auto frames = std::move(recorded_);
    recorded_.clear();
    return record_template(frames, name, mode);
  }

  [[nodiscard]] const EngineConfig& config() const noexcept { return config_; }
  [[nodiscard]] const BindingProfile& profile() const noexcept { return profile_; }
  [[nodiscard]] std::uint64_t frame_index() const noexcept { return frame_index_; }
  [[nodiscard]] std::uint64_t epoch() const noexcept { return epoch_; }
  [[nodiscard]] std::uint64_t event_count() const noexcept { return event_count_; }
  [[nodiscard]] const Telemetry& telemetry() const noexcept { return telemetry_; }
  [[nodiscard]] const ExerciseModule& exercise() const noexcept { return exercise_; }
  [[nodiscard]] const HandModule& hand() const noexcept { return hand_; }
  [[nodiscard]] const HeadModule& head() const noexcept { return head_; }
  [[nodiscard]] bool balanced() const { return held_.empty(); }

 private:
  // Hand > gaze > head by default: only the highest-priority source that
  // produced a CursorMove this frame keeps it.
  void resolve_cursor_contention(std::vector<GestureEvent>& events) const {
    std::optional<SourceModule> winner;
    for (const SourceModule m : config_.cursor_priority) {
      const bool moved = std::any_of(events.begin(), events.end(), [m](const GestureEvent& e) {
        return e.kind == EventKind::CursorMove && e.source == m;
      });
      if (moved) {
        winner = m;
        break;
      }
    }
    if (!winner) return;
    std::erase_if(events, [&](const GestureEvent& e) { return e.kind == EventKind::CursorMove && e.source != *winner; });
  }

  std::vector<InputCommand> dispatch(const std::vector<GestureEvent>& events) {
    std::vector<InputCommand> raw;
    for (const auto& e : events) {
      std::optional<Vec2> previous;
      if (e.kind == EventKind::CursorMove) {
        const auto it = last_cursor_.find(e.source);
        if (it != last_cursor_.end()) previous = it->second;
        last_cursor_[e.source] = e.cursor;
      }
      track_open(e);
      auto cmds = touchless::bind(e, profile_, previous);
      raw.insert(raw.end(), cmds.begin(), cmds.end());
    }
    return held_.filter(raw);
  }

  // Remembers presses whose binding holds something down, so their release
  // can be synthesized if the producing module goes away.
  void track_open(const GestureEvent& e) {
    if (const auto release = release_of(e.kind)) {
      const auto* b = detail::find_binding(profile_, e.kind, e.label);
      if (b && is_hold(b->action)) open_.insert({e.source, e.kind, e.label});
    } else if (const auto press = press_of(e.kind)) {
      open_.erase({e.source, *press, e.label});
    }
  }

  template <typename Pred>
  void release_open(double t_ms, std::vector<GestureEvent>& out, Pred pred) {
    for (auto it = open_.begin(); it != open_.end();) {
      const auto& [source, kind, label] = *it;
      if (pred(source)) {
        out.push_back(GestureEvent{.t_ms = t_ms, .source = source, .kind = *release_of(kind), .label = label});
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
  }

  EngineConfig config_;
  BindingProfile profile_;
  HandModule hand_;
  HeadModule head_;
  GazeModule gaze_;
  ExerciseModule exercise_;
  HeldInputs held_;
  std::set<std::tuple<SourceModule, EventKind, std::string>> open_;
  std::map<SourceModule, Vec2> last_cursor_;
  std::deque<GestureEvent> recent_;
  Telemetry telemetry_;
  std::optional<double> last_t_ms_;
  std::uint64_t frame_index_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint64_t event_count_ = 0;
  std::optional<std::pair<std::string, TemplateMode>> recording_;
  std::vector<PoseFeatures> recorded_;
};

// Hooks the run loop calls at frame boundaries; the control server
// implements this.
class FrameObserver {
 public:
  virtual ~FrameObserver() = default;
  // Before each input line; may reconfigure the engine. Changes applied here
  // take effect at frame engine.frame_index().
  virtual std::vector<InputCommand> before_frame(Engine& engine) = 0;
  // After a frame was processed; the engine's telemetry describes it.
  virtual void after_frame(const Engine& engine) = 0;
  // End of the stream.
  virtual void stopped() {}
};

struct RunOptions {
  bool strict = false;
  FrameObserver* observer = nullptr;
  std::ostream* warnings = nullptr;
};

struct RunStats {
  std::uint64_t lines = 0;
  std::uint64_t frames = 0;
  std::uint64_t skipped = 0;
  std::uint64_t suppressed = 0;
  std::uint64_t events = 0;
  std::uint64_t commands = 0;
  nlohmann::ordered_json exercise = nlohmann::ordered_json::object();

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    return {{"lines", lines},   {"frames", frames},     {"skipped", skipped},   {"suppressed", suppressed},
            {"events", events}, {"commands", commands}, {"exercise", exercise}};
  }
};

// Streams NDJSON frames from `in` through the engine until EOF. Lenient mode
// skips bad lines (malformed, schema violations, out-of-order time) with a
// warning; strict mode stops at the first one and rethrows. Either way every
// held key/button is released before returning.
inline RunStats run(Engine& engine, std::istream& in, InputSink& sink, const RunOptions& options = {}) {
  RunStats stats;
  const auto emit = [&](const std::vector<InputCommand>& commands) {
    for (const auto& c : commands) sink.emit(c);
    stats.commands += commands.size();
  };
  const auto close = [&] {
    if (options.observer) options.observer->stopped();
    emit(engine.finish());
    sink.flush();
    stats.events = engine.event_count();
    stats.exercise = engine.exercise().stats().to_json();
  };

  std::string line;
  try {
    while (std::getline(in, line)) {
      ++stats.lines;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (options.observer) emit(options.observer->before_frame(engine));
      try {
        const LandmarkFrame frame = parse_frame(line);
        emit(engine.step(frame));
      } catch (const Error& e) {
        if (options.strict) throw Error(e.kind(), "line " + std::to_string(stats.lines) + ": " + e.detail(), e.field());
        ++stats.skipped;
        if (options.warnings) *options.warnings << "line " << stats.lines << ": skipped: " << e.what() << '\n';
        continue;
      }
      ++stats.frames;
      if (engine.telemetry().suppressed) ++stats.suppressed;
      if (options.observer) options.observer->after_frame(engine);
    }
  } catch (...) {
    close();
    throw;
  }
  close();
  return stats;
}

}  // namespace touchless
