#pragma once

// Engine configuration document.
//
// JSON with // and /* */ comments allowed. Every key is optional; unknown
// keys are rejected. Defaults (see config_to_json(EngineConfig{}) or
// `engine config` without --config for the complete tree):
//
//   modules.{hand,head,gaze,exercise}  true,false,false,false
//   mode                 "sitting" | "standing"
//   max_range_mm         2000    range gate; frames farther away count as absent
//   default_depth_mm     600     depth used when no depth cue is available
//   profile              "clinical"  (gaming, creativity, clinical or a user profile)
//   sink                 "null" | "log:PATH"
//   cursor_priority      ["hand","gaze","head"]
//   screen               width_px, height_px, width_mm, height_mm,
//                        camera_offset_x_mm, camera_offset_y_mm
//   camera               f_px, cx, cy (null: derived from the image size)
//   camera_file          path to a {"f_px","cx","cy"} document, or null
//   filter               fc_min, beta, d_cutoff (pointer/angle smoothing)
//   hand, head, gaze, exercise   module thresholds
//   exercise.templates   path to a template NDJSON file, or null
//   profiles             user binding profiles: {"name": [binding, ...]}

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/binding.hpp"
#include "touchless/error.hpp"
#include "touchless/exercise.hpp"
#include "touchless/face_head.hpp"
#include "touchless/frame_io.hpp"
#include "touchless/gaze.hpp"
#include "touchless/hand.hpp"

namespace touchless {

struct ModuleFlags {
  bool hand = true;
  bool head = false;
  bool gaze = false;
  bool exercise = false;

  friend bool operator==(const ModuleFlags&, const ModuleFlags&) = default;
};

enum class SessionMode { Sitting, Standing };

struct EngineConfig {
  ModuleFlags modules;
  SessionMode mode = SessionMode::Sitting;
  double max_range_mm = 2000.0;
  double default_depth_mm = 600.0;
  std::string profile = "clinical";
  std::string sink = "null";
  std::array<SourceModule, 3> cursor_priority{SourceModule::Hand, SourceModule::Gaze, SourceModule::Head};
  ScreenGeometry screen;
  std::optional<CameraModel> camera;
  std::optional<std::string> camera_file;
  LowPassParams filter;
  HandParams hand;
  HeadParams head;
  GazeParams gaze;
  ExerciseParams exercise;
  std::optional<std::string> templates_path;
  std::map<std::string, BindingProfile> user_profiles;

  // Resolved from files; not part of the document.
  std::vector<GestureTemplate> templates;
  std::string base_dir;

  [[nodiscard]] ScreenSize screen_size() const noexcept { return {screen.width_px, screen.height_px}; }

  [[nodiscard]] BindingProfile active_profile() const {
    if (const auto it = user_profiles.find(profile); it != user_profiles.end()) return it->second;
    const auto shipped = shipped_profiles();
    if (const auto it = shipped.find(profile); it != shipped.end()) return it->second;
    throw Error(ErrorKind::ConfigError, "profile '" + profile + "' does not exist", "profile");
  }

  [[nodiscard]] CameraModel camera_for(ImageSize image) const noexcept {
    return camera ? *camera : CameraModel::approximate(image);
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ConfigError, field + " " + what, field);
}

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads one object level, checking types and remembering which keys were
// consumed so that leftovers can be reported.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "config" : path_, "must be an object");
  }

  const nlohmann::json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) config_error(field(key), "must be a number");
      out = v->get<double>();
    }
  }

  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const auto* v = find(key)) {
      if (v->is_null()) out.reset();
      else if (!v->is_number() || !std::isfinite(v->get<double>())) config_error(field(key), "must be a number or null");
      else out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) config_error(field(key), "must be an integer");
      out = v->get<int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) config_error(field(key), "must be true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) config_error(field(key), "must be a string");
      out = v->get<std::string>();
    }
  }

  void optional_string(const std::string& key, std::optional<std::string>& out) {
    if (const auto* v = find(key)) {
      if (v->is_null()) out.reset();
      else if (!v->is_string()) config_error(field(key), "must be a string or null");
      else out = v->get<std::string>();
    }
  }

  template <typename Fn>
  void section(const std::string& key, Fn&& fn) {
    if (const auto* v = find(key)) {
      ConfigReader sub(*v, field(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) config_error(field(key), "is not a known setting");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return join_path(path_, key); }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_filter(ConfigReader& r, LowPassParams& f) {
  r.number("fc_min", f.fc_min);
  r.number("beta", f.beta);
  r.number("d_cutoff", f.d_cutoff);
}

inline void read_hand(ConfigReader& r, HandParams& h) {
  r.number("pinch_on", h.pinch_on);
  r.number("pinch_off", h.pinch_off);
  r.number("idle_hold_ms", h.idle_hold_ms);
  r.number("extended_deg", h.extended_deg);
  r.number("bent_deg", h.bent_deg);
  r.number("c_scale", h.c_scale);
  r.number("scroll_gain", h.scroll_gain);
  r.number("scroll_deadband", h.scroll_deadband);
  std::string side = h.cursor_hand == Handedness::Left ? "left" : "right";
  r.string("cursor_hand", side);
  if (side == "left") h.cursor_hand = Handedness::Left;
  else if (side == "right") h.cursor_hand = Handedness::Right;
  else config_error(r.field("cursor_hand"), "must be \"left\" or \"right\"");
  r.optional_number("depth_k_mm_px", h.depth_k_mm_px);
}

inline constexpr std::array<std::pair<HeadMode, const char*>, 3> kHeadModeNames{{
    {HeadMode::Cursor, "cursor"}, {HeadMode::Scroll, "scroll"}, {HeadMode::TriggersOnly, "triggers"}}};

inline void read_head(ConfigReader& r, HeadParams& h) {
  r.number("ear_on", h.ear_on);
  r.number("ear_off", h.ear_off);
  r.number("mar_on", h.mar_on);
  r.number("mar_off", h.mar_off);
  r.integer("blink_frames", h.blink_frames);
  r.integer("wink_frames", h.wink_frames);
  r.number("profile_deg", h.profile_deg);
  r.number("profile_rearm_deg", h.profile_rearm_deg);
  r.number("profile_hold_ms", h.profile_hold_ms);
  r.number("pitch_ratio", h.pitch_ratio);
  std::string mode;
  for (const auto& [m, name] : kHeadModeNames)
    if (m == h.mode) mode = name;
  r.string("mode", mode);
  bool known = false;
  for (const auto& [m, name] : kHeadModeNames) {
    if (mode == name) {
      h.mode = m;
      known = true;
    }
  }
  if (!known) config_error(r.field("mode"), "must be \"cursor\", \"scroll\" or \"triggers\"");
  r.number("deadzone_deg", h.deadzone_deg);
  r.number("cursor_gain", h.cursor_gain);
  r.number("scroll_threshold_deg", h.scroll_threshold_deg);
  r.number("scroll_gain", h.scroll_gain);
}

inline void read_exercise(ConfigReader& r, ExerciseParams& e, std::optional<std::string>& templates) {
  r.number("squat_down_deg", e.squat_down_deg);
  r.number("squat_up_deg", e.squat_up_deg);
  r.number("jump_rise", e.jump_rise);
  r.number("jump_return_ms", e.jump_return_ms);
  r.number("baseline_ms", e.baseline_ms);
  r.number("punch_low", e.punch_low);
  r.number("punch_high", e.punch_high);
  r.number("punch_window_ms", e.punch_window_ms);
  r.number("kick_rise", e.kick_rise);
  r.number("refractory_ms", e.refractory_ms);
  r.number("cycle_band_deg", e.cycle_band_deg);
  r.number("cycle_band_deg_sitting", e.cycle_band_deg_sitting);
  r.number("cycle_min_half_ms", e.cycle_min_half_ms);
  r.number("cycle_max_half_ms", e.cycle_max_half_ms);
  r.number("cycle_timeout_ms", e.cycle_timeout_ms);
  r.number("template_on", e.template_on);
  r.number("template_off", e.template_off);
  r.number("min_visibility", e.min_visibility);
  r.optional_string("templates", templates);
}

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) config_error(field, what);
}

}  // namespace detail

inline void validate_config(const EngineConfig& c) {
  using detail::require;
  require(c.max_range_mm > 0.0, "max_range_mm", "must be > 0");
  require(c.default_depth_mm > 0.0, "default_depth_mm", "must be > 0");
  require(c.modules.hand || c.modules.head || c.modules.gaze || c.modules.exercise, "modules",
          "must enable at least one module");
  {
    std::set<SourceModule> seen(c.cursor_priority.begin(), c.cursor_priority.end());
    require(seen.size() == 3 && !seen.contains(SourceModule::Exercise), "cursor_priority",
            "must list \"hand\", \"gaze\" and \"head\" once each");
  }
  require(c.sink == "null" || (c.sink.starts_with("log:") && c.sink.size() > 4), "sink",
          "must be \"null\" or \"log:PATH\"");
  require(c.screen.width_px > 0 && c.screen.height_px > 0, "screen.width_px", "and screen.height_px must be > 0");
  require(c.screen.width_mm > 0.0 && c.screen.height_mm > 0.0, "screen.width_mm", "and screen.height_mm must be > 0");
  if (c.camera) require(c.camera->f_px > 0.0, "camera.f_px", "must be > 0");
  require(c.filter.fc_min > 0.0, "filter.fc_min", "must be > 0");
  require(c.filter.beta >= 0.0, "filter.beta", "must be >= 0");
  require(c.filter.d_cutoff > 0.0, "filter.d_cutoff", "must be > 0");

  const auto& h = c.hand;
  require(h.pinch_on > 0.0 && h.pinch_on < h.pinch_off, "hand.pinch_on", "must be > 0 and < hand.pinch_off");
  require(h.idle_hold_ms >= 0.0, "hand.idle_hold_ms", "must be >= 0");
  require(h.bent_deg < h.extended_deg && h.extended_deg <= 180.0, "hand.bent_deg",
          "must be < hand.extended_deg <= 180");
  require(h.c_scale > 0.0, "hand.c_scale", "must be > 0");
  require(h.scroll_deadband >= 0.0, "hand.scroll_deadband", "must be >= 0");
  if (h.depth_k_mm_px) require(*h.depth_k_mm_px > 0.0, "hand.depth_k_mm_px", "must be > 0");

  const auto& hd = c.head;
  require(hd.ear_on > 0.0 && hd.ear_on < hd.ear_off, "head.ear_on", "must be > 0 and < head.ear_off");
  require(hd.mar_off > 0.0 && hd.mar_on > hd.mar_off, "head.mar_on", "must be > head.mar_off > 0");
  require(hd.blink_frames >= 1, "head.blink_frames", "must be >= 1");
  require(hd.wink_frames >= 1, "head.wink_frames", "must be >= 1");
  require(hd.profile_rearm_deg > 0.0 && hd.profile_rearm_deg <= hd.profile_deg && hd.profile_deg < 90.0,
          "head.profile_rearm_deg", "must be in (0, head.profile_deg] and head.profile_deg < 90");
  require(hd.profile_hold_ms >= 0.0, "head.profile_hold_ms", "must be >= 0");
  require(hd.pitch_ratio > 0.0 && hd.pitch_ratio < 1.0, "head.pitch_ratio", "must be in (0, 1)");
  require(hd.deadzone_deg >= 0.0, "head.deadzone_deg", "must be >= 0");
  require(hd.scroll_threshold_deg >= 0.0, "head.scroll_threshold_deg", "must be >= 0");

  require(c.gaze.iris_mm > 0.0, "gaze.iris_mm", "must be > 0");

  const auto& e = c.exercise;
  require(e.squat_down_deg < e.squat_up_deg, "exercise.squat_down_deg", "must be < exercise.squat_up_deg");
  require(e.jump_rise > 0.0, "exercise.jump_rise", "must be > 0");
  require(e.jump_return_ms > 0.0, "exercise.jump_return_ms", "must be > 0");
  require(e.baseline_ms > 0.0, "exercise.baseline_ms", "must be > 0");
  require(e.punch_low < e.punch_high, "exercise.punch_low", "must be < exercise.punch_high");
  require(e.punch_window_ms > 0.0, "exercise.punch_window_ms", "must be > 0");
  require(e.kick_rise > 0.0, "exercise.kick_rise", "must be > 0");
  require(e.refractory_ms >= 0.0, "exercise.refractory_ms", "must be >= 0");
  require(e.cycle_band_deg >= 0.0 && e.cycle_band_deg_sitting >= 0.0, "exercise.cycle_band_deg", "must be >= 0");
  require(e.cycle_min_half_ms < e.cycle_max_half_ms, "exercise.cycle_min_half_ms",
          "must be < exercise.cycle_max_half_ms");
  require(e.cycle_timeout_ms > 0.0, "exercise.cycle_timeout_ms", "must be > 0");
  require(e.template_off < e.template_on && e.template_on <= 1.0, "exercise.template_on",
          "must be > exercise.template_off and <= 1");
  require(e.min_visibility >= 0.0 && e.min_visibility <= 1.0, "exercise.min_visibility", "must be in [0, 1]");

  for (const auto& [name, p] : c.user_profiles) validate_profile(p);
  (void)c.active_profile();
}

// Copies the shared sections into the module parameter blocks.
inline void sync_module_params(EngineConfig& c) {
  c.hand.filter = c.filter;
  c.head.filter = c.filter;
  c.gaze.filter = c.filter;
  c.gaze.pitch_ratio = c.head.pitch_ratio;
  c.exercise.standing = c.mode == SessionMode::Standing;
}

// Parses and validates a configuration document; unspecified keys keep their
// defaults. File references (camera_file, exercise.templates) are recorded
// but not read; see resolve_config_files.
inline EngineConfig load_config(const nlohmann::json& doc) {
  EngineConfig c;
  if (doc.is_null()) {
    sync_module_params(c);
    validate_config(c);
    return c;
  }
  detail::ConfigReader r(doc, "");
  r.section("modules", [&](detail::ConfigReader& m) {
    m.boolean("hand", c.modules.hand);
    m.boolean("head", c.modules.head);
    m.boolean("gaze", c.modules.gaze);
    m.boolean("exercise", c.modules.exercise);
  });
  std::string mode = "sitting";
  r.string("mode", mode);
  if (mode == "sitting") c.mode = SessionMode::Sitting;
  else if (mode == "standing") c.mode = SessionMode::Standing;
  else detail::config_error("mode", "must be \"sitting\" or \"standing\"");
  r.number("max_range_mm", c.max_range_mm);
  r.number("default_depth_mm", c.default_depth_mm);
  r.string("profile", c.profile);
  r.string("sink", c.sink);
  if (const auto* p = r.find("cursor_priority")) {
    if (!p->is_array() || p->size() != 3)
      detail::config_error("cursor_priority", "must list \"hand\", \"gaze\" and \"head\" once each");
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string name = (*p)[i].is_string() ? (*p)[i].get<std::string>() : "";
      if (name == "hand") c.cursor_priority[i] = SourceModule::Hand;
      else if (name == "gaze") c.cursor_priority[i] = SourceModule::Gaze;
      else if (name == "head") c.cursor_priority[i] = SourceModule::Head;
      else detail::config_error("cursor_priority", "must list \"hand\", \"gaze\" and \"head\" once each");
    }
  }
  r.section("screen", [&](detail::ConfigReader& s) {
    s.integer("width_px", c.screen.width_px);
    s.integer("height_px", c.screen.height_px);
    s.number("width_mm", c.screen.width_mm);
    s.number("height_mm", c.screen.height_mm);
    s.number("camera_offset_x_mm", c.screen.camera_offset_mm.x);
    s.number("camera_offset_y_mm", c.screen.camera_offset_mm.y);
  });
  r.section("camera", [&](detail::ConfigReader& s) {
    std::optional<double> f, cx, cy;
    s.optional_number("f_px", f);
    s.optional_number("cx", cx);
    s.optional_number("cy", cy);
    if (f || cx || cy) {
      if (!(f && cx && cy)) detail::config_error("camera", "needs f_px, cx and cy together");
      c.camera = CameraModel{*f, *cx, *cy};
    }
  });
  r.optional_string("camera_file", c.camera_file);
  r.section("filter", [&](detail::ConfigReader& s) { detail::read_filter(s, c.filter); });
  r.section("hand", [&](detail::ConfigReader& s) { detail::read_hand(s, c.hand); });
  r.section("head", [&](detail::ConfigReader& s) { detail::read_head(s, c.head); });
  r.section("gaze", [&](detail::ConfigReader& s) {
    s.number("iris_mm", c.gaze.iris_mm);
    s.number("iris_gain_deg", c.gaze.iris_gain_deg);
  });
  r.section("exercise", [&](detail::ConfigReader& s) { detail::read_exercise(s, c.exercise, c.templates_path); });
  if (const auto* profiles = r.find("profiles")) {
    if (!profiles->is_object()) detail::config_error("profiles", "must be an object of name -> bindings");
    for (const auto& [name, bindings] : profiles->items()) c.user_profiles[name] = profile_from_json(name, bindings);
  }
  r.finish();
  sync_module_params(c);
  validate_config(c);
  return c;
}

inline nlohmann::json parse_config_text(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json();
  try {
    return nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what(), "config");
  }
}

inline EngineConfig load_config(const std::string& text) { return load_config(parse_config_text(text)); }

// The complete document, every default spelled out.
inline nlohmann::ordered_json config_to_json(const EngineConfig& c) {
  using oj = nlohmann::ordered_json;
  using detail::number_out;
  const auto opt = [](const auto& v) -> oj { return v ? oj(*v) : oj(nullptr); };
  const auto optnum = [](const std::optional<double>& v) -> oj { return v ? number_out(*v) : oj(nullptr); };
  const auto side = [](SourceModule m) { return std::string(to_string(m)); };

  oj j;
  j["modules"] = {{"hand", c.modules.hand}, {"head", c.modules.head}, {"gaze", c.modules.gaze},
                  {"exercise", c.modules.exercise}};
  j["mode"] = c.mode == SessionMode::Standing ? "standing" : "sitting";
  j["max_range_mm"] = number_out(c.max_range_mm);
  j["default_depth_mm"] = number_out(c.default_depth_mm);
  j["profile"] = c.profile;
  j["sink"] = c.sink;
  j["cursor_priority"] = {side(c.cursor_priority[0]), side(c.cursor_priority[1]), side(c.cursor_priority[2])};
  j["screen"] = {{"width_px", c.screen.width_px},
                 {"height_px", c.screen.height_px},
                 {"width_mm", number_out(c.screen.width_mm)},
                 {"height_mm", number_out(c.screen.height_mm)},
                 {"camera_offset_x_mm", number_out(c.screen.camera_offset_mm.x)},
                 {"camera_offset_y_mm", number_out(c.screen.camera_offset_mm.y)}};
  j["camera"] = {{"f_px", c.camera ? number_out(c.camera->f_px) : oj(nullptr)},
                 {"cx", c.camera ? number_out(c.camera->cx) : oj(nullptr)},
                 {"cy", c.camera ? number_out(c.camera->cy) : oj(nullptr)}};
  j["camera_file"] = opt(c.camera_file);
  j["filter"] = {{"fc_min", number_out(c.filter.fc_min)},
                 {"beta", number_out(c.filter.beta)},
                 {"d_cutoff", number_out(c.filter.d_cutoff)}};
  const auto& h = c.hand;
  j["hand"] = {{"pinch_on", number_out(h.pinch_on)},
               {"pinch_off", number_out(h.pinch_off)},
               {"idle_hold_ms", number_out(h.idle_hold_ms)},
               {"extended_deg", number_out(h.extended_deg)},
               {"bent_deg", number_out(h.bent_deg)},
               {"c_scale", number_out(h.c_scale)},
               {"scroll_gain", number_out(h.scroll_gain)},
               {"scroll_deadband", number_out(h.scroll_deadband)},
               {"cursor_hand", h.cursor_hand == Handedness::Left ? "left" : "right"},
               {"depth_k_mm_px", optnum(h.depth_k_mm_px)}};
  const auto& hd = c.head;
  std::string head_mode;
  for (const auto& [m, name] : detail::kHeadModeNames)
    if (m == hd.mode) head_mode = name;
  j["head"] = {{"ear_on", number_out(hd.ear_on)},
               {"ear_off", number_out(hd.ear_off)},
               {"mar_on", number_out(hd.mar_on)},
               {"mar_off", number_out(hd.mar_off)},
               {"blink_frames", hd.blink_frames},
               {"wink_frames", hd.wink_frames},
               {"profile_deg", number_out(hd.profile_deg)},
               {"profile_rearm_deg", number_out(hd.profile_rearm_deg)},
               {"profile_hold_ms", number_out(hd.profile_hold_ms)},
               {"pitch_ratio", number_out(hd.pitch_ratio)},
               {"mode", head_mode},
               {"deadzone_deg", number_out(hd.deadzone_deg)},
               {"cursor_gain", number_out(hd.cursor_gain)},
               {"scroll_threshold_deg", number_out(hd.scroll_threshold_deg)},
               {"scroll_gain", number_out(hd.scroll_gain)}};
  j["gaze"] = {{"iris_mm", number_out(c.gaze.iris_mm)}, {"iris_gain_deg", number_out(c.gaze.iris_gain_deg)}};
  const auto& e = c.exercise;
  j["exercise"] = {{"squat_down_deg", number_out(e.squat_down_deg)},
                   {"squat_up_deg", number_out(e.squat_up_deg)},
                   {"jump_rise", number_out(e.jump_rise)},
                   {"jump_return_ms", number_out(e.jump_return_ms)},
                   {"baseline_ms", number_out(e.baseline_ms)},
                   {"punch_low", number_out(e.punch_low)},
                   {"punch_high", number_out(e.punch_high)},
                   {"punch_window_ms", number_out(e.punch_window_ms)},
                   {"kick_rise", number_out(e.kick_rise)},
                   {"refractory_ms", number_out(e.refractory_ms)},
                   {"cycle_band_deg", number_out(e.cycle_band_deg)},
                   {"cycle_band_deg_sitting", number_out(e.cycle_band_deg_sitting)},
                   {"cycle_min_half_ms", number_out(e.cycle_min_half_ms)},
                   {"cycle_max_half_ms", number_out(e.cycle_max_half_ms)},
                   {"cycle_timeout_ms", number_out(e.cycle_timeout_ms)},
                   {"template_on", number_out(e.template_on)},
                   {"template_off", number_out(e.template_off)},
                   {"min_visibility", number_out(e.min_visibility)},
                   {"templates", opt(c.templates_path)}};
  oj profiles = oj::object();
  for (const auto& [name, p] : c.user_profiles) profiles[name] = profile_to_json(p);
  j["profiles"] = std::move(profiles);
  return j;
}

inline std::string read_text_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + what + " '" + path + "'", what);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reads the files a config refers to (relative paths resolve against
// base_dir).
inline void resolve_config_files(EngineConfig& c) {
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || c.base_dir.empty()) return path.string();
    return (std::filesystem::path(c.base_dir) / path).string();
  };
  if (c.camera_file) {
    const auto doc = parse_config_text(read_text_file(resolve(*c.camera_file), "camera_file"));
    detail::ConfigReader r(doc, "camera_file");
    std::optional<double> f, cx, cy;
    r.optional_number("f_px", f);
    r.optional_number("cx", cx);
    r.optional_number("cy", cy);
    r.finish();
    if (!(f && cx && cy) || !(*f > 0.0)) detail::config_error("camera_file", "needs f_px > 0, cx and cy");
    c.camera = CameraModel{*f, *cx, *cy};
  }
  c.templates.clear();
  if (c.templates_path) {
    std::istringstream in(read_text_file(resolve(*c.templates_path), "exercise.templates"));
    try {
      c.templates = load_templates(in);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, "exercise.templates: " + e.detail(), "exercise.templates");
    }
  }
}

inline EngineConfig load_config_file(const std::string& path) {
  EngineConfig c = load_config(read_text_file(path, "config"));
  c.base_dir = std::filesystem::path(path).parent_path().string();
  resolve_config_files(c);
  return c;
}

// Returns a copy of `c` with one setting changed. `path` is dotted
// ("head.ear_on"); the result is fully re-validated, and the file
// references are re-read when they change.
inline EngineConfig set_field(const EngineConfig& c, const std::string& path, const nlohmann::json& value) {
  nlohmann::json doc = config_to_json(c);
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const bool last = dot == std::string::npos;
    const bool user_profile = node == &doc["profiles"];
    if (key.empty() || !node->is_object() || (!node->contains(key) && !(last && user_profile)))
      throw Error(ErrorKind::ConfigError, path + " is not a known setting", path);
    node = &(*node)[key];
    if (last) break;
    start = dot + 1;
  }
  *node = value;
  EngineConfig out = load_config(doc);
  out.base_dir = c.base_dir;
  if (out.camera_file != c.camera_file || out.templates_path != c.templates_path) {
    if (!out.camera_file && c.camera_file) out.camera.reset();
    resolve_config_files(out);
  } else {
    out.templates = c.templates;
  }
  return out;
}

}  // namespace touchless
