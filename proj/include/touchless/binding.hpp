#pragma once

// Gesture event -> input action bindings.
//
// Binding document form (inside a profile's array):
//   {"on": "PinchPress", "label": "cycling"?, "action": {...}}
// actions:
//   {"type": "key_tap", "key": "space"}       down+up at the event time
//   {"type": "key_hold", "key": "w"}          down on press kind, up on its release kind
//   {"type": "mouse", "button": "left", "mode": "press"|"release"|"click"|"double"|"hold"}
//   {"type": "wheel", "scale": 1.0}
//   {"type": "cursor_absolute"}
//   {"type": "cursor_relative", "gain": 1.0}

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/commands.hpp"
#include "touchless/error.hpp"
#include "touchless/events.hpp"

namespace touchless {

struct KeyTap {
  std::string key;
  friend bool operator==(const KeyTap&, const KeyTap&) = default;
};
struct KeyHold {
  std::string key;
  friend bool operator==(const KeyHold&, const KeyHold&) = default;
};
enum class ButtonMode { Press, Release, Click, Double, Hold };
struct MouseAction {
  MouseButton button = MouseButton::Left;
  ButtonMode mode = ButtonMode::Click;
  friend bool operator==(const MouseAction&, const MouseAction&) = default;
};
struct WheelAction {
  double scale = 1.0;
  friend bool operator==(const WheelAction&, const WheelAction&) = default;
};
struct CursorAbsolute {
  friend bool operator==(const CursorAbsolute&, const CursorAbsolute&) = default;
};
struct CursorRelative {
  double gain = 1.0;
  friend bool operator==(const CursorRelative&, const CursorRelative&) = default;
};

using Action = std::variant<KeyTap, KeyHold, MouseAction, WheelAction, CursorAbsolute, CursorRelative>;

struct Selector {
  EventKind kind = EventKind::CursorMove;
  std::string label;  // empty matches any label

  friend bool operator==(const Selector&, const Selector&) = default;
  friend auto operator<=>(const Selector&, const Selector&) = default;
};

struct ActionBinding {
  Selector selector;
  Action action;

  friend bool operator==(const ActionBinding&, const ActionBinding&) = default;
};

struct BindingProfile {
  std::string name;
  std::vector<ActionBinding> bindings;

  friend bool operator==(const BindingProfile&, const BindingProfile&) = default;
};

inline bool is_hold(const Action& a) noexcept {
  if (std::holds_alternative<KeyHold>(a)) return true;
  if (const auto* m = std::get_if<MouseAction>(&a)) return m->mode == ButtonMode::Hold;
  return false;
}

inline void validate_profile(const BindingProfile& p) {
  const std::string where = "profiles." + p.name;
  std::set<Selector> seen;
  for (const auto& b : p.bindings) {
    if (!seen.insert(b.selector).second)
      throw Error(ErrorKind::ConfigError,
                  where + ": more than one binding for " + std::string(to_string(b.selector.kind)) +
                      (b.selector.label.empty() ? "" : "(" + b.selector.label + ")"),
                  where);
    if (is_hold(b.action) && !release_of(b.selector.kind))
      throw Error(ErrorKind::ConfigError,
                  where + ": hold actions need a press/release pair, not " + std::string(to_string(b.selector.kind)),
                  where);
  }
  for (const auto& b : p.bindings) {
    const auto press = press_of(b.selector.kind);
    if (!press) continue;
    for (const auto& other : p.bindings) {
      if (other.selector.kind == *press && other.selector.label == b.selector.label && is_hold(other.action))
        throw Error(ErrorKind::ConfigError,
                    where + ": " + std::string(to_string(b.selector.kind)) + " is already released by a hold binding",
                    where);
    }
  }
}

namespace detail {

inline const ActionBinding* find_binding(const BindingProfile& profile, EventKind kind, const std::string& label) {
  const ActionBinding* wildcard = nullptr;
  for (const auto& b : profile.bindings) {
    if (b.selector.kind != kind) continue;
    if (b.selector.label == label && !label.empty()) return &b;
    if (b.selector.label.empty() && wildcard == nullptr) wildcard = &b;
  }
  return wildcard;
}

}  // namespace detail

// Pure translation of one event. `last_cursor` is the previous absolute
// cursor position (for relative cursor bindings).
inline std::vector<InputCommand> bind(const GestureEvent& event, const BindingProfile& profile,
                                      std::optional<Vec2> last_cursor = std::nullopt) {
  std::vector<InputCommand> out;
  const double t = event.t_ms;

  if (const auto press = press_of(event.kind)) {
    if (const auto* b = detail::find_binding(profile, *press, event.label); b && is_hold(b->action)) {
      if (const auto* k = std::get_if<KeyHold>(&b->action)) out.push_back(InputCommand::key_up(t, k->key));
      else out.push_back(InputCommand::mouse_up(t, std::get<MouseAction>(b->action).button));
      return out;
    }
  }

  const auto* b = detail::find_binding(profile, event.kind, event.label);
  if (b == nullptr) return out;

  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, KeyTap>) {
          out.push_back(InputCommand::key_down(t, a.key));
          out.push_back(InputCommand::key_up(t, a.key));
        } else if constexpr (std::is_same_v<A, KeyHold>) {
          out.push_back(InputCommand::key_down(t, a.key));
        } else if constexpr (std::is_same_v<A, MouseAction>) {
          switch (a.mode) {
            case ButtonMode::Press:
            case ButtonMode::Hold:
              out.push_back(InputCommand::mouse_down(t, a.button));
              break;
            case ButtonMode::Release:
              out.push_back(InputCommand::mouse_up(t, a.button));
              break;
            case ButtonMode::Double:
              out.push_back(InputCommand::mouse_down(t, a.button));
              out.push_back(InputCommand::mouse_up(t, a.button));
              [[fallthrough]];
            case ButtonMode::Click:
              out.push_back(InputCommand::mouse_down(t, a.button));
              out.push_back(InputCommand::mouse_up(t, a.button));
              break;
          }
        } else if constexpr (std::is_same_v<A, WheelAction>) {
          if (event.kind == EventKind::Scroll) out.push_back(InputCommand::wheel(t, a.scale * event.scroll));
        } else if constexpr (std::is_same_v<A, CursorAbsolute>) {
          if (event.kind == EventKind::CursorMove) out.push_back(InputCommand::move_abs(t, event.cursor));
        } else if constexpr (std::is_same_v<A, CursorRelative>) {
          if (event.kind == EventKind::CursorMove && last_cursor)
            out.push_back(InputCommand::move_rel(t, (event.cursor - *last_cursor) * a.gain));
        }
      },
      b->action);
  return out;
}

// --- document form ---------------------------------------------------------

inline nlohmann::ordered_json action_to_json(const Action& action) {
  using oj = nlohmann::ordered_json;
  return std::visit(
      [](const auto& a) -> oj {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, KeyTap>) return {{"type", "key_tap"}, {"key", a.key}};
        else if constexpr (std::is_same_v<A, KeyHold>) return {{"type", "key_hold"}, {"key", a.key}};
        else if constexpr (std::is_same_v<A, MouseAction>) {
          static constexpr const char* kModes[] = {"press", "release", "click", "double", "hold"};
          return {{"type", "mouse"},
                  {"button", std::string(to_string(a.button))},
                  {"mode", kModes[static_cast<int>(a.mode)]}};
        } else if constexpr (std::is_same_v<A, WheelAction>) return {{"type", "wheel"}, {"scale", a.scale}};
        else if constexpr (std::is_same_v<A, CursorAbsolute>) return {{"type", "cursor_absolute"}};
        else return {{"type", "cursor_relative"}, {"gain", a.gain}};
      },
      action);
}

inline nlohmann::ordered_json binding_to_json(const ActionBinding& b) {
  nlohmann::ordered_json j;
  j["on"] = std::string(to_string(b.selector.kind));
  if (!b.selector.label.empty()) j["label"] = b.selector.label;
  j["action"] = action_to_json(b.action);
  return j;
}

inline ActionBinding binding_from_json(const nlohmann::json& j, const std::string& where) {
  const auto fail = [&](const std::string& msg) -> void { throw Error(ErrorKind::ConfigError, where + ": " + msg, where); };
  if (!j.is_object()) fail("binding must be an object");
  ActionBinding b;
  const auto on = j.find("on");
  if (on == j.end() || !on->is_string()) fail("missing \"on\"");
  const auto kind = event_kind_from_string(on->get<std::string>());
  if (!kind) fail("unknown event kind '" + on->get<std::string>() + "'");
  b.selector.kind = *kind;
  if (const auto l = j.find("label"); l != j.end()) {
    if (!l->is_string()) fail("label must be a string");
    b.selector.label = l->get<std::string>();
  }
  const auto act = j.find("action");
  if (act == j.end() || !act->is_object()) fail("missing \"action\"");
  const std::string type = act->value("type", "");
  const auto str = [&](const char* key) {
    const auto it = act->find(key);
    if (it == act->end() || !it->is_string() || it->get<std::string>().empty()) fail(std::string("action needs \"") + key + "\"");
    return it->get<std::string>();
  };
  const auto num = [&](const char* key, double dflt) {
    const auto it = act->find(key);
    if (it == act->end()) return dflt;
    if (!it->is_number()) fail(std::string("action.") + key + " must be a number");
    return it->get<double>();
  };
  if (type == "key_tap") b.action = KeyTap{str("key")};
  else if (type == "key_hold") b.action = KeyHold{str("key")};
  else if (type == "mouse") {
    MouseAction m;
    const auto button = mouse_button_from_string(act->value("button", "left"));
    if (!button) fail("unknown mouse button");
    m.button = *button;
    const std::string mode = act->value("mode", "click");
    if (mode == "press") m.mode = ButtonMode::Press;
    else if (mode == "release") m.mode = ButtonMode::Release;
    else if (mode == "click") m.mode = ButtonMode::Click;
    else if (mode == "double") m.mode = ButtonMode::Double;
    else if (mode == "hold") m.mode = ButtonMode::Hold;
    else fail("unknown mouse mode '" + mode + "'");
    b.action = m;
  } else if (type == "wheel") b.action = WheelAction{num("scale", 1.0)};
  else if (type == "cursor_absolute") b.action = CursorAbsolute{};
  else if (type == "cursor_relative") b.action = CursorRelative{num("gain", 1.0)};
  else fail("unknown action type '" + type + "'");
  return b;
}

inline nlohmann::ordered_json profile_to_json(const BindingProfile& p) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& b : p.bindings) arr.push_back(binding_to_json(b));
  return arr;
}

inline BindingProfile profile_from_json(const std::string& name, const nlohmann::json& j) {
  const std::string where = "profiles." + name;
  if (!j.is_array()) throw Error(ErrorKind::ConfigError, where + ": profile must be an array of bindings", where);
  BindingProfile p{name, {}};
  for (std::size_t i = 0; i < j.size(); ++i)
    p.bindings.push_back(binding_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  validate_profile(p);
  return p;
}

// --- shipped profiles ------------------------------------------------------

inline std::vector<ActionBinding> face_trigger_defaults() {
  return {
      {{EventKind::WinkLeft, ""}, MouseAction{MouseButton::Left, ButtonMode::Click}},
      {{EventKind::ProfileLeft, ""}, MouseAction{MouseButton::Left, ButtonMode::Click}},
      {{EventKind::ProfileRight, ""}, MouseAction{MouseButton::Right, ButtonMode::Click}},
  };
}

// Exercise-driven game control: cycling holds W, jump taps space, punches
// strafe, squats step back.
inline BindingProfile gaming_profile() {
  BindingProfile p{"gaming", {
      {{EventKind::Activate, "cycling"}, KeyHold{"w"}},
      {{EventKind::JumpRep, ""}, KeyTap{"space"}},
      {{EventKind::PunchLeft, ""}, KeyTap{"a"}},
      {{EventKind::PunchRight, ""}, KeyTap{"d"}},
      {{EventKind::SquatRep, ""}, KeyTap{"s"}},
      {{EventKind::KickLeft, ""}, KeyTap{"q"}},
      {{EventKind::KickRight, ""}, KeyTap{"e"}},
      {{EventKind::CursorMove, ""}, CursorRelative{1.0}},
      {{EventKind::PinchPress, ""}, MouseAction{MouseButton::Left, ButtonMode::Click}},
  }};
  return p;
}

// Drawing: pinch (or an open mouth) holds the left button down for strokes.
inline BindingProfile creativity_profile() {
  BindingProfile p{"creativity", {
      {{EventKind::CursorMove, ""}, CursorAbsolute{}},
      {{EventKind::PinchPress, ""}, MouseAction{MouseButton::Left, ButtonMode::Hold}},
      {{EventKind::MouthOpen, ""}, MouseAction{MouseButton::Left, ButtonMode::Hold}},
      {{EventKind::Scroll, ""}, WheelAction{1.0}},
  }};
  for (auto& b : face_trigger_defaults()) p.bindings.push_back(b);
  return p;
}

// Image viewers: cursor, pinch press/drag, fist scroll; mouth open double
// clicks.
inline BindingProfile clinical_profile() {
  BindingProfile p{"clinical", {
      {{EventKind::CursorMove, ""}, CursorAbsolute{}},
      {{EventKind::PinchPress, ""}, MouseAction{MouseButton::Left, ButtonMode::Hold}},
      {{EventKind::Scroll, ""}, WheelAction{1.0}},
      {{EventKind::MouthOpen, ""}, MouseAction{MouseButton::Left, ButtonMode::Double}},
  }};
  for (auto& b : face_trigger_defaults()) p.bindings.push_back(b);
  return p;
}

inline std::map<std::string, BindingProfile> shipped_profiles() {
  std::map<std::string, BindingProfile> out;
  for (auto p : {gaming_profile(), creativity_profile(), clinical_profile()}) out.emplace(p.name, p);
  return out;
}

}  // namespace touchless
