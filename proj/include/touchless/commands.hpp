#pragma once

// Synthetic input commands and the sinks that consume them.
//
// Command log line format (one per command, keys in this order):
//   {"t":<ms>,"cmd":"key_down"|"key_up","key":"w"}
//   {"t":<ms>,"cmd":"mouse_move","x":<px>,"y":<px>}
//   {"t":<ms>,"cmd":"mouse_move_rel","x":<dx>,"y":<dy>}
//   {"t":<ms>,"cmd":"mouse_down"|"mouse_up","button":"left"|"right"|"middle"}
//   {"t":<ms>,"cmd":"wheel","delta":<units, + = up>}

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/frame_io.hpp"
#include "touchless/geometry.hpp"

namespace touchless {

enum class MouseButton { Left, Right, Middle };

inline constexpr std::string_view to_string(MouseButton b) noexcept {
  switch (b) {
    case MouseButton::Left: return "left";
    case MouseButton::Right: return "right";
    case MouseButton::Middle: return "middle";
  }
  return "?";
}

inline std::optional<MouseButton> mouse_button_from_string(std::string_view s) noexcept {
  if (s == "left") return MouseButton::Left;
  if (s == "right") return MouseButton::Right;
  if (s == "middle") return MouseButton::Middle;
  return std::nullopt;
}

enum class CommandType { KeyDown, KeyUp, MouseMoveAbs, MouseMoveRel, MouseDown, MouseUp, Wheel };

inline constexpr std::string_view to_string(CommandType c) noexcept {
  switch (c) {
    case CommandType::KeyDown: return "key_down";
    case CommandType::KeyUp: return "key_up";
    case CommandType::MouseMoveAbs: return "mouse_move";
    case CommandType::MouseMoveRel: return "mouse_move_rel";
    case CommandType::MouseDown: return "mouse_down";
    case CommandType::MouseUp: return "mouse_up";
    case CommandType::Wheel: return "wheel";
  }
  return "?";
}

struct InputCommand {
  double t_ms = 0.0;
  CommandType type = CommandType::KeyDown;
  std::string key;
  MouseButton button = MouseButton::Left;
  Vec2 position;  // absolute px, or delta for MouseMoveRel
  double delta = 0.0;

  static InputCommand key_down(double t, std::string k) { return {t, CommandType::KeyDown, std::move(k)}; }
  static InputCommand key_up(double t, std::string k) { return {t, CommandType::KeyUp, std::move(k)}; }
  static InputCommand mouse_down(double t, MouseButton b) { return {t, CommandType::MouseDown, {}, b}; }
  static InputCommand mouse_up(double t, MouseButton b) { return {t, CommandType::MouseUp, {}, b}; }
  static InputCommand move_abs(double t, Vec2 p) { return {t, CommandType::MouseMoveAbs, {}, MouseButton::Left, p}; }
  static InputCommand move_rel(double t, Vec2 d) { return {t, CommandType::MouseMoveRel, {}, MouseButton::Left, d}; }
  static InputCommand wheel(double t, double d) { return {t, CommandType::Wheel, {}, MouseButton::Left, {}, d}; }

  friend bool operator==(const InputCommand&, const InputCommand&) = default;
};

// Wheel deltas are logged to 1e-3 units; positions and t keep full value
// (whole numbers print without a fraction).
inline std::string format_command(const InputCommand& c) {
  nlohmann::ordered_json j;
  j["t"] = detail::number_out(c.t_ms);
  j["cmd"] = std::string(to_string(c.type));
  switch (c.type) {
    case CommandType::KeyDown:
    case CommandType::KeyUp:
      j["key"] = c.key;
      break;
    case CommandType::MouseMoveAbs:
    case CommandType::MouseMoveRel:
      j["x"] = detail::number_out(c.position.x);
      j["y"] = detail::number_out(c.position.y);
      break;
    case CommandType::MouseDown:
    case CommandType::MouseUp:
      j["button"] = std::string(to_string(c.button));
      break;
    case CommandType::Wheel:
      j["delta"] = detail::number_out(std::round(c.delta * 1000.0) / 1000.0);
      break;
  }
  return j.dump();
}

// Anything that accepts the ordered command stream. An OS injection backend
// (uinput, SendInput, ...) implements this same interface.
class InputSink {
 public:
  virtual ~InputSink() = default;
  virtual void emit(const InputCommand& command) = 0;
  virtual void flush() {}
};

class NullSink final : public InputSink {
 public:
  void emit(const InputCommand&) override {}
};

class LogSink final : public InputSink {
 public:
  explicit LogSink(std::ostream& out) : out_(out) {}
  void emit(const InputCommand& command) override { out_ << format_command(command) << '\n'; }
  void flush() override { out_.flush(); }

 private:
  std::ostream& out_;
};

class VectorSink final : public InputSink {
 public:
  void emit(const InputCommand& command) override { commands.push_back(command); }
  std::vector<InputCommand> commands;
};

// Reference-counts held keys and buttons so overlapping holds from different
// gestures produce one down/up pair, and releases everything at shutdown.
class HeldInputs {
 public:
  std::vector<InputCommand> filter(const std::vector<InputCommand>& in) {
    std::vector<InputCommand> out;
    for (const auto& c : in) {
      switch (c.type) {
        case CommandType::KeyDown:
          if (keys_[c.key]++ == 0) out.push_back(c);
          break;
        case CommandType::KeyUp:
          if (release(keys_, c.key)) out.push_back(c);
          break;
        case CommandType::MouseDown:
          if (buttons_[c.button]++ == 0) out.push_back(c);
          break;
        case CommandType::MouseUp:
          if (release(buttons_, c.button)) out.push_back(c);
          break;
        default:
          out.push_back(c);
      }
    }
    return out;
  }

  std::vector<InputCommand> release_all(double t_ms) {
    std::vector<InputCommand> out;
    for (const auto& [key, n] : keys_)
      if (n > 0) out.push_back(InputCommand::key_up(t_ms, key));
    for (const auto& [button, n] : buttons_)
      if (n > 0) out.push_back(InputCommand::mouse_up(t_ms, button));
    keys_.clear();
    buttons_.clear();
    return out;
  }

  [[nodiscard]] bool empty() const {
    for (const auto& [k, n] : keys_)
      if (n > 0) return false;
    for (const auto& [b, n] : buttons_)
      if (n > 0) return false;
    return true;
  }

 private:
  template <typename Map, typename Key>
  static bool release(Map& m, const Key& k) {
    auto it = m.find(k);
    if (it == m.end() || it->second == 0) return false;
    return --it->second == 0;
  }

  std::map<std::string, int> keys_;
  std::map<MouseButton, int> buttons_;
};

}  // namespace touchless
