#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "touchless/geometry.hpp"

namespace touchless {

enum class SourceModule { Hand, Head, Gaze, Exercise };

enum class EventKind {
  CursorMove,
  PinchPress,
  PinchRelease,
  Blink,
  WinkLeft,
  WinkRight,
  MouthOpen,
  MouthClose,
  ProfileLeft,
  ProfileRight,
  Scroll,
  SquatRep,
  JumpRep,
  PunchLeft,
  PunchRight,
  KickLeft,
  KickRight,
  CycleRep,
  TemplateRep,
  Activate,
  Deactivate,
  IdleEnter,
  IdleExit,
  PoseChanged,
};

inline constexpr std::array<std::pair<EventKind, std::string_view>, 24> kEventKindNames{{
    {EventKind::CursorMove, "CursorMove"},
    {EventKind::PinchPress, "PinchPress"},
    {EventKind::PinchRelease, "PinchRelease"},
    {EventKind::Blink, "Blink"},
    {EventKind::WinkLeft, "WinkLeft"},
    {EventKind::WinkRight, "WinkRight"},
    {EventKind::MouthOpen, "MouthOpen"},
    {EventKind::MouthClose, "MouthClose"},
    {EventKind::ProfileLeft, "ProfileLeft"},
    {EventKind::ProfileRight, "ProfileRight"},
    {EventKind::Scroll, "Scroll"},
    {EventKind::SquatRep, "SquatRep"},
    {EventKind::JumpRep, "JumpRep"},
    {EventKind::PunchLeft, "PunchL"},
    {EventKind::PunchRight, "PunchR"},
    {EventKind::KickLeft, "KickL"},
    {EventKind::KickRight, "KickR"},
    {EventKind::CycleRep, "CycleRep"},
    {EventKind::TemplateRep, "TemplateRep"},
    {EventKind::Activate, "Activate"},
    {EventKind::Deactivate, "Deactivate"},
    {EventKind::IdleEnter, "IdleEnter"},
    {EventKind::IdleExit, "IdleExit"},
    {EventKind::PoseChanged, "PoseChanged"},
}};

inline constexpr std::string_view to_string(EventKind kind) noexcept {
  for (const auto& [k, name] : kEventKindNames)
    if (k == kind) return name;
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept {
  for (const auto& [k, n] : kEventKindNames)
    if (n == name) return k;
  return std::nullopt;
}

inline constexpr std::string_view to_string(SourceModule m) noexcept {
  switch (m) {
    case SourceModule::Hand: return "hand";
    case SourceModule::Head: return "head";
    case SourceModule::Gaze: return "gaze";
    case SourceModule::Exercise: return "exercise";
  }
  return "?";
}

// Press/release pairs. A hold-style binding on the first kind is released by
// the second.
inline constexpr std::optional<EventKind> release_of(EventKind press) noexcept {
  switch (press) {
    case EventKind::PinchPress: return EventKind::PinchRelease;
    case EventKind::MouthOpen: return EventKind::MouthClose;
    case EventKind::Activate: return EventKind::Deactivate;
    default: return std::nullopt;
  }
}

inline constexpr std::optional<EventKind> press_of(EventKind release) noexcept {
  switch (release) {
    case EventKind::PinchRelease: return EventKind::PinchPress;
    case EventKind::MouthClose: return EventKind::MouthOpen;
    case EventKind::Deactivate: return EventKind::Activate;
    default: return std::nullopt;
  }
}

// One semantic occurrence. Which payload fields are meaningful depends on
// `kind`: CursorMove -> cursor (screen px); Scroll -> scroll (+ = up);
// Activate/Deactivate/PoseChanged/TemplateRep -> label (+ confidence);
// IdleEnter/IdleExit -> label is the hand side.
struct GestureEvent {
  double t_ms = 0.0;
  SourceModule source = SourceModule::Hand;
  EventKind kind = EventKind::CursorMove;
  std::string label;
  Vec2 cursor;
  double scroll = 0.0;
  double confidence = 0.0;

  friend bool operator==(const GestureEvent&, const GestureEvent&) = default;
};

}  // namespace touchless
