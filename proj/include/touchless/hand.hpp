#pragma once

// Hand gestures: idle detection, palm-size depth, the dynamic area of
// interest (DAoI) cursor mapping, pinch clicks, finger-state poses and
// fist-drag scrolling.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "touchless/error.hpp"
#include "touchless/events.hpp"
#include "touchless/frame.hpp"
#include "touchless/signal.hpp"

namespace touchless {

struct HandParams {
  double pinch_on = 0.35;
  double pinch_off = 0.45;
  double idle_hold_ms = 300.0;
  double extended_deg = 160.0;
  double bent_deg = 130.0;
  double c_scale = 3.0;
  double scroll_gain = 10.0;      // wheel units per (image heights / s)
  double scroll_deadband = 0.05;  // image heights / s
  Handedness cursor_hand = Handedness::Right;
  std::optional<double> depth_k_mm_px;
  LowPassParams filter;

  friend bool operator==(const HandParams&, const HandParams&) = default;
};

struct ScreenSize {
  int width = 1920;
  int height = 1080;

  [[nodiscard]] double aspect() const noexcept { return static_cast<double>(width) / height; }
  friend bool operator==(ScreenSize, ScreenSize) = default;
};

inline double palm_size_px(const HandFrame& hand, ImageSize image) {
  const double d = distance(to_pixels_xy(hand.points[hand_lm::kWrist], image),
                            to_pixels_xy(hand.points[hand_lm::kMiddleMcp], image));
  if (d == 0.0) throw Error(ErrorKind::DegenerateHand, "wrist and middle MCP coincide");
  return d;
}

// Pinhole inverse-size law: depth = k / palm_px.
inline double estimate_depth_from_palm(double palm_px, double k_mm_px) {
  if (!(palm_px > 0.0)) throw Error(ErrorKind::DegenerateHand, "palm size must be positive");
  if (!(k_mm_px > 0.0)) throw Error(ErrorKind::DegenerateHand, "palm depth constant must be positive");
  return k_mm_px / palm_px;
}

// One-point calibration: the user shows their palm at a known distance.
inline double calibrate_palm_depth(double palm_px, double known_depth_mm) {
  if (!(palm_px > 0.0) || !(known_depth_mm > 0.0))
    throw Error(ErrorKind::DegenerateHand, "calibration needs positive palm size and depth");
  return palm_px * known_depth_mm;
}

enum class PalmFacing { TowardCamera, Away };

// Sign of the z component of (p5 - p0) x (p17 - p0) in pixel space. For a
// right hand a positive sign means the palm faces the camera; mirrored for a
// left hand.
inline PalmFacing palm_facing(const HandFrame& hand, ImageSize image) {
  const Vec2 wrist = to_pixels_xy(hand.points[hand_lm::kWrist], image);
  const Vec2 index = to_pixels_xy(hand.points[hand_lm::kIndexMcp], image) - wrist;
  const Vec2 pinky = to_pixels_xy(hand.points[hand_lm::kPinkyMcp], image) - wrist;
  const double z = cross(index, pinky);
  if (z == 0.0) throw Error(ErrorKind::DegenerateHand, "palm triangle is degenerate");
  const bool positive = z > 0.0;
  const bool toward = hand.handedness == Handedness::Right ? positive : !positive;
  return toward ? PalmFacing::TowardCamera : PalmFacing::Away;
}

inline bool index_below_thumb(const HandFrame& hand) noexcept {
  return hand.points[hand_lm::kIndexTip].y > hand.points[hand_lm::kThumbTip].y;
}

// Raw (pre-debounce) idle test: hand missing, palm turned away, or the index
// tip resting below the thumb tip.
inline bool is_idle(const HandFrame* hand, ImageSize image) {
  if (hand == nullptr) return true;
  try {
    if (palm_facing(*hand, image) == PalmFacing::Away) return true;
  } catch (const Error&) {
    return true;
  }
  return index_below_thumb(*hand);
}

// Rectangle in normalized image coordinates whose corners map to the screen
// corners.
struct DAoI {
  Vec2 center;
  double width = 0.0;
  double height = 0.0;

  [[nodiscard]] double left() const noexcept { return center.x - width / 2.0; }
  [[nodiscard]] double top() const noexcept { return center.y - height / 2.0; }
  [[nodiscard]] double right() const noexcept { return center.x + width / 2.0; }
  [[nodiscard]] double bottom() const noexcept { return center.y + height / 2.0; }

  friend bool operator==(const DAoI&, const DAoI&) = default;
};

// Size follows palm size (a depth proxy): width = c_scale * palm_px / image_w,
// height = width / screen_aspect. An oversized rectangle is shrunk with its
// aspect kept; the rectangle is then translated to lie inside [0,1]^2.
inline DAoI make_daoi(Vec2 anchor, double palm_px, int image_width, double screen_aspect, double c_scale) {
  double w = c_scale * palm_px / image_width;
  double h = w / screen_aspect;
  if (w > 1.0 || h > 1.0) {
    const double s = std::min(1.0 / w, 1.0 / h);
    w *= s;
    h *= s;
  }
  DAoI r;
  r.width = w;
  r.height = h;
  r.center.x = std::clamp(anchor.x, w / 2.0, 1.0 - w / 2.0);
  r.center.y = std::clamp(anchor.y, h / 2.0, 1.0 - h / 2.0);
  return r;
}

inline Vec2 map_to_screen(Point2 p, const DAoI& daoi, int screen_w, int screen_h) noexcept {
  const double u = (p.x - daoi.left()) / daoi.width;
  const double v = (p.y - daoi.top()) / daoi.height;
  return {std::clamp(u * screen_w, 0.0, static_cast<double>(screen_w - 1)),
          std::clamp(v * screen_h, 0.0, static_cast<double>(screen_h - 1))};
}

// Fingertip gap over palm size; independent of distance to the camera.
inline double pinch_ratio(const HandFrame& hand, ImageSize image) {
  const double gap = distance(to_pixels_xy(hand.points[hand_lm::kThumbTip], image),
                              to_pixels_xy(hand.points[hand_lm::kIndexTip], image));
  return gap / palm_size_px(hand, image);
}

enum class FingerPose { Extended, Bent, Indeterminate };

// thumb, index, middle, ring, pinky
using FingerState = std::array<FingerPose, 5>;

inline FingerState finger_states(const HandFrame& hand, ImageSize image, double extended_deg = 160.0,
                                 double bent_deg = 130.0) {
  using namespace hand_lm;
  static constexpr std::array<std::array<std::size_t, 3>, 5> kChains{{
      {kThumbMcp, kThumbIp, kThumbTip},
      {kIndexMcp, kIndexPip, kIndexTip},
      {kMiddleMcp, kMiddlePip, kMiddleTip},
      {kRingMcp, kRingPip, kRingTip},
      {kPinkyMcp, kPinkyPip, kPinkyTip},
  }};
  FingerState out{};
  for (std::size_t f = 0; f < kChains.size(); ++f) {
    const auto& c = kChains[f];
    const auto angle = interior_angle_deg(to_pixels_xy(hand.points[c[0]], image),
                                          to_pixels_xy(hand.points[c[1]], image),
                                          to_pixels_xy(hand.points[c[2]], image));
    if (!angle) throw Error(ErrorKind::DegenerateHand, "zero-length finger segment");
    if (*angle >= extended_deg) out[f] = FingerPose::Extended;
    else if (*angle <= bent_deg) out[f] = FingerPose::Bent;
    else out[f] = FingerPose::Indeterminate;
  }
  return out;
}

inline bool is_fist(const FingerState& s) noexcept {
  return std::all_of(s.begin() + 1, s.end(), [](FingerPose p) { return p == FingerPose::Bent; });
}

// Named static poses; "other" when nothing matches.
inline std::string classify_pose(const FingerState& s) {
  using enum FingerPose;
  const auto four = [&](FingerPose i, FingerPose m, FingerPose r, FingerPose p) {
    return s[1] == i && s[2] == m && s[3] == r && s[4] == p;
  };
  if (four(Extended, Extended, Extended, Extended)) return "open";
  if (four(Bent, Bent, Bent, Bent)) return "fist";
  if (four(Extended, Bent, Bent, Bent)) return "point";
  if (four(Extended, Extended, Bent, Bent)) return "peace";
  return "other";
}

inline std::string_view side_name(Handedness h) noexcept { return h == Handedness::Left ? "left" : "right"; }

enum class IdlePhase { Unknown, Idle, Active };

struct HandContext {
  ImageSize image;
  ScreenSize screen;
};

// Per-hand gesture state. The tracker starts in IdlePhase::Unknown and emits
// nothing until the debounced idle decision settles.
class HandTracker {
 public:
  HandTracker() : HandTracker(Handedness::Right, HandParams{}) {}
  HandTracker(Handedness side, const HandParams& params)
      : side_(side),
        params_(params),
        filter_x_(params.filter),
        filter_y_(params.filter),
        scroll_filter_(params.filter),
        pinch_(Polarity::ActivateBelow, params.pinch_on, params.pinch_off),
        idle_(params.idle_hold_ms, IdlePhase::Unknown) {}

  // `cursor_role` selects whether this hand drives the cursor (cursor, pinch
  // and scroll events) or only reports pose changes.
  std::vector<GestureEvent> step(const HandFrame* hand, bool cursor_role, const HandContext& ctx, double t_ms) {
    if (last_t_ms_ && t_ms < *last_t_ms_)
      throw Error(ErrorKind::NonMonotonicTime, "hand frame at t=" + std::to_string(t_ms) + " is out of order");
    last_t_ms_ = t_ms;

    std::vector<GestureEvent> events;
    const auto emit = [&](EventKind kind) -> GestureEvent& {
      events.push_back(GestureEvent{.t_ms = t_ms, .source = SourceModule::Hand, .kind = kind});
      return events.back();
    };

    std::optional<FingerState> fingers;
    if (hand != nullptr) {
      try {
        fingers = finger_states(*hand, ctx.image, params_.extended_deg, params_.bent_deg);
      } catch (const Error&) {
        fingers.reset();
      }
    }
    const bool fist = fingers && is_fist(*fingers);

    // A deliberate fist keeps the hand engaged even though the curled index
    // tip ends up below the thumb tip.
    bool raw_idle = is_idle(hand, ctx.image);
    if (raw_idle && hand != nullptr && fist && index_below_thumb(*hand)) {
      try {
        raw_idle = palm_facing(*hand, ctx.image) == PalmFacing::Away;
      } catch (const Error&) {
        raw_idle = true;
      }
    }

    const IdlePhase previous = idle_.stable();
    const IdlePhase phase = idle_.step(raw_idle ? IdlePhase::Idle : IdlePhase::Active, t_ms);
    if (phase != previous) {
      if (phase == IdlePhase::Idle) {
        release_pinch(emit);
        emit(EventKind::IdleEnter).label = side_name(side_);
        disengage();
      } else {
        emit(EventKind::IdleExit).label = side_name(side_);
        // hand is present: the candidate was Active on this very frame
        anchor_ = hand->points[hand_lm::kWrist].xy();
      }
    }
    if (phase != IdlePhase::Active || hand == nullptr) return events;

    double palm = 0.0;
    try {
      palm = palm_size_px(*hand, ctx.image);
    } catch (const Error&) {
      return events;
    }
    daoi_ = make_daoi(anchor_, palm, ctx.image.width, ctx.screen.aspect(), params_.c_scale);
    last_pinch_ratio_.reset();

    if (cursor_role) {
      const Point3 tip = hand->points[hand_lm::kIndexTip];
      const Point2 smoothed{smooth(filter_x_, tip.x, t_ms), smooth(filter_y_, tip.y, t_ms)};
      if (!fist) {
        const Vec2 px = map_to_screen(smoothed, *daoi_, ctx.screen.width, ctx.screen.height);
        const Vec2 rounded{std::round(px.x), std::round(px.y)};
        if (!last_cursor_ || !(*last_cursor_ == rounded)) {
          emit(EventKind::CursorMove).cursor = rounded;
          last_cursor_ = rounded;
        }
      }

      const double ratio = pinch_ratio(*hand, ctx.image);
      last_pinch_ratio_ = ratio;
      const bool was_pressed = pinch_.active();
      const bool pressed = fist ? pinch_.step(std::max(ratio, params_.pinch_off + 1.0)) : pinch_.step(ratio);
      if (pressed && !was_pressed) emit(EventKind::PinchPress);
      if (!pressed && was_pressed) emit(EventKind::PinchRelease);
    } else {
      release_pinch(emit);
    }

    if (fingers) {
      std::string label = std::string(side_name(side_)) + "_" + classify_pose(*fingers);
      if (label != pose_label_) {
        pose_label_ = label;
        emit(EventKind::PoseChanged).label = std::move(label);
      }
      fingers_ = fingers;
    }

    if (cursor_role && fist) {
      const double y = smooth(scroll_filter_, hand->points[hand_lm::kWrist].y, t_ms);
      if (scroll_prev_ && t_ms > scroll_prev_->second) {
        const auto [prev_y, prev_t] = *scroll_prev_;
        const double vy = (y - prev_y) / ((t_ms - prev_t) / 1000.0);
        if (std::abs(vy) > params_.scroll_deadband) emit(EventKind::Scroll).scroll = -params_.scroll_gain * vy;
      }
      scroll_prev_ = {y, t_ms};
    } else {
      scroll_filter_.reset();
      scroll_prev_.reset();
    }
    return events;
  }

  void set_params(const HandParams& p) {
    pinch_.set_thresholds(p.pinch_on, p.pinch_off);
    idle_.set_hold(p.idle_hold_ms);
    filter_x_.set_params(p.filter);
    filter_y_.set_params(p.filter);
    scroll_filter_.set_params(p.filter);
    params_ = p;
  }

  [[nodiscard]] IdlePhase phase() const noexcept { return idle_.stable(); }
  [[nodiscard]] bool idle() const noexcept { return idle_.stable() != IdlePhase::Active; }
  [[nodiscard]] bool pinch_pressed() const noexcept { return pinch_.active(); }
  [[nodiscard]] const std::optional<DAoI>& daoi() const noexcept { return daoi_; }
  [[nodiscard]] std::optional<double> last_pinch_ratio() const noexcept { return last_pinch_ratio_; }
  [[nodiscard]] Handedness side() const noexcept { return side_; }

 private:
  // Repeated timestamps reuse the last output.
  static double smooth(LowPassFilter& f, double x, double t_ms) {
    if (f.initialized() && t_ms <= f.last_t_ms()) return f.value();
    return f.step(x, t_ms);
  }

  template <typename Emit>
  void release_pinch(Emit& emit) {
    if (pinch_.active()) {
      emit(EventKind::PinchRelease);
      pinch_.reset();
    }
  }

  void disengage() {
    daoi_.reset();
    filter_x_.reset();
    filter_y_.reset();
    scroll_filter_.reset();
    scroll_prev_.reset();
    last_cursor_.reset();
    pose_label_.clear();
    fingers_.reset();
  }

  Handedness side_;
  HandParams params_;
  LowPassFilter filter_x_;
  LowPassFilter filter_y_;
  LowPassFilter scroll_filter_;
  Hysteresis pinch_;
  Debouncer<IdlePhase> idle_;
  Vec2 anchor_;
  std::optional<DAoI> daoi_;
  std::optional<Vec2> last_cursor_;
  std::optional<std::pair<double, double>> scroll_prev_;
  std::optional<double> last_pinch_ratio_;
  std::optional<FingerState> fingers_;
  std::optional<double> last_t_ms_;
  std::string pose_label_;
};

// Both hands. The configured cursor hand drives the cursor when present; a
// lone hand of either side drives it otherwise. The other hand only reports
// pose changes.
class HandModule {
 public:
  HandModule() : HandModule(HandParams{}) {}
  explicit HandModule(const HandParams& params)
      : params_(params), right_(Handedness::Right, params), left_(Handedness::Left, params) {}

  std::vector<GestureEvent> step(const LandmarkFrame& frame, const ScreenSize& screen) {
    const HandFrame* right = frame.hand(Handedness::Right);
    const HandFrame* left = frame.hand(Handedness::Left);
    std::optional<Handedness> cursor;
    if (frame.hand(params_.cursor_hand) != nullptr) cursor = params_.cursor_hand;
    else if (frame.hands.size() == 1) cursor = frame.hands.front().handedness;

    const HandContext ctx{frame.image, screen};
    auto events = right_.step(right, cursor == Handedness::Right, ctx, frame.t_ms);
    auto more = left_.step(left, cursor == Handedness::Left, ctx, frame.t_ms);
    events.insert(events.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    return events;
  }

  void set_params(const HandParams& p) {
    right_.set_params(p);
    left_.set_params(p);
    params_ = p;
  }

  [[nodiscard]] const HandTracker& tracker(Handedness side) const noexcept {
    return side == Handedness::Right ? right_ : left_;
  }
  [[nodiscard]] const HandParams& params() const noexcept { return params_; }

 private:
  HandParams params_;
  HandTracker right_;
  HandTracker left_;
};

}  // namespace touchless
