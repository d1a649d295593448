#pragma once

// Face and head triggers from the 68-point face topology: eye/mouth aspect
// ratios, a geometric head pose, profile clicks and head-driven cursor or
// scroll.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "touchless/error.hpp"
#include "touchless/events.hpp"
#include "touchless/frame.hpp"
#include "touchless/hand.hpp"
#include "touchless/signal.hpp"

namespace touchless {

enum class HeadMode { Cursor, Scroll, TriggersOnly };

struct HeadParams {
  double ear_on = 0.20;
  double ear_off = 0.25;
  double mar_on = 0.55;
  double mar_off = 0.45;
  int blink_frames = 2;
  int wink_frames = 3;
  double profile_deg = 25.0;
  double profile_rearm_deg = 20.0;
  double profile_hold_ms = 200.0;
  double pitch_ratio = 0.45;  // nose tip position between eye line and chin, frontal
  HeadMode mode = HeadMode::Cursor;
  double deadzone_deg = 5.0;
  double cursor_gain = 40.0;  // px/s per degree beyond the dead zone
  double scroll_threshold_deg = 10.0;
  double scroll_gain = 0.5;  // wheel units/s per degree beyond the threshold
  LowPassParams filter;

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

// Points: outer corner, two upper-lid points, inner corner, two lower-lid
// points (p1..p6), in pixels.
using EyePoints = std::array<Vec2, 6>;
// Inner mouth 60..67, in pixels.
using MouthPoints = std::array<Vec2, 8>;

inline double eye_aspect_ratio(const EyePoints& p) {
  const double span = distance(p[0], p[3]);
  if (span == 0.0) throw Error(ErrorKind::DegenerateEye, "eye corners coincide");
  return (distance(p[1], p[5]) + distance(p[2], p[4])) / (2.0 * span);
}

inline double mouth_aspect_ratio(const MouthPoints& p) {
  const double span = distance(p[0], p[4]);
  if (span == 0.0) throw Error(ErrorKind::DegenerateMouth, "mouth corners coincide");
  return (distance(p[1], p[7]) + distance(p[2], p[6]) + distance(p[3], p[5])) / (3.0 * span);
}

inline EyePoints eye_points(const FaceFrame& face, std::size_t first, ImageSize image) {
  EyePoints out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_pixels(face.points68[first + i], image);
  return out;
}

inline MouthPoints mouth_points(const FaceFrame& face, ImageSize image) {
  MouthPoints out{};
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = to_pixels(face.points68[face_lm::kInnerMouthFirst + i], image);
  return out;
}

// Degrees. yaw > 0: nose toward image right. pitch > 0: looking up.
// roll > 0: eye line rotated clockwise in the image.
struct HeadPose {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  friend bool operator==(const HeadPose&, const HeadPose&) = default;
};

inline Vec2 eye_center(const FaceFrame& face, std::size_t first, ImageSize image) {
  Vec2 sum;
  for (std::size_t i = 0; i < 6; ++i) sum = sum + to_pixels(face.points68[first + i], image);
  return sum / 6.0;
}

// Geometric head pose without a 3D model fit. Roll comes from the eye-center
// line; after undoing roll, yaw is the nose tip's offset from the jaw midpoint
// relative to half the jaw width, and pitch is the nose tip's offset from its
// frontal position between eye line and chin (`pitch_ratio`), again as a
// sine.
inline HeadPose head_pose(const FaceFrame& face, ImageSize image, double pitch_ratio = 0.45) {
  const Vec2 right_eye = eye_center(face, face_lm::kRightEyeFirst, image);
  const Vec2 left_eye = eye_center(face, face_lm::kLeftEyeFirst, image);
  const Vec2 line = left_eye - right_eye;
  double roll = std::atan2(line.y, line.x);
  if (roll > std::numbers::pi / 2.0) roll -= std::numbers::pi;
  if (roll <= -std::numbers::pi / 2.0) roll += std::numbers::pi;

  const auto derolled = [&](Vec2 p) { return rotate(p, -roll); };
  const Vec2 jaw0 = derolled(to_pixels(face.points68[face_lm::kJawFirst], image));
  const Vec2 jaw16 = derolled(to_pixels(face.points68[face_lm::kJawLast], image));
  const Vec2 nose = derolled(to_pixels(face.points68[face_lm::kNoseTip], image));
  const Vec2 chin = derolled(to_pixels(face.points68[face_lm::kChin], image));
  const double eye_y = (derolled(right_eye).y + derolled(left_eye).y) / 2.0;

  const double jaw_width = distance(jaw0, jaw16);
  if (jaw_width == 0.0) throw Error(ErrorKind::DegenerateFace, "zero jaw width");
  const double eye_chin = chin.y - eye_y;
  if (eye_chin == 0.0) throw Error(ErrorKind::DegenerateFace, "zero eye-to-chin distance");

  const double x_mid = (jaw0.x + jaw16.x) / 2.0;
  const double yaw = std::asin(clamp_unit(2.0 * (nose.x - x_mid) / jaw_width));
  const double ratio = (nose.y - eye_y) / eye_chin;
  const double pitch = std::asin(clamp_unit(2.0 * (pitch_ratio - ratio)));

  const auto deg = [](double r) { return std::clamp(rad_to_deg(r), -90.0, 90.0); };
  return {deg(yaw), deg(pitch), deg(roll)};
}

enum class ProfileClass { Frontal, LeftProfile, RightProfile };

inline ProfileClass profile_class(double yaw_deg, double threshold_deg = 25.0) noexcept {
  if (yaw_deg > threshold_deg) return ProfileClass::RightProfile;
  if (yaw_deg < -threshold_deg) return ProfileClass::LeftProfile;
  return ProfileClass::Frontal;
}

// Turns raw profile classes into ProfileLeft/ProfileRight events. A class
// must hold for hold_ms before it counts, and after an event the tracker only
// re-arms once the face is back to Frontal with |yaw| below the re-arm angle.
class ProfileTracker {
 public:
  ProfileTracker() : ProfileTracker(25.0, 20.0, 200.0) {}
  ProfileTracker(double threshold_deg, double rearm_deg, double hold_ms)
      : threshold_deg_(threshold_deg), rearm_deg_(rearm_deg), debounce_(hold_ms, ProfileClass::Frontal) {}

  std::optional<EventKind> step(double yaw_deg, double t_ms) {
    const ProfileClass before = debounce_.stable();
    const ProfileClass now = debounce_.step(profile_class(yaw_deg, threshold_deg_), t_ms);
    if (now == ProfileClass::Frontal && std::abs(yaw_deg) < rearm_deg_) armed_ = true;
    if (now != before && now != ProfileClass::Frontal && armed_) {
      armed_ = false;
      return now == ProfileClass::RightProfile ? EventKind::ProfileRight : EventKind::ProfileLeft;
    }
    return std::nullopt;
  }

  void set_params(double threshold_deg, double rearm_deg, double hold_ms) {
    debounce_.set_hold(hold_ms);
    threshold_deg_ = threshold_deg;
    rearm_deg_ = rearm_deg;
  }

  void reset() {
    debounce_.reset(ProfileClass::Frontal);
    armed_ = true;
  }

  [[nodiscard]] ProfileClass stable() const noexcept { return debounce_.stable(); }

 private:
  double threshold_deg_;
  double rearm_deg_;
  Debouncer<ProfileClass> debounce_;
  bool armed_ = true;
};

inline double deadzone(double v, double zone) noexcept {
  if (v > zone) return v - zone;
  if (v < -zone) return v + zone;
  return 0.0;
}

struct HeadTelemetry {
  std::optional<double> ear_left;
  std::optional<double> ear_right;
  std::optional<double> mar;
  std::optional<HeadPose> pose;
};

class HeadModule {
 public:
  HeadModule() : HeadModule(HeadParams{}) {}
  explicit HeadModule(const HeadParams& params)
      : params_(params),
        ear_left_(Polarity::ActivateBelow, params.ear_on, params.ear_off),
        ear_right_(Polarity::ActivateBelow, params.ear_on, params.ear_off),
        mouth_(Polarity::ActivateAbove, params.mar_on, params.mar_off),
        yaw_filter_(params.filter),
        pitch_filter_(params.filter),
        profile_(params.profile_deg, params.profile_rearm_deg, params.profile_hold_ms) {}

  std::vector<GestureEvent> step(const FaceFrame* face, ImageSize image, ScreenSize screen, double t_ms) {
    if (last_t_ms_ && t_ms < *last_t_ms_)
      throw Error(ErrorKind::NonMonotonicTime, "face frame at t=" + std::to_string(t_ms) + " is out of order");
    const double dt_s = last_face_t_ms_ ? (t_ms - *last_face_t_ms_) / 1000.0 : 0.0;
    last_t_ms_ = t_ms;
    telemetry_ = {};

    std::vector<GestureEvent> events;
    if (face == nullptr) {
      lose_face();
      return events;
    }
    last_face_t_ms_ = t_ms;
    const auto emit = [&](EventKind kind) -> GestureEvent& {
      events.push_back(GestureEvent{.t_ms = t_ms, .source = SourceModule::Head, .kind = kind});
      return events.back();
    };

    step_eyes(*face, image, emit);

    try {
      const double mar = mouth_aspect_ratio(mouth_points(*face, image));
      telemetry_.mar = mar;
      const bool was_open = mouth_.active();
      const bool open = mouth_.step(mar);
      if (open && !was_open) emit(EventKind::MouthOpen);
      if (!open && was_open) emit(EventKind::MouthClose);
    } catch (const Error&) {
    }

    HeadPose pose;
    try {
      pose = head_pose(*face, image, params_.pitch_ratio);
    } catch (const Error&) {
      return events;
    }
    telemetry_.pose = pose;

    if (auto profile = profile_.step(pose.yaw, t_ms)) emit(*profile);

    // yaw/pitch filters require strictly increasing time
    if (!yaw_filter_.initialized() || dt_s > 0.0) {
      smoothed_ = {yaw_filter_.step(pose.yaw, t_ms), pitch_filter_.step(pose.pitch, t_ms), pose.roll};
    }
    if (!neutral_) neutral_ = smoothed_;

    const double dyaw = smoothed_.yaw - neutral_->yaw;
    const double dpitch = smoothed_.pitch - neutral_->pitch;
    if (params_.mode == HeadMode::Cursor) {
      if (!cursor_) cursor_ = Vec2{screen.width / 2.0, screen.height / 2.0};
      const Vec2 velocity{params_.cursor_gain * deadzone(dyaw, params_.deadzone_deg),
                          -params_.cursor_gain * deadzone(dpitch, params_.deadzone_deg)};
      Vec2 next = *cursor_ + velocity * dt_s;
      next.x = std::clamp(next.x, 0.0, static_cast<double>(screen.width - 1));
      next.y = std::clamp(next.y, 0.0, static_cast<double>(screen.height - 1));
      cursor_ = next;
      const Vec2 rounded{std::round(next.x), std::round(next.y)};
      if (!last_cursor_ || !(*last_cursor_ == rounded)) {
        if (last_cursor_ || !(velocity == Vec2{})) emit(EventKind::CursorMove).cursor = rounded;
        last_cursor_ = rounded;
      }
    } else if (params_.mode == HeadMode::Scroll) {
      const double excess = deadzone(dpitch, params_.scroll_threshold_deg);
      if (excess != 0.0 && dt_s > 0.0) emit(EventKind::Scroll).scroll = params_.scroll_gain * excess * dt_s;
    }
    return events;
  }

  void set_params(const HeadParams& p) {
    ear_left_.set_thresholds(p.ear_on, p.ear_off);
    ear_right_.set_thresholds(p.ear_on, p.ear_off);
    mouth_.set_thresholds(p.mar_on, p.mar_off);
    yaw_filter_.set_params(p.filter);
    pitch_filter_.set_params(p.filter);
    profile_.set_params(p.profile_deg, p.profile_rearm_deg, p.profile_hold_ms);
    params_ = p;
  }

  [[nodiscard]] const HeadParams& params() const noexcept { return params_; }
  [[nodiscard]] const HeadTelemetry& telemetry() const noexcept { return telemetry_; }
  [[nodiscard]] const std::optional<HeadPose>& neutral() const noexcept { return neutral_; }
  [[nodiscard]] bool mouth_open() const noexcept { return mouth_.active(); }

 private:
  template <typename Emit>
  void step_eyes(const FaceFrame& face, ImageSize image, Emit& emit) {
    double ear_l = 0.0;
    double ear_r = 0.0;
    try {
      ear_l = eye_aspect_ratio(eye_points(face, face_lm::kLeftEyeFirst, image));
      ear_r = eye_aspect_ratio(eye_points(face, face_lm::kRightEyeFirst, image));
    } catch (const Error&) {
      return;
    }
    telemetry_.ear_left = ear_l;
    telemetry_.ear_right = ear_r;
    const bool closed_l = ear_left_.step(ear_l);
    const bool closed_r = ear_right_.step(ear_r);

    if (closed_l || closed_r) {
      in_episode_ = true;
      if (closed_l && closed_r) {
        ++both_run_;
        max_both_run_ = std::max(max_both_run_, both_run_);
        return;
      }
      both_run_ = 0;
      if (closed_l && ear_r > params_.ear_off) ++left_only_;
      else if (closed_r && ear_l > params_.ear_off) ++right_only_;
      else mixed_ = true;
      return;
    }
    if (!in_episode_) return;
    // Episode over: one classification per closure.
    if (max_both_run_ >= params_.blink_frames) {
      emit(EventKind::Blink);
    } else if (max_both_run_ == 0 && !mixed_) {
      if (left_only_ >= params_.wink_frames && right_only_ == 0) emit(EventKind::WinkLeft);
      else if (right_only_ >= params_.wink_frames && left_only_ == 0) emit(EventKind::WinkRight);
    }
    reset_episode();
  }

  void reset_episode() {
    in_episode_ = false;
    both_run_ = 0;
    max_both_run_ = 0;
    left_only_ = 0;
    right_only_ = 0;
    mixed_ = false;
  }

  void lose_face() {
    reset_episode();
    ear_left_.reset();
    ear_right_.reset();
    yaw_filter_.reset();
    pitch_filter_.reset();
    profile_.reset();
    neutral_.reset();
    last_face_t_ms_.reset();
    last_cursor_.reset();
  }

  HeadParams params_;
  Hysteresis ear_left_;
  Hysteresis ear_right_;
  Hysteresis mouth_;
  LowPassFilter yaw_filter_;
  LowPassFilter pitch_filter_;
  ProfileTracker profile_;
  HeadPose smoothed_;
  std::optional<HeadPose> neutral_;
  std::optional<Vec2> cursor_;
  std::optional<Vec2> last_cursor_;
  std::optional<double> last_t_ms_;
  std::optional<double> last_face_t_ms_;
  HeadTelemetry telemetry_;

  bool in_episode_ = false;
  int both_run_ = 0;
  int max_both_run_ = 0;
  int left_only_ = 0;
  int right_only_ = 0;
  bool mixed_ = false;
};

}  // namespace touchless
