#pragma once

// Depth capture and gaze-to-screen estimation.
//
// Camera frame: origin at the camera, x toward image right, y toward image
// down, z toward the user (mm). The screen lies in the z = 0 plane and image
// right is treated as screen right (selfie orientation).

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "touchless/error.hpp"
#include "touchless/events.hpp"
#include "touchless/face_head.hpp"
#include "touchless/frame.hpp"
#include "touchless/hand.hpp"
#include "touchless/signal.hpp"

namespace touchless {

inline constexpr double kIrisDiameterMm = 11.7;

struct CameraModel {
  double f_px = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  // Approximate intrinsics when no calibration is available: f = image width
  // (about 53 degrees horizontal field of view), principal point at center.
  static CameraModel approximate(ImageSize image) noexcept {
    return {static_cast<double>(image.width), image.width / 2.0, image.height / 2.0};
  }

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct ScreenGeometry {
  int width_px = 1920;
  int height_px = 1080;
  double width_mm = 600.0;
  double height_mm = 340.0;
  Vec2 camera_offset_mm;  // camera position relative to the screen's top-center

  friend bool operator==(const ScreenGeometry&, const ScreenGeometry&) = default;
};

enum class DepthSource { Iris, PoseMetric, Palm, Default };

inline constexpr std::string_view to_string(DepthSource s) noexcept {
  switch (s) {
    case DepthSource::Iris: return "iris";
    case DepthSource::PoseMetric: return "pose";
    case DepthSource::Palm: return "palm";
    case DepthSource::Default: return "default";
  }
  return "?";
}

struct DepthEstimate {
  double depth_mm = 0.0;
  DepthSource source = DepthSource::Default;
};

struct GazeSample {
  Vec3 eye_position_mm;
  Vec3 gaze_direction;  // unit, z < 0
  DepthSource depth_source = DepthSource::Default;
};

// Horizontal iris diameter: distance between the left and right boundary
// points.
inline double iris_diameter_px(const IrisBlock& iris, ImageSize image) {
  const double d = distance(to_pixels(iris[iris_lm::kLeft], image), to_pixels(iris[iris_lm::kRight], image));
  if (d == 0.0) throw Error(ErrorKind::DegenerateIris, "iris boundary points coincide");
  return d;
}

inline double depth_from_iris(double d_px, const CameraModel& camera, double iris_mm = kIrisDiameterMm) {
  if (!(d_px > 0.0)) throw Error(ErrorKind::DegenerateIris, "iris diameter must be positive");
  return camera.f_px * iris_mm / d_px;
}

// Fallback chain: iris -> provider metric nose depth -> calibrated palm ->
// default distance.
inline DepthEstimate resolve_depth(const LandmarkFrame& frame, const CameraModel& camera,
                                   std::optional<double> palm_k_mm_px, double default_mm = 600.0,
                                   double iris_mm = kIrisDiameterMm,
                                   Handedness preferred_hand = Handedness::Right) {
  if (frame.face) {
    double sum = 0.0;
    int n = 0;
    for (const auto* block : {&frame.face->iris_left, &frame.face->iris_right}) {
      if (!*block) continue;
      try {
        sum += depth_from_iris(iris_diameter_px(**block, frame.image), camera, iris_mm);
        ++n;
      } catch (const Error&) {
      }
    }
    if (n > 0) return {sum / n, DepthSource::Iris};
  }
  if (frame.pose && frame.pose->metric_nose_depth_mm) return {*frame.pose->metric_nose_depth_mm, DepthSource::PoseMetric};
  if (palm_k_mm_px && !frame.hands.empty()) {
    const HandFrame* hand = frame.hand(preferred_hand);
    if (hand == nullptr) hand = &frame.hands.front();
    try {
      return {estimate_depth_from_palm(palm_size_px(*hand, frame.image), *palm_k_mm_px), DepthSource::Palm};
    } catch (const Error&) {
    }
  }
  return {default_mm, DepthSource::Default};
}

inline Vec3 back_project(double u, double v, double z_mm, const CameraModel& camera) noexcept {
  return {(u - camera.cx) * z_mm / camera.f_px, (v - camera.cy) * z_mm / camera.f_px, z_mm};
}

// Unit gaze vector for effective yaw/pitch in degrees; (0, 0) looks straight
// back at the screen (-z).
inline Vec3 gaze_direction(double yaw_deg, double pitch_deg) noexcept {
  const double y = deg_to_rad(yaw_deg);
  const double p = deg_to_rad(pitch_deg);
  return normalized(Vec3{std::sin(y) * std::cos(p), -std::sin(p), -std::cos(y) * std::cos(p)});
}

// Head pose plus iris displacement inside the eye (in eye widths, +x image
// right, +y image down) scaled by `gain_deg`.
inline Vec3 gaze_direction(const HeadPose& head, Vec2 iris_offset, double gain_deg) noexcept {
  return gaze_direction(head.yaw + gain_deg * iris_offset.x, head.pitch - gain_deg * iris_offset.y);
}

// Ray/screen-plane intersection in screen pixels; empty when the ray misses
// the screen rectangle or points away from it.
inline std::optional<Vec2> screen_point(const GazeSample& sample, const ScreenGeometry& screen) noexcept {
  const Vec3& e = sample.eye_position_mm;
  const Vec3& g = sample.gaze_direction;
  if (!(g.z < 0.0)) return std::nullopt;
  const double t = -e.z / g.z;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 hit = e + g * t;
  const double x_mm = screen.width_mm / 2.0 + screen.camera_offset_mm.x + hit.x;
  const double y_mm = screen.camera_offset_mm.y + hit.y;
  if (x_mm < 0.0 || x_mm > screen.width_mm || y_mm < 0.0 || y_mm > screen.height_mm) return std::nullopt;
  return Vec2{x_mm * screen.width_px / screen.width_mm, y_mm * screen.height_px / screen.height_mm};
}

// Mean iris displacement from the eye center in eye widths, over the eyes
// that carry an iris block.
inline std::optional<Vec2> iris_offset(const FaceFrame& face, ImageSize image) {
  Vec2 sum;
  int n = 0;
  const auto add = [&](const std::optional<IrisBlock>& iris, std::size_t first) {
    if (!iris) return;
    const auto eye = eye_points(face, first, image);
    const double width = distance(eye[0], eye[3]);
    if (width == 0.0) return;
    sum = sum + (to_pixels((*iris)[iris_lm::kCenter], image) - eye_center(face, first, image)) / width;
    ++n;
  };
  add(face.iris_left, face_lm::kLeftEyeFirst);
  add(face.iris_right, face_lm::kRightEyeFirst);
  if (n == 0) return std::nullopt;
  return sum / n;
}

struct GazeParams {
  double iris_mm = kIrisDiameterMm;
  double iris_gain_deg = 150.0;
  double pitch_ratio = 0.45;
  LowPassParams filter;

  friend bool operator==(const GazeParams&, const GazeParams&) = default;
};

class GazeModule {
 public:
  GazeModule() : GazeModule(GazeParams{}) {}
  explicit GazeModule(const GazeParams& params)
      : params_(params), filter_x_(params.filter), filter_y_(params.filter) {}

  std::vector<GestureEvent> step(const LandmarkFrame& frame, const DepthEstimate& depth, const CameraModel& camera,
                                 const ScreenGeometry& screen) {
    std::vector<GestureEvent> events;
    last_point_.reset();
    if (!frame.face) {
      filter_x_.reset();
      filter_y_.reset();
      last_cursor_.reset();
      return events;
    }
    HeadPose head;
    try {
      head = head_pose(*frame.face, frame.image, params_.pitch_ratio);
    } catch (const Error&) {
      return events;
    }
    const Vec2 offset = iris_offset(*frame.face, frame.image).value_or(Vec2{});
    const Vec2 eye_px = (eye_center(*frame.face, face_lm::kLeftEyeFirst, frame.image) +
                         eye_center(*frame.face, face_lm::kRightEyeFirst, frame.image)) /
                        2.0;
    const GazeSample sample{back_project(eye_px.x, eye_px.y, depth.depth_mm, camera),
                            gaze_direction(head, offset, params_.iris_gain_deg), depth.source};
    const auto hit = screen_point(sample, screen);
    if (!hit) return events;
    last_point_ = hit;

    // Smoothed in screen fractions so the filter's speed term is unit-free.
    if (filter_x_.initialized() && !(frame.t_ms > last_t_ms_)) return events;
    last_t_ms_ = frame.t_ms;
    const Vec2 s{filter_x_.step(hit->x / screen.width_px, frame.t_ms) * screen.width_px,
                 filter_y_.step(hit->y / screen.height_px, frame.t_ms) * screen.height_px};
    const Vec2 rounded{std::round(std::clamp(s.x, 0.0, screen.width_px - 1.0)),
                       std::round(std::clamp(s.y, 0.0, screen.height_px - 1.0))};
    if (!last_cursor_ || !(*last_cursor_ == rounded)) {
      events.push_back(GestureEvent{.t_ms = frame.t_ms, .source = SourceModule::Gaze, .kind = EventKind::CursorMove,
                                    .cursor = rounded});
      last_cursor_ = rounded;
    }
    return events;
  }

  void set_params(const GazeParams& p) {
    filter_x_.set_params(p.filter);
    filter_y_.set_params(p.filter);
    params_ = p;
  }

  [[nodiscard]] const GazeParams& params() const noexcept { return params_; }
  [[nodiscard]] const std::optional<Vec2>& last_point() const noexcept { return last_point_; }

 private:
  GazeParams params_;
  LowPassFilter filter_x_;
  LowPassFilter filter_y_;
  std::optional<Vec2> last_cursor_;
  std::optional<Vec2> last_point_;
  double last_t_ms_ = 0.0;
};

}  // namespace touchless
