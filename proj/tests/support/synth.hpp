#pragma once

// Synthetic landmark builders for tests. Geometry is laid out in pixels and
// converted to normalized coordinates at the end, so expected values can be
// written down from the construction parameters.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "touchless/frame.hpp"
#include "touchless/geometry.hpp"

namespace synth {

using namespace touchless;

inline Point2 norm(Vec2 px, ImageSize image) { return {px.x / image.width, px.y / image.height}; }

// --- hands -------------------------------------------------------------------

enum class Fingers { Open, Fist, Point };

struct HandSpec {
  Handedness side = Handedness::Right;
  Vec2 wrist_px{320.0, 360.0};
  double palm_px = 80.0;  // wrist -> middle MCP
  bool palm_toward = true;
  bool index_below_thumb = false;
  Fingers fingers = Fingers::Open;
  // Thumb tip placed this many palm sizes from the index tip (pinch); empty
  // keeps the resting thumb.
  std::optional<double> pinch_gap;
  double score = 0.95;
};

// Upright hand, fingers toward image top. A right hand with its palm to the
// camera has the index finger on the image-left side.
inline HandFrame make_hand(const HandSpec& spec, ImageSize image) {
  const double s = spec.palm_px;
  // mirror: +1 keeps the right-hand/toward layout
  const bool mirrored = (spec.side == Handedness::Left) == spec.palm_toward;
  const double m = mirrored ? -1.0 : 1.0;
  std::array<Vec2, kHandPoints> p{};
  p[hand_lm::kWrist] = {0.0, 0.0};
  p[1] = {-0.35 * s, -0.2 * s};
  p[2] = {-0.55 * s, -0.4 * s};
  p[3] = {-0.7 * s, -0.6 * s};
  p[4] = {-0.8 * s, -0.8 * s};
  const std::array<Vec2, 4> mcp{Vec2{-0.3 * s, -0.95 * s}, Vec2{0.0, -s}, Vec2{0.15 * s, -0.95 * s},
                                Vec2{0.3 * s, -0.85 * s}};
  for (std::size_t f = 0; f < 4; ++f) {
    const std::size_t base = 5 + 4 * f;
    const Vec2 b = mcp[f];
    const bool bent = spec.fingers == Fingers::Fist || (spec.fingers == Fingers::Point && f > 0);
    p[base] = b;
    if (bent) {
      p[base + 1] = b + Vec2{0.0, -0.3 * s};
      p[base + 2] = b + Vec2{0.1 * s, -0.2 * s};
      p[base + 3] = b + Vec2{0.2 * s, -0.1 * s};
    } else {
      p[base + 1] = b + Vec2{0.0, -0.4 * s};
      p[base + 2] = b + Vec2{0.0, -0.65 * s};
      p[base + 3] = b + Vec2{0.0, -0.85 * s};
    }
  }
  if (spec.fingers == Fingers::Fist) {
    p[2] = {-0.45 * s, -0.3 * s};
    p[3] = {-0.4 * s, -0.5 * s};
    p[4] = {-0.2 * s, -0.6 * s};
  }
  if (spec.index_below_thumb) {
    // index curled down next to the thumb
    p[6] = p[5] + Vec2{-0.1 * s, -0.25 * s};
    p[7] = p[5] + Vec2{-0.25 * s, 0.0};
    p[8] = p[4] + Vec2{0.1 * s, 0.2 * s};
  }
  if (spec.pinch_gap) p[4] = p[8] + Vec2{-*spec.pinch_gap * s, 0.0};

  HandFrame hand;
  hand.handedness = spec.side;
  hand.score = spec.score;
  for (std::size_t i = 0; i < kHandPoints; ++i) {
    const Vec2 px = spec.wrist_px + Vec2{m * p[i].x, p[i].y};
    const Point2 n = norm(px, image);
    hand.points[i] = {n.x, n.y, 0.0};
  }
  return hand;
}

// --- faces -------------------------------------------------------------------

struct FaceSpec {
  Vec2 center_px{320.0, 200.0};  // eye-line midpoint
  double jaw_width_px = 140.0;
  double eye_chin_px = 120.0;
  double eye_width_px = 28.0;
  double ear_left = 0.3;   // subject's left eye (points 42-47)
  double ear_right = 0.3;  // subject's right eye (points 36-41)
  double mar = 0.1;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  double pitch_ratio = 0.45;
  double roll_deg = 0.0;
  std::optional<double> iris_px;  // horizontal iris diameter; both eyes
  Vec2 iris_offset;               // iris center shift, eye widths
};

inline FaceFrame make_face(const FaceSpec& spec, ImageSize image) {
  const double W = spec.jaw_width_px;
  const double H = spec.eye_chin_px;
  const double e = spec.eye_width_px;
  std::array<Vec2, kFacePoints> p{};
  for (std::size_t i = 0; i <= 16; ++i) {
    const double a = std::numbers::pi * static_cast<double>(i) / 16.0;
    p[i] = {-W / 2.0 * std::cos(a), H * std::sin(a)};
  }
  for (std::size_t i = 17; i <= 26; ++i) p[i] = {-0.4 * W + 0.8 * W * static_cast<double>(i - 17) / 9.0, -0.15 * H};
  for (std::size_t i = 27; i <= 29; ++i) p[i] = {0.0, 0.1 * H * static_cast<double>(i - 26)};
  const double nose_ratio = spec.pitch_ratio - std::sin(deg_to_rad(spec.pitch_deg)) / 2.0;
  const double nose_x = std::sin(deg_to_rad(spec.yaw_deg)) * W / 2.0;
  p[30] = {nose_x, nose_ratio * H};
  for (std::size_t i = 31; i <= 35; ++i) p[i] = {-0.1 * W + 0.05 * W * static_cast<double>(i - 31), 0.5 * H};

  const auto eye = [&](std::size_t first, double cx, double ear, bool image_left) {
    const double h = ear * e / 2.0;
    const double o = image_left ? -1.0 : 1.0;  // outer corner direction
    p[first + 0] = {cx + o * e / 2.0, 0.0};
    p[first + 1] = {cx + o * e / 6.0, -h};
    p[first + 2] = {cx - o * e / 6.0, -h};
    p[first + 3] = {cx - o * e / 2.0, 0.0};
    p[first + 4] = {cx - o * e / 6.0, h};
    p[first + 5] = {cx + o * e / 6.0, h};
  };
  const double eye_dx = 0.22 * W;
  eye(face_lm::kRightEyeFirst, -eye_dx, spec.ear_right, true);
  eye(face_lm::kLeftEyeFirst, eye_dx, spec.ear_left, false);

  const double mw = 0.3 * W;
  const double my = 0.75 * H;
  for (std::size_t i = 48; i <= 59; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i - 48) / 12.0;
    p[i] = {-0.6 * mw * std::cos(a), my - 0.15 * H * std::sin(a)};
  }
  const double open = spec.mar * mw;  // MAR = opening / width
  p[60] = {-mw / 2.0, my};
  p[64] = {mw / 2.0, my};
  const std::array<double, 3> xs{-mw / 4.0, 0.0, mw / 4.0};
  for (std::size_t k = 0; k < 3; ++k) {
    p[61 + k] = {xs[k], my - open / 2.0};
    p[67 - k] = {xs[k], my + open / 2.0};
  }

  const double roll = deg_to_rad(spec.roll_deg);
  const auto place = [&](Vec2 v) { return norm(spec.center_px + rotate(v, roll), image); };

  FaceFrame face;
  for (std::size_t i = 0; i < kFacePoints; ++i) face.points68[i] = place(p[i]);
  if (spec.iris_px) {
    const double r = *spec.iris_px / 2.0;
    const auto iris = [&](double cx) {
      const Vec2 c{cx + spec.iris_offset.x * e, spec.iris_offset.y * e};
      IrisBlock b{};
      b[iris_lm::kCenter] = place(c);
      b[iris_lm::kRight] = place(c + Vec2{r, 0.0});
      b[iris_lm::kTop] = place(c + Vec2{0.0, -r});
      b[iris_lm::kLeft] = place(c + Vec2{-r, 0.0});
      b[iris_lm::kBottom] = place(c + Vec2{0.0, r});
      return b;
    };
    face.iris_right = iris(-eye_dx);
    face.iris_left = iris(eye_dx);
  }
  return face;
}

// --- bodies ------------------------------------------------------------------

struct PoseSpec {
  Vec2 hip_mid_px{320.0, 300.0};
  double shoulder_w = 100.0;
  double hip_w = 70.0;
  double torso = 150.0;  // shoulder midpoint to hip midpoint
  double thigh = 110.0;
  double shin = 110.0;
  double upper_arm = 70.0;
  double forearm = 65.0;
  double knee_l = 175.0;  // interior angles, degrees
  double knee_r = 175.0;
  double elbow_l = 170.0;
  double elbow_r = 170.0;
  double lift = 0.0;  // whole body raised by this many px
  double visibility = 1.0;
  std::optional<double> nose_mm;
};

// Front view. Thighs hang straight down; a bent knee swings the shin
// outward, so the knee's interior angle is exactly knee_*. Arms hang down
// with the forearm swung outward by the elbow angle.
inline PoseFrame make_pose(const PoseSpec& spec, ImageSize image) {
  std::array<Vec2, kPosePoints> p{};
  const Vec2 hip = spec.hip_mid_px - Vec2{0.0, spec.lift};
  const Vec2 shoulder_mid = hip - Vec2{0.0, spec.torso};
  // subject's left appears on image right
  const auto side = [](bool left) { return left ? 1.0 : -1.0; };
  for (bool left : {true, false}) {
    const double sx = side(left);
    const Vec2 h = hip + Vec2{sx * spec.hip_w / 2.0, 0.0};
    const Vec2 k = h + Vec2{0.0, spec.thigh};
    const double phi = deg_to_rad(180.0 - (left ? spec.knee_l : spec.knee_r));
    const Vec2 a = k + Vec2{sx * spec.shin * std::sin(phi), spec.shin * std::cos(phi)};
    const Vec2 s = shoulder_mid + Vec2{sx * spec.shoulder_w / 2.0, 0.0};
    const Vec2 el = s + Vec2{0.0, spec.upper_arm};
    const double psi = deg_to_rad(180.0 - (left ? spec.elbow_l : spec.elbow_r));
    const Vec2 w = el + Vec2{sx * spec.forearm * std::sin(psi), spec.forearm * std::cos(psi)};
    p[left ? pose_lm::kLeftHip : pose_lm::kRightHip] = h;
    p[left ? pose_lm::kLeftKnee : pose_lm::kRightKnee] = k;
    p[left ? pose_lm::kLeftAnkle : pose_lm::kRightAnkle] = a;
    p[left ? pose_lm::kLeftShoulder : pose_lm::kRightShoulder] = s;
    p[left ? pose_lm::kLeftElbow : pose_lm::kRightElbow] = el;
    p[left ? pose_lm::kLeftWrist : pose_lm::kRightWrist] = w;
  }
  p[pose_lm::kNose] = shoulder_mid - Vec2{0.0, 0.4 * spec.torso};
  // remaining points (eyes, ears, mouth, hands, feet) near their parents
  for (std::size_t i = 1; i <= 10; ++i) p[i] = p[pose_lm::kNose] + Vec2{(static_cast<double>(i) - 5.5) * 4.0, -5.0};
  for (std::size_t i = 17; i <= 22; ++i) p[i] = p[i % 2 ? pose_lm::kLeftWrist : pose_lm::kRightWrist] + Vec2{0.0, 8.0};
  for (std::size_t i = 29; i <= 32; ++i) p[i] = p[i % 2 ? pose_lm::kLeftAnkle : pose_lm::kRightAnkle] + Vec2{0.0, 10.0};

  PoseFrame pose;
  for (std::size_t i = 0; i < kPosePoints; ++i) {
    const Point2 n = norm(p[i], image);
    pose.points[i] = {{n.x, n.y, 0.0}, spec.visibility};
  }
  pose.metric_nose_depth_mm = spec.nose_mm;
  return pose;
}

inline LandmarkFrame frame_at(double t_ms, ImageSize image = {640, 480}) {
  LandmarkFrame f;
  f.t_ms = t_ms;
  f.image = image;
  return f;
}

}  // namespace synth
