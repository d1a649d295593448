#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "touchless/geometry.hpp"

namespace touchless {

// Normalized image coordinates: x left->right, y top->bottom, both nominally
// in [0, 1]. Point3::z is the provider's relative depth (smaller = closer).
using Point2 = Vec2;
using Point3 = Vec3;

inline constexpr std::size_t kHandPoints = 21;
inline constexpr std::size_t kFacePoints = 68;
inline constexpr std::size_t kIrisPoints = 5;
inline constexpr std::size_t kPosePoints = 33;

// Standard 21-point hand topology.
namespace hand_lm {
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kThumbCmc = 1;
inline constexpr std::size_t kThumbMcp = 2;
inline constexpr std::size_t kThumbIp = 3;
inline constexpr std::size_t kThumbTip = 4;
inline constexpr std::size_t kIndexMcp = 5;
inline constexpr std::size_t kIndexPip = 6;
inline constexpr std::size_t kIndexDip = 7;
inline constexpr std::size_t kIndexTip = 8;
inline constexpr std::size_t kMiddleMcp = 9;
inline constexpr std::size_t kMiddlePip = 10;
inline constexpr std::size_t kMiddleDip = 11;
inline constexpr std::size_t kMiddleTip = 12;
inline constexpr std::size_t kRingMcp = 13;
inline constexpr std::size_t kRingPip = 14;
inline constexpr std::size_t kRingDip = 15;
inline constexpr std::size_t kRingTip = 16;
inline constexpr std::size_t kPinkyMcp = 17;
inline constexpr std::size_t kPinkyPip = 18;
inline constexpr std::size_t kPinkyDip = 19;
inline constexpr std::size_t kPinkyTip = 20;
}  // namespace hand_lm

// Standard 68-point face topology. "Left"/"right" name the subject's sides:
// the subject's right eye (36-41) appears on the image left.
namespace face_lm {
inline constexpr std::size_t kJawFirst = 0;
inline constexpr std::size_t kChin = 8;
inline constexpr std::size_t kJawLast = 16;
inline constexpr std::size_t kNoseTip = 30;
inline constexpr std::size_t kRightEyeFirst = 36;
inline constexpr std::size_t kLeftEyeFirst = 42;
inline constexpr std::size_t kInnerMouthFirst = 60;
}  // namespace face_lm

// Iris block order: center, then right, top, left, bottom boundary points.
namespace iris_lm {
inline constexpr std::size_t kCenter = 0;
inline constexpr std::size_t kRight = 1;
inline constexpr std::size_t kTop = 2;
inline constexpr std::size_t kLeft = 3;
inline constexpr std::size_t kBottom = 4;
}  // namespace iris_lm

// Standard 33-point full-body topology (subject's sides).
namespace pose_lm {
inline constexpr std::size_t kNose = 0;
inline constexpr std::size_t kLeftShoulder = 11;
inline constexpr std::size_t kRightShoulder = 12;
inline constexpr std::size_t kLeftElbow = 13;
inline constexpr std::size_t kRightElbow = 14;
inline constexpr std::size_t kLeftWrist = 15;
inline constexpr std::size_t kRightWrist = 16;
inline constexpr std::size_t kLeftHip = 23;
inline constexpr std::size_t kRightHip = 24;
inline constexpr std::size_t kLeftKnee = 25;
inline constexpr std::size_t kRightKnee = 26;
inline constexpr std::size_t kLeftAnkle = 27;
inline constexpr std::size_t kRightAnkle = 28;
}  // namespace pose_lm

enum class Handedness { Left, Right };

struct HandFrame {
  Handedness handedness = Handedness::Right;
  double score = 1.0;
  std::array<Point3, kHandPoints> points{};

  friend bool operator==(const HandFrame&, const HandFrame&) = default;
};

using IrisBlock = std::array<Point2, kIrisPoints>;

struct FaceFrame {
  std::array<Point2, kFacePoints> points68{};
  std::optional<IrisBlock> iris_left;
  std::optional<IrisBlock> iris_right;

  friend bool operator==(const FaceFrame&, const FaceFrame&) = default;
};

struct PoseLandmark {
  Point3 position;
  double visibility = 1.0;

  friend bool operator==(const PoseLandmark&, const PoseLandmark&) = default;
};

struct PoseFrame {
  std::array<PoseLandmark, kPosePoints> points{};
  std::optional<double> metric_nose_depth_mm;

  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(ImageSize, ImageSize) = default;
};

struct LandmarkFrame {
  double t_ms = 0.0;
  ImageSize image;
  std::vector<HandFrame> hands;
  std::optional<FaceFrame> face;
  std::optional<PoseFrame> pose;

  [[nodiscard]] const HandFrame* hand(Handedness side) const noexcept {
    for (const auto& h : hands)
      if (h.handedness == side) return &h;
    return nullptr;
  }

  friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;
};

// Metric geometry is done in pixel space so that x and y share one unit.
inline Vec2 to_pixels(Point2 p, ImageSize image) noexcept {
  return {p.x * image.width, p.y * image.height};
}

inline Vec3 to_pixels(Point3 p, ImageSize image) noexcept {
  return {p.x * image.width, p.y * image.height, p.z};
}

inline Vec2 to_pixels_xy(Point3 p, ImageSize image) noexcept {
  return {p.x * image.width, p.y * image.height};
}

}  // namespace touchless
