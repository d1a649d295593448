#pragma once

// NDJSON landmark-frame wire format.
//
//   {"t": <ms>, "img": {"w": <int>, "h": <int>},
//    "hands": [{"hand": "left"|"right", "score": <0..1>, "lm": [[x,y,z] x21]}],
//    "face": {"lm68": [[x,y] x68], "iris_l": [[x,y] x5]|null, "iris_r": ...}|null,
//    "pose": {"lm": [[x,y,z,vis] x33], "nose_mm": <float>|null}|null}
//
// Unknown top-level fields are ignored. Absent blocks stay absent.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "touchless/error.hpp"
#include "touchless/frame.hpp"

namespace touchless {

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::SchemaViolation, field + ": " + what, field);
}

inline double read_number(const json& j, const std::string& field) {
  if (!j.is_number()) schema_error(field, "expected number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(field, "non-finite value");
  return v;
}

inline double read_unit(const json& j, const std::string& field) {
  const double v = read_number(j, field);
  if (v < 0.0 || v > 1.0) schema_error(field, "expected value in [0,1]");
  return v;
}

inline int read_positive_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) schema_error(field, "expected integer");
  const auto v = j.get<std::int64_t>();
  if (v <= 0 || v > 1'000'000) schema_error(field, "expected positive integer");
  return static_cast<int>(v);
}

inline const json& require_array(const json& j, const std::string& field, std::size_t count) {
  if (!j.is_array()) schema_error(field, "expected array");
  if (j.size() != count)
    throw Error(ErrorKind::SchemaViolation,
                field + ": expected " + std::to_string(count) + " (got " + std::to_string(j.size()) + ")",
                field);
  return j;
}

inline Point2 read_point2(const json& j, const std::string& field) {
  require_array(j, field, 2);
  return {read_number(j[0], field + "[0]"), read_number(j[1], field + "[1]")};
}

inline Point3 read_point3(const json& j, const std::string& field) {
  require_array(j, field, 3);
  return {read_number(j[0], field + "[0]"), read_number(j[1], field + "[1]"),
          read_number(j[2], field + "[2]")};
}

template <std::size_t N>
std::array<Point2, N> read_points2(const json& j, const std::string& field) {
  require_array(j, field, N);
  std::array<Point2, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = read_point2(j[i], field + "[" + std::to_string(i) + "]");
  return out;
}

inline HandFrame read_hand(const json& j, const std::string& field) {
  if (!j.is_object()) schema_error(field, "expected object");
  HandFrame hand;
  const auto side = j.find("hand");
  if (side == j.end() || !side->is_string()) schema_error(field + ".hand", "expected \"left\" or \"right\"");
  const auto& s = side->get_ref<const std::string&>();
  if (s == "left") {
    hand.handedness = Handedness::Left;
  } else if (s == "right") {
    hand.handedness = Handedness::Right;
  } else {
    schema_error(field + ".hand", "expected \"left\" or \"right\"");
  }
  const auto score = j.find("score");
  if (score == j.end()) schema_error(field + ".score", "missing");
  hand.score = read_unit(*score, field + ".score");
  const auto lm = j.find("lm");
  if (lm == j.end()) schema_error(field + ".lm", "missing");
  require_array(*lm, field + ".lm", kHandPoints);
  for (std::size_t i = 0; i < kHandPoints; ++i)
    hand.points[i] = read_point3((*lm)[i], field + ".lm[" + std::to_string(i) + "]");
  return hand;
}

inline std::optional<IrisBlock> read_iris(const json& face, const char* key, const std::string& field) {
  const auto it = face.find(key);
  if (it == face.end() || it->is_null()) return std::nullopt;
  return read_points2<kIrisPoints>(*it, field);
}

inline FaceFrame read_face(const json& j) {
  if (!j.is_object()) schema_error("face", "expected object or null");
  FaceFrame face;
  const auto lm = j.find("lm68");
  if (lm == j.end()) schema_error("face.lm68", "missing");
  face.points68 = read_points2<kFacePoints>(*lm, "face.lm68");
  face.iris_left = read_iris(j, "iris_l", "face.iris_l");
  face.iris_right = read_iris(j, "iris_r", "face.iris_r");
  return face;
}

inline PoseFrame read_pose(const json& j) {
  if (!j.is_object()) schema_error("pose", "expected object or null");
  PoseFrame pose;
  const auto lm = j.find("lm");
  if (lm == j.end()) schema_error("pose.lm", "missing");
  require_array(*lm, "pose.lm", kPosePoints);
  for (std::size_t i = 0; i < kPosePoints; ++i) {
    const std::string f = "pose.lm[" + std::to_string(i) + "]";
    const auto& p = (*lm)[i];
    require_array(p, f, 4);
    pose.points[i].position = {read_number(p[0], f + "[0]"), read_number(p[1], f + "[1]"),
                               read_number(p[2], f + "[2]")};
    pose.points[i].visibility = read_unit(p[3], f + "[3]");
  }
  const auto nose = j.find("nose_mm");
  if (nose != j.end() && !nose->is_null()) {
    const double mm = read_number(*nose, "pose.nose_mm");
    if (mm <= 0.0) schema_error("pose.nose_mm", "expected positive value");
    pose.metric_nose_depth_mm = mm;
  }
  return pose;
}

// Whole-millisecond timestamps are written as integers so that the canonical
// form of a frame at t=0 is `"t":0`.
inline nlohmann::ordered_json number_out(double v) {
  constexpr double kExact = 9007199254740992.0;  // 2^53
  if (v == std::floor(v) && std::abs(v) < kExact && !(v == 0.0 && std::signbit(v)))
    return static_cast<std::int64_t>(v);
  return v;
}

}  // namespace detail

// Parses one NDJSON record. Throws Error{MalformedRecord} on bad syntax and
// Error{SchemaViolation} (with the offending field) on contract violations.
inline LandmarkFrame parse_frame(std::string_view line) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedRecord, "record is not a JSON object");

  LandmarkFrame frame;
  const auto t = doc.find("t");
  if (t == doc.end()) detail::schema_error("t", "missing");
  frame.t_ms = detail::read_number(*t, "t");

  const auto img = doc.find("img");
  if (img == doc.end() || !img->is_object()) detail::schema_error("img", "expected object");
  const auto w = img->find("w");
  const auto h = img->find("h");
  if (w == img->end()) detail::schema_error("img.w", "missing");
  if (h == img->end()) detail::schema_error("img.h", "missing");
  frame.image = {detail::read_positive_int(*w, "img.w"), detail::read_positive_int(*h, "img.h")};

  const auto hands = doc.find("hands");
  if (hands != doc.end() && !hands->is_null()) {
    if (!hands->is_array()) detail::schema_error("hands", "expected array");
    if (hands->size() > 2) detail::schema_error("hands", "at most 2 hands");
    for (std::size_t i = 0; i < hands->size(); ++i) {
      auto hand = detail::read_hand((*hands)[i], "hands[" + std::to_string(i) + "]");
      if (frame.hand(hand.handedness) != nullptr)
        detail::schema_error("hands[" + std::to_string(i) + "].hand", "duplicate handedness");
      frame.hands.push_back(hand);
    }
  }

  const auto face = doc.find("face");
  if (face != doc.end() && !face->is_null()) frame.face = detail::read_face(*face);

  const auto pose = doc.find("pose");
  if (pose != doc.end() && !pose->is_null()) frame.pose = detail::read_pose(*pose);

  return frame;
}

// Canonical single-line encoding (no trailing newline). Doubles are written
// in shortest round-trip form, so parse_frame(serialize_frame(f)) == f.
inline std::string serialize_frame(const LandmarkFrame& frame) {
  using oj = nlohmann::ordered_json;
  const auto pt2 = [](Point2 p) { return oj::array({p.x, p.y}); };

  oj doc;
  doc["t"] = detail::number_out(frame.t_ms);
  doc["img"] = {{"w", frame.image.width}, {"h", frame.image.height}};

  oj hands = oj::array();
  for (const auto& hand : frame.hands) {
    oj lm = oj::array();
    for (const auto& p : hand.points) lm.push_back(oj::array({p.x, p.y, p.z}));
    oj h;
    h["hand"] = hand.handedness == Handedness::Left ? "left" : "right";
    h["score"] = hand.score;
    h["lm"] = std::move(lm);
    hands.push_back(std::move(h));
  }
  doc["hands"] = std::move(hands);

  if (frame.face) {
    const auto iris = [&](const std::optional<IrisBlock>& block) -> oj {
      if (!block) return nullptr;
      oj arr = oj::array();
      for (const auto& p : *block) arr.push_back(pt2(p));
      return arr;
    };
    oj lm = oj::array();
    for (const auto& p : frame.face->points68) lm.push_back(pt2(p));
    oj f;
    f["lm68"] = std::move(lm);
    f["iris_l"] = iris(frame.face->iris_left);
    f["iris_r"] = iris(frame.face->iris_right);
    doc["face"] = std::move(f);
  } else {
    doc["face"] = nullptr;
  }

  if (frame.pose) {
    oj lm = oj::array();
    for (const auto& p : frame.pose->points)
      lm.push_back(oj::array({p.position.x, p.position.y, p.position.z, p.visibility}));
    oj pose;
    pose["lm"] = std::move(lm);
    if (frame.pose->metric_nose_depth_mm)
      pose["nose_mm"] = *frame.pose->metric_nose_depth_mm;
    else
      pose["nose_mm"] = nullptr;
    doc["pose"] = std::move(pose);
  } else {
    doc["pose"] = nullptr;
  }
  return doc.dump();
}

}  // namespace touchless
