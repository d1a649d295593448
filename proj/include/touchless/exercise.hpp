#pragma once

// Full-body exercise recognition: joint-angle features, built-in repetition
// detectors, user-recorded templates and per-class time accounting.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/error.hpp"
#include "touchless/events.hpp"
#include "touchless/frame.hpp"
#include "touchless/signal.hpp"

namespace touchless {

inline double joint_angle(Vec2 a, Vec2 b, Vec2 c) {
  const auto angle = interior_angle_deg(a, b, c);
  if (!angle) throw Error(ErrorKind::DegenerateJoint, "zero-length limb segment");
  return *angle;
}

enum class Feature : std::size_t {
  KneeL,
  KneeR,
  ElbowL,
  ElbowR,
  AnkleHeightL,
  AnkleHeightR,
  ReachL,
  ReachR,
  HipY,
  Torso,
};

inline constexpr std::size_t kFeatureCount = 10;
// Features that are invariant to where the user stands; the ones templates use.
inline constexpr std::size_t kTemplateFeatureCount = 8;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "knee_l", "knee_r", "elbow_l", "elbow_r", "ankle_height_l", "ankle_height_r", "reach_l", "reach_r", "hip_y",
    "torso"};

inline std::optional<Feature> feature_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  return std::nullopt;
}

inline bool is_angle_feature(Feature f) noexcept { return static_cast<std::size_t>(f) < 4; }

// Per-frame skeleton features, pixel based:
//   knee_*/elbow_*   interior angle in degrees
//   ankle_height_*   height of this ankle above the other one, torso lengths
//   reach_*          wrist-shoulder distance over arm length (1 = straight arm)
//   hip_y            hip midpoint image y, px (grows downward)
//   torso            shoulder midpoint to hip midpoint, px
// A feature whose landmarks are not visible enough stays empty.
struct PoseFeatures {
  std::array<std::optional<double>, kFeatureCount> values{};

  [[nodiscard]] const std::optional<double>& operator[](Feature f) const noexcept {
    return values[static_cast<std::size_t>(f)];
  }
  std::optional<double>& operator[](Feature f) noexcept { return values[static_cast<std::size_t>(f)]; }
};

inline PoseFeatures extract_features(const PoseFrame& pose, ImageSize image, double min_visibility = 0.5) {
  using namespace pose_lm;
  PoseFeatures out;
  const auto visible = [&](std::initializer_list<std::size_t> ids) {
    return std::all_of(ids.begin(), ids.end(), [&](std::size_t i) { return pose.points[i].visibility >= min_visibility; });
  };
  const auto px = [&](std::size_t i) { return to_pixels_xy(pose.points[i].position, image); };
  const auto angle = [&](Feature f, std::size_t a, std::size_t b, std::size_t c) {
    if (!visible({a, b, c})) return;
    if (auto v = interior_angle_deg(px(a), px(b), px(c))) out[f] = *v;
  };
  angle(Feature::KneeL, kLeftHip, kLeftKnee, kLeftAnkle);
  angle(Feature::KneeR, kRightHip, kRightKnee, kRightAnkle);
  angle(Feature::ElbowL, kLeftShoulder, kLeftElbow, kLeftWrist);
  angle(Feature::ElbowR, kRightShoulder, kRightElbow, kRightWrist);

  const auto reach = [&](Feature f, std::size_t s, std::size_t e, std::size_t w) {
    if (!visible({s, e, w})) return;
    const double arm = distance(px(s), px(e)) + distance(px(e), px(w));
    if (arm > 0.0) out[f] = distance(px(s), px(w)) / arm;
  };
  reach(Feature::ReachL, kLeftShoulder, kLeftElbow, kLeftWrist);
  reach(Feature::ReachR, kRightShoulder, kRightElbow, kRightWrist);

  if (visible({kLeftHip, kRightHip})) {
    const Vec2 hip_mid = (px(kLeftHip) + px(kRightHip)) / 2.0;
    out[Feature::HipY] = hip_mid.y;
    if (visible({kLeftShoulder, kRightShoulder})) {
      const Vec2 shoulder_mid = (px(kLeftShoulder) + px(kRightShoulder)) / 2.0;
      const double torso = distance(shoulder_mid, hip_mid);
      if (torso > 0.0) out[Feature::Torso] = torso;
    }
  }
  if (out[Feature::Torso] && visible({kLeftAnkle, kRightAnkle})) {
    const double torso = *out[Feature::Torso];
    const double yl = px(kLeftAnkle).y;
    const double yr = px(kRightAnkle).y;
    out[Feature::AnkleHeightL] = (yr - yl) / torso;
    out[Feature::AnkleHeightR] = (yl - yr) / torso;
  }
  return out;
}

enum class RepPhase { Neutral, Down, Up };

// Two-threshold repetition automaton on a value that dips for the "down"
// half of a rep: below `down` enters Down, above `up` completes the rep.
struct RepCounter {
  RepPhase phase = RepPhase::Neutral;
  int count = 0;
  double down = 100.0;
  double up = 160.0;
  double last_transition_ms = 0.0;

  RepCounter() = default;
  RepCounter(double down_threshold, double up_threshold) : down(down_threshold), up(up_threshold) {
    if (!(down < up)) throw Error(ErrorKind::InvalidThresholds, "rep counter needs down < up");
  }

  // True when this sample completes a repetition.
  bool step(double value, double t_ms) {
    if (value < down && phase != RepPhase::Down) {
      phase = RepPhase::Down;
      last_transition_ms = t_ms;
    } else if (value > up && phase == RepPhase::Down) {
      phase = RepPhase::Up;
      last_transition_ms = t_ms;
      ++count;
      return true;
    }
    return false;
  }
};

namespace detail {

// Samples over a trailing time window; median as a robust baseline.
class RollingWindow {
 public:
  explicit RollingWindow(double span_ms = 2000.0) : span_ms_(span_ms) {}

  void add(double t_ms, double v) {
    samples_.emplace_back(t_ms, v);
    prune(t_ms);
  }
  void prune(double t_ms) {
    while (!samples_.empty() && samples_.front().first < t_ms - span_ms_) samples_.pop_front();
  }
  [[nodiscard]] std::optional<double> median() const {
    if (samples_.empty()) return std::nullopt;
    std::vector<double> v;
    v.reserve(samples_.size());
    for (const auto& s : samples_) v.push_back(s.second);
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  }
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  void set_span(double span_ms) noexcept { span_ms_ = span_ms; }
  void clear() noexcept { samples_.clear(); }

 private:
  double span_ms_;
  std::deque<std::pair<double, double>> samples_;
};

}  // namespace detail

struct ExerciseParams {
  bool standing = false;
  double squat_down_deg = 100.0;
  double squat_up_deg = 160.0;
  double jump_rise = 0.25;  // torso lengths
  double jump_return_ms = 1000.0;
  double baseline_ms = 2000.0;
  double punch_low = 0.6;
  double punch_high = 0.9;
  double punch_window_ms = 300.0;
  double kick_rise = 0.5;  // torso lengths
  double refractory_ms = 250.0;
  double cycle_band_deg = 10.0;
  double cycle_band_deg_sitting = 6.0;
  double cycle_min_half_ms = 150.0;
  double cycle_max_half_ms = 1500.0;
  double cycle_timeout_ms = 2000.0;
  double template_on = 0.8;
  double template_off = 0.7;
  double min_visibility = 0.5;

  friend bool operator==(const ExerciseParams&, const ExerciseParams&) = default;
};

// Hip rise above a rolling median baseline, followed by a return to the
// baseline within jump_return_ms.
class JumpDetector {
 public:
  JumpDetector() : JumpDetector(ExerciseParams{}) {}
  explicit JumpDetector(const ExerciseParams& p) : params_(p), baseline_(p.baseline_ms) {}

  bool step(double hip_y, double torso, double t_ms) {
    baseline_.prune(t_ms);
    const auto base = baseline_.median();
    if (!base || baseline_.size() < 3) {
      baseline_.add(t_ms, hip_y);
      return false;
    }
    const double rise = (*base - hip_y) / torso;  // image y grows downward
    const double landed = params_.jump_rise / 2.0;
    switch (state_) {
      case State::Ground:
        if (rise > params_.jump_rise) {
          state_ = State::Air;
          since_ms_ = t_ms;
        } else {
          baseline_.add(t_ms, hip_y);
        }
        return false;
      case State::Air:
        if (rise < landed) {
          state_ = State::Ground;
          baseline_.add(t_ms, hip_y);
          return t_ms - since_ms_ <= params_.jump_return_ms;
        }
        if (t_ms - since_ms_ > params_.jump_return_ms) state_ = State::Stuck;
        return false;
      case State::Stuck:
        if (rise < landed) {
          state_ = State::Ground;
          baseline_.add(t_ms, hip_y);
        } else if (t_ms - since_ms_ > params_.jump_return_ms + params_.baseline_ms) {
          // The user has moved; start a fresh baseline.
          state_ = State::Ground;
          baseline_.clear();
          baseline_.add(t_ms, hip_y);
        }
        return false;
    }
    return false;
  }

  void reset() {
    state_ = State::Ground;
    baseline_.clear();
  }

  void set_params(const ExerciseParams& p) {
    params_ = p;
    baseline_.set_span(p.baseline_ms);
  }

 private:
  enum class State { Ground, Air, Stuck };
  ExerciseParams params_;
  detail::RollingWindow baseline_;
  State state_ = State::Ground;
  double since_ms_ = 0.0;
};

// Fast arm extension: reach goes from below punch_low to above punch_high
// within punch_window_ms.
class PunchDetector {
 public:
  PunchDetector() : PunchDetector(ExerciseParams{}) {}
  explicit PunchDetector(const ExerciseParams& p) : params_(p) {}

  bool step(double reach, double t_ms) {
    if (reach < params_.punch_low) {
      last_low_ms_ = t_ms;
      return false;
    }
    if (reach > params_.punch_high && last_low_ms_ && t_ms - *last_low_ms_ <= params_.punch_window_ms) {
      last_low_ms_.reset();
      if (last_fire_ms_ && t_ms - *last_fire_ms_ < params_.refractory_ms) return false;
      last_fire_ms_ = t_ms;
      return true;
    }
    return false;
  }

  void reset() { last_low_ms_.reset(); }
  void set_params(const ExerciseParams& p) { params_ = p; }

 private:
  ExerciseParams params_;
  std::optional<double> last_low_ms_;
  std::optional<double> last_fire_ms_;
};

// One ankle raised above its rolling standing baseline by kick_rise torso
// lengths.
class KickDetector {
 public:
  KickDetector() : KickDetector(ExerciseParams{}) {}
  explicit KickDetector(const ExerciseParams& p) : params_(p), baseline_(p.baseline_ms) {}

  bool step(double ankle_height, double t_ms) {
    baseline_.prune(t_ms);
    const auto base = baseline_.median();
    if (!base || baseline_.size() < 3) {
      baseline_.add(t_ms, ankle_height);
      return false;
    }
    const double rise = ankle_height - *base;
    if (raised_) {
      if (rise < params_.kick_rise / 2.0) {
        raised_ = false;
        baseline_.add(t_ms, ankle_height);
      }
      return false;
    }
    if (rise > params_.kick_rise) {
      raised_ = true;
      if (last_fire_ms_ && t_ms - *last_fire_ms_ < params_.refractory_ms) return false;
      last_fire_ms_ = t_ms;
      return true;
    }
    baseline_.add(t_ms, ankle_height);
    return false;
  }

  void reset() {
    raised_ = false;
    baseline_.clear();
  }

  void set_params(const ExerciseParams& p) {
    params_ = p;
    baseline_.set_span(p.baseline_ms);
  }

 private:
  ExerciseParams params_;
  detail::RollingWindow baseline_;
  bool raised_ = false;
  std::optional<double> last_fire_ms_;
};

// Anti-phase knee oscillation. The sign of (knee_l - knee_r), outside a dead
// band, marks which leg is in its stroke. Consecutive strokes must alternate
// sides within [min_half, max_half] ms; every second valid stroke completes a
// rep. Active from the first stroke until no stroke starts for timeout_ms.
class CycleDetector {
 public:
  struct Output {
    bool activated = false;
    bool deactivated = false;
    bool rep = false;
  };

  CycleDetector() : CycleDetector(ExerciseParams{}) {}
  explicit CycleDetector(const ExerciseParams& p)
      : params_(p), band_(p.standing ? p.cycle_band_deg : p.cycle_band_deg_sitting) {}

  Output step(double knee_l, double knee_r, double t_ms) {
    Output out;
    const double d = knee_l - knee_r;
    const Side side = d > band_ ? Side::Left : (d < -band_ ? Side::Right : Side::None);

    if (side != Side::None && side != current_) {
      // Re-entering the same side, or flipping back faster than min_half,
      // is band chatter rather than a new stroke.
      bool stroke = true;
      if (last_stroke_) {
        const double interval = t_ms - last_stroke_->t_ms;
        if (last_stroke_->side == side || interval < params_.cycle_min_half_ms) {
          stroke = false;
        } else if (interval <= params_.cycle_max_half_ms) {
          ++strokes_;
          if (strokes_ % 2 == 0) out.rep = true;
        } else {
          strokes_ = 1;
        }
      } else {
        strokes_ = 1;
      }
      if (stroke) {
        last_stroke_ = Stroke{side, t_ms};
        if (!active_) {
          active_ = true;
          out.activated = true;
        }
      }
    }
    if (side != Side::None) current_ = side;
    else current_ = Side::None;

    if (active_ && last_stroke_ && t_ms - last_stroke_->t_ms > params_.cycle_timeout_ms) {
      active_ = false;
      out.deactivated = true;
      strokes_ = 0;
      last_stroke_.reset();
    }
    return out;
  }

  // Ends an active period (pose lost or session over).
  bool stop() {
    const bool was = active_;
    active_ = false;
    strokes_ = 0;
    last_stroke_.reset();
    current_ = Side::None;
    return was;
  }

  [[nodiscard]] bool active() const noexcept { return active_; }

  void set_params(const ExerciseParams& p) {
    params_ = p;
    band_ = p.standing ? p.cycle_band_deg : p.cycle_band_deg_sitting;
  }

 private:
  enum class Side { None, Left, Right };
  struct Stroke {
    Side side;
    double t_ms;
  };
  ExerciseParams params_;
  double band_;
  Side current_ = Side::None;
  std::optional<Stroke> last_stroke_;
  int strokes_ = 0;
  bool active_ = false;
};

enum class TemplateMode { WhileActive, PerRep };

struct GestureTemplate {
  std::string name;
  std::map<Feature, double> means;
  std::map<Feature, double> tolerances;
  TemplateMode mode = TemplateMode::WhileActive;

  friend bool operator==(const GestureTemplate&, const GestureTemplate&) = default;
};

inline void validate_template(const GestureTemplate& t) {
  if (t.name.empty()) throw Error(ErrorKind::SchemaViolation, "template name is empty", "name");
  if (t.means.empty()) throw Error(ErrorKind::EmptyTemplate, "template '" + t.name + "' has no features", "features");
  for (const auto& [f, mean] : t.means) {
    const auto tol = t.tolerances.find(f);
    const std::string fname{kFeatureNames[static_cast<std::size_t>(f)]};
    if (tol == t.tolerances.end() || !(tol->second > 0.0))
      throw Error(ErrorKind::SchemaViolation, "tolerance for '" + fname + "' must be > 0", "tol." + fname);
    if (!std::isfinite(mean)) throw Error(ErrorKind::SchemaViolation, "non-finite mean", "features." + fname);
  }
}

// Mean normalized deviation from the template, mapped to [0, 1]:
//   confidence = max(0, 1 - mean_i |f_i - mu_i| / tol_i)
// over the template features that this frame has.
inline double match_template(const PoseFeatures& features, const GestureTemplate& tmpl) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [f, mean] : tmpl.means) {
    const auto& value = features[f];
    if (!value) continue;
    sum += std::abs(*value - mean) / tmpl.tolerances.at(f);
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::EmptyTemplate, "no template feature available in this frame");
  return std::max(0.0, 1.0 - sum / n);
}

inline nlohmann::ordered_json template_to_json(const GestureTemplate& t) {
  nlohmann::ordered_json features = nlohmann::ordered_json::object();
  nlohmann::ordered_json tol = nlohmann::ordered_json::object();
  for (const auto& [f, v] : t.means) features[std::string(kFeatureNames[static_cast<std::size_t>(f)])] = v;
  for (const auto& [f, v] : t.tolerances) tol[std::string(kFeatureNames[static_cast<std::size_t>(f)])] = v;
  nlohmann::ordered_json j;
  j["name"] = t.name;
  j["features"] = std::move(features);
  j["tol"] = std::move(tol);
  j["mode"] = t.mode == TemplateMode::PerRep ? "rep" : "hold";
  return j;
}

inline std::string serialize_template(const GestureTemplate& t) { return template_to_json(t).dump(); }

inline GestureTemplate template_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaViolation, "template record must be an object");
  GestureTemplate t;
  const auto name = j.find("name");
  if (name == j.end() || !name->is_string()) throw Error(ErrorKind::SchemaViolation, "missing name", "name");
  t.name = name->get<std::string>();
  const auto read_map = [&](const char* key, std::map<Feature, double>& out) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_object())
      throw Error(ErrorKind::SchemaViolation, std::string(key) + " must be an object", key);
    for (const auto& [k, v] : it->items()) {
      const auto f = feature_from_string(k);
      if (!f) throw Error(ErrorKind::SchemaViolation, "unknown feature '" + k + "'", std::string(key) + "." + k);
      if (!v.is_number()) throw Error(ErrorKind::SchemaViolation, "expected number", std::string(key) + "." + k);
      out[*f] = v.get<double>();
    }
  };
  read_map("features", t.means);
  read_map("tol", t.tolerances);
  const auto mode = j.find("mode");
  if (mode != j.end()) {
    if (*mode == "rep") t.mode = TemplateMode::PerRep;
    else if (*mode == "hold") t.mode = TemplateMode::WhileActive;
    else throw Error(ErrorKind::SchemaViolation, "mode must be \"hold\" or \"rep\"", "mode");
  }
  validate_template(t);
  return t;
}

inline GestureTemplate parse_template(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, e.what());
  }
  return template_from_json(j);
}

inline std::vector<GestureTemplate> load_templates(std::istream& in) {
  std::vector<GestureTemplate> out;
  std::set<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto t = parse_template(line);
    if (!names.insert(t.name).second)
      throw Error(ErrorKind::SchemaViolation, "duplicate template name '" + t.name + "'", "name");
    out.push_back(std::move(t));
  }
  return out;
}

// Per-feature mean over the recorded frames; tolerance is three standard
// deviations, floored (15 degrees for angles, 0.15 for ratios) so a very
// still recording does not give a needle-thin template.
inline GestureTemplate record_template(const std::vector<PoseFeatures>& frames, std::string name,
                                       TemplateMode mode = TemplateMode::WhileActive) {
  GestureTemplate t;
  t.name = std::move(name);
  t.mode = mode;
  for (std::size_t i = 0; i < kTemplateFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    double sum = 0.0;
    double sq = 0.0;
    int n = 0;
    for (const auto& fr : frames) {
      if (const auto& v = fr[f]) {
        sum += *v;
        sq += *v * *v;
        ++n;
      }
    }
    if (n == 0) continue;
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    const double floor = is_angle_feature(f) ? 15.0 : 0.15;
    t.means[f] = mean;
    t.tolerances[f] = std::max(3.0 * std::sqrt(var), floor);
  }
  if (t.means.empty()) throw Error(ErrorKind::EmptyTemplate, "no visible features in the recorded segment");
  return t;
}

struct ClassStats {
  double active_ms = 0.0;
  int reps = 0;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

// Time and repetitions per exercise label over one session.
class SessionStats {
 public:
  void activate(const std::string& label, double t_ms) {
    stats_[label];
    active_since_.emplace(label, t_ms);
  }
  void deactivate(const std::string& label, double t_ms) {
    const auto it = active_since_.find(label);
    if (it == active_since_.end()) return;
    stats_[label].active_ms += t_ms - it->second;
    active_since_.erase(it);
  }
  void rep(const std::string& label) { ++stats_[label].reps; }

  [[nodiscard]] const std::map<std::string, ClassStats>& totals() const noexcept { return stats_; }
  [[nodiscard]] std::vector<std::string> active_labels() const {
    std::vector<std::string> out;
    for (const auto& [label, since] : active_since_) out.push_back(label);
    return out;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [label, s] : stats_) j[label] = {{"active_ms", s.active_ms}, {"reps", s.reps}};
    return j;
  }

 private:
  std::map<std::string, ClassStats> stats_;
  std::map<std::string, double> active_since_;
};

inline constexpr std::string_view kCyclingLabel = "cycling";

// Runs every enabled detector in a fixed order (squat, jump, punch, kick,
// cycling, templates in file order) and keeps the session statistics.
class ExerciseModule {
 public:
  ExerciseModule() : ExerciseModule(ExerciseParams{}, {}) {}
  ExerciseModule(const ExerciseParams& params, std::vector<GestureTemplate> templates)
      : params_(params),
        squat_(params.squat_down_deg, params.squat_up_deg),
        jump_(params),
        punch_{PunchDetector(params), PunchDetector(params)},
        kick_{KickDetector(params), KickDetector(params)},
        cycle_(params) {
    for (auto& t : templates) {
      validate_template(t);
      matchers_.push_back({std::move(t), Hysteresis(Polarity::ActivateAbove, params.template_on, params.template_off)});
    }
  }

  std::vector<GestureEvent> step(const PoseFrame* pose, ImageSize image, double t_ms) {
    if (last_t_ms_ && t_ms < *last_t_ms_)
      throw Error(ErrorKind::NonMonotonicTime, "pose frame at t=" + std::to_string(t_ms) + " is out of order");
    last_t_ms_ = t_ms;
    std::vector<GestureEvent> events;
    if (pose == nullptr) {
      finish(t_ms, events);
      return events;
    }
    const auto emit = [&](EventKind kind, std::string label = {}) -> GestureEvent& {
      events.push_back(GestureEvent{.t_ms = t_ms, .source = SourceModule::Exercise, .kind = kind, .label = std::move(label)});
      return events.back();
    };

    features_ = extract_features(*pose, image, params_.min_visibility);
    const PoseFeatures& f = *features_;

    if (f[Feature::KneeL] && f[Feature::KneeR]) {
      if (squat_.step(std::min(*f[Feature::KneeL], *f[Feature::KneeR]), t_ms)) {
        emit(EventKind::SquatRep, "squat");
        stats_.rep("squat");
      }
    }
    if (params_.standing && f[Feature::HipY] && f[Feature::Torso]) {
      if (jump_.step(*f[Feature::HipY], *f[Feature::Torso], t_ms)) {
        emit(EventKind::JumpRep, "jump");
        stats_.rep("jump");
      }
    }
    if (f[Feature::ReachL] && punch_[0].step(*f[Feature::ReachL], t_ms)) {
      emit(EventKind::PunchLeft, "punch");
      stats_.rep("punch");
    }
    if (f[Feature::ReachR] && punch_[1].step(*f[Feature::ReachR], t_ms)) {
      emit(EventKind::PunchRight, "punch");
      stats_.rep("punch");
    }
    if (params_.standing) {
      if (f[Feature::AnkleHeightL] && kick_[0].step(*f[Feature::AnkleHeightL], t_ms)) {
        emit(EventKind::KickLeft, "kick");
        stats_.rep("kick");
      }
      if (f[Feature::AnkleHeightR] && kick_[1].step(*f[Feature::AnkleHeightR], t_ms)) {
        emit(EventKind::KickRight, "kick");
        stats_.rep("kick");
      }
    }
    if (f[Feature::KneeL] && f[Feature::KneeR]) {
      const auto c = cycle_.step(*f[Feature::KneeL], *f[Feature::KneeR], t_ms);
      const std::string label{kCyclingLabel};
      if (c.activated) {
        emit(EventKind::Activate, label).confidence = 1.0;
        stats_.activate(label, t_ms);
      }
      if (c.rep) {
        emit(EventKind::CycleRep, label);
        stats_.rep(label);
      }
      if (c.deactivated) {
        emit(EventKind::Deactivate, label);
        stats_.deactivate(label, t_ms);
      }
    }
    for (auto& m : matchers_) {
      double confidence = 0.0;
      try {
        confidence = match_template(f, m.tmpl);
      } catch (const Error&) {
        confidence = 0.0;
      }
      m.confidence = confidence;
      const bool was = m.gate.active();
      const bool now = m.gate.step(confidence);
      if (now == was) continue;
      if (m.tmpl.mode == TemplateMode::PerRep) {
        if (now) {
          emit(EventKind::TemplateRep, m.tmpl.name).confidence = confidence;
          stats_.rep(m.tmpl.name);
        }
      } else if (now) {
        emit(EventKind::Activate, m.tmpl.name).confidence = confidence;
        stats_.activate(m.tmpl.name, t_ms);
      } else {
        emit(EventKind::Deactivate, m.tmpl.name).confidence = confidence;
        stats_.deactivate(m.tmpl.name, t_ms);
      }
    }
    return events;
  }

  // Deactivates everything that is active at t_ms (pose lost, end of run).
  void finish(double t_ms, std::vector<GestureEvent>& events) {
    const auto emit_off = [&](const std::string& label) {
      events.push_back(GestureEvent{.t_ms = t_ms, .source = SourceModule::Exercise, .kind = EventKind::Deactivate,
                                    .label = label});
      stats_.deactivate(label, t_ms);
    };
    if (cycle_.stop()) emit_off(std::string(kCyclingLabel));
    for (auto& m : matchers_) {
      if (m.gate.active() && m.tmpl.mode == TemplateMode::WhileActive) emit_off(m.tmpl.name);
      m.gate.reset();
      m.confidence = 0.0;
    }
    squat_.phase = RepPhase::Neutral;
    jump_.reset();
    for (auto& p : punch_) p.reset();
    for (auto& k : kick_) k.reset();
    features_.reset();
  }

  // Thresholds change in place; detector state is kept.
  void set_params(const ExerciseParams& p) {
    if (!(p.squat_down_deg < p.squat_up_deg))
      throw Error(ErrorKind::InvalidThresholds, "rep counter needs down < up");
    for (auto& m : matchers_) m.gate.set_thresholds(p.template_on, p.template_off);
    squat_.down = p.squat_down_deg;
    squat_.up = p.squat_up_deg;
    jump_.set_params(p);
    for (auto& d : punch_) d.set_params(p);
    for (auto& d : kick_) d.set_params(p);
    cycle_.set_params(p);
    params_ = p;
  }

  // Replaces the template set. Active hold-mode templates are deactivated
  // first.
  void set_templates(std::vector<GestureTemplate> templates, double t_ms, std::vector<GestureEvent>& events) {
    for (auto& t : templates) validate_template(t);
    for (auto& m : matchers_) {
      if (m.gate.active() && m.tmpl.mode == TemplateMode::WhileActive) {
        events.push_back(GestureEvent{.t_ms = t_ms, .source = SourceModule::Exercise, .kind = EventKind::Deactivate,
                                      .label = m.tmpl.name});
        stats_.deactivate(m.tmpl.name, t_ms);
      }
    }
    matchers_.clear();
    for (auto& t : templates)
      matchers_.push_back({std::move(t), Hysteresis(Polarity::ActivateAbove, params_.template_on, params_.template_off)});
  }

  [[nodiscard]] const ExerciseParams& params() const noexcept { return params_; }
  [[nodiscard]] std::vector<std::pair<std::string, double>> template_confidences() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& m : matchers_) out.emplace_back(m.tmpl.name, m.confidence);
    return out;
  }
  [[nodiscard]] const SessionStats& stats() const noexcept { return stats_; }
  [[nodiscard]] const std::optional<PoseFeatures>& features() const noexcept { return features_; }
  [[nodiscard]] std::vector<std::string> active_labels() const { return stats_.active_labels(); }
  [[nodiscard]] std::vector<GestureTemplate> templates() const {
    std::vector<GestureTemplate> out;
    for (const auto& m : matchers_) out.push_back(m.tmpl);
    return out;
  }

 private:
  struct Matcher {
    GestureTemplate tmpl;
    Hysteresis gate;
    double confidence = 0.0;
  };

  ExerciseParams params_;
  RepCounter squat_;
  JumpDetector jump_;
  std::array<PunchDetector, 2> punch_;
  std::array<KickDetector, 2> kick_;
  CycleDetector cycle_;
  std::vector<Matcher> matchers_;
  SessionStats stats_;
  std::optional<PoseFeatures> features_;
  std::optional<double> last_t_ms_;
};

}  // namespace touchless
