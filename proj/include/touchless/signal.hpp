#pragma once

// Signal conditioning shared by the gesture modules: an adaptive low-pass
// filter for pointer jitter, dual-threshold switching, and time debouncing.

#include <cmath>
#include <numbers>
#include <string>

#include "touchless/error.hpp"

namespace touchless {

struct LowPassParams {
  double fc_min = 1.0;    // Hz
  double beta = 0.5;      // cutoff slope per unit/s of speed
  double d_cutoff = 1.0;  // Hz, derivative smoothing

  friend bool operator==(const LowPassParams&, const LowPassParams&) = default;
};

// One Euro filter. The cutoff rises with the smoothed speed of the signal:
//   fc = fc_min + beta * |dx/dt|,  alpha = 1 / (1 + tau / Te),  tau = 1 / (2 pi fc)
// so the output is heavily smoothed at rest and follows quickly in motion.
class LowPassFilter {
 public:
  LowPassFilter() = default;
  explicit LowPassFilter(LowPassParams params) : params_(params) { validate(params); }

  static void validate(const LowPassParams& p) {
    if (!(p.fc_min > 0.0) || !(p.beta >= 0.0) || !(p.d_cutoff > 0.0))
      throw Error(ErrorKind::InvalidThresholds, "low-pass requires fc_min > 0, beta >= 0, d_cutoff > 0");
  }

  // Takes effect on the next sample; the filter state is kept.
  void set_params(const LowPassParams& p) {
    validate(p);
    params_ = p;
  }

  double step(double x, double t_ms) {
    if (!initialized_) {
      initialized_ = true;
      prev_value_ = x;
      prev_derivative_ = 0.0;
      prev_t_ms_ = t_ms;
      return x;
    }
    if (!(t_ms > prev_t_ms_))
      throw Error(ErrorKind::NonMonotonicTime,
                  "low-pass sample at t=" + std::to_string(t_ms) + " not after " + std::to_string(prev_t_ms_));
    const double te = (t_ms - prev_t_ms_) / 1000.0;
    const double dx = (x - prev_value_) / te;
    const double a_d = alpha(params_.d_cutoff, te);
    const double edx = a_d * dx + (1.0 - a_d) * prev_derivative_;
    const double fc = params_.fc_min + params_.beta * std::abs(edx);
    const double a = alpha(fc, te);
    const double out = prev_value_ + a * (x - prev_value_);
    prev_value_ = out;
    prev_derivative_ = edx;
    prev_t_ms_ = t_ms;
    return out;
  }

  void reset() noexcept { initialized_ = false; }

  [[nodiscard]] bool initialized() const noexcept { return initialized_; }
  [[nodiscard]] double value() const noexcept { return prev_value_; }
  [[nodiscard]] double last_t_ms() const noexcept { return prev_t_ms_; }
  [[nodiscard]] const LowPassParams& params() const noexcept { return params_; }

  static double alpha(double cutoff_hz, double te_s) noexcept {
    const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
    return 1.0 / (1.0 + tau / te_s);
  }

 private:
  LowPassParams params_;
  bool initialized_ = false;
  double prev_value_ = 0.0;
  double prev_derivative_ = 0.0;
  double prev_t_ms_ = 0.0;
};

enum class Polarity { ActivateBelow, ActivateAbove };

class Hysteresis {
 public:
  Hysteresis() = default;
  Hysteresis(Polarity polarity, double on_threshold, double off_threshold) : polarity_(polarity) {
    set_thresholds(on_threshold, off_threshold);
  }

  // Keeps the current state.
  void set_thresholds(double on_threshold, double off_threshold) {
    const bool ok = polarity_ == Polarity::ActivateBelow ? on_threshold < off_threshold : on_threshold > off_threshold;
    if (!ok || !std::isfinite(on_threshold) || !std::isfinite(off_threshold))
      throw Error(ErrorKind::InvalidThresholds,
                  polarity_ == Polarity::ActivateBelow ? "ActivateBelow requires on < off"
                                                       : "ActivateAbove requires on > off");
    on_ = on_threshold;
    off_ = off_threshold;
  }

  // Values inside the dead band leave the state unchanged.
  bool step(double v) noexcept {
    if (polarity_ == Polarity::ActivateBelow) {
      if (v < on_) active_ = true;
      else if (v > off_) active_ = false;
    } else {
      if (v > on_) active_ = true;
      else if (v < off_) active_ = false;
    }
    return active_;
  }

  void reset() noexcept { active_ = false; }
  [[nodiscard]] bool active() const noexcept { return active_; }
  [[nodiscard]] double on_threshold() const noexcept { return on_; }
  [[nodiscard]] double off_threshold() const noexcept { return off_; }

 private:
  Polarity polarity_ = Polarity::ActivateBelow;
  double on_ = 0.0;
  double off_ = 1.0;
  bool active_ = false;
};

// Accepts a new value only after it has been observed continuously for at
// least hold_ms. Works for any equality-comparable state type.
template <typename T>
class Debouncer {
 public:
  Debouncer() = default;
  Debouncer(double hold_ms, T initial) : hold_ms_(hold_ms), stable_(initial), candidate_(initial) {
    if (!(hold_ms >= 0.0)) throw Error(ErrorKind::InvalidThresholds, "debounce hold_ms must be >= 0");
  }

  const T& step(const T& value, double t_ms) {
    if (started_ && t_ms < last_t_ms_)
      throw Error(ErrorKind::NonMonotonicTime,
                  "debounce sample at t=" + std::to_string(t_ms) + " before " + std::to_string(last_t_ms_));
    if (!started_ || !(value == candidate_)) {
      candidate_ = value;
      candidate_since_ms_ = t_ms;
    }
    started_ = true;
    last_t_ms_ = t_ms;
    if (!(candidate_ == stable_) && t_ms - candidate_since_ms_ >= hold_ms_) stable_ = candidate_;
    return stable_;
  }

  void set_hold(double hold_ms) {
    if (!(hold_ms >= 0.0)) throw Error(ErrorKind::InvalidThresholds, "debounce hold_ms must be >= 0");
    hold_ms_ = hold_ms;
  }

  void reset(T value) noexcept {
    stable_ = value;
    candidate_ = value;
    started_ = false;
  }

  [[nodiscard]] const T& stable() const noexcept { return stable_; }
  [[nodiscard]] const T& candidate() const noexcept { return candidate_; }
  [[nodiscard]] double hold_ms() const noexcept { return hold_ms_; }

 private:
  double hold_ms_ = 0.0;
  T stable_{};
  T candidate_{};
  double candidate_since_ms_ = 0.0;
  double last_t_ms_ = 0.0;
  bool started_ = false;
};

}  // namespace touchless
