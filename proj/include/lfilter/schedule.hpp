#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lfilter {

/// Inverse filter width along the adiabatic path, delta_inv(s) for s in [0,1].
/// The default shape sin(pi/2 sin(s pi/2)^2)^2 flattens at both endpoints.
inline double schedule_value(std::string_view shape, double s, double delta_inv_max) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::out_of_range("schedule_value: s outside [0, 1]");
  if (shape == "sin-sin-squared") {
    const double inner = std::sin(0.5 * M_PI * s);
    const double outer = std::sin(0.5 * M_PI * inner * inner);
    return outer * outer * delta_inv_max;
  }
  if (shape == "linear") return s * delta_inv_max;
  throw std::invalid_argument("schedule_value: unknown shape '" + std::string(shape) + "'");
}

/// Adiabatic trajectory description: final inverse width, total time T and
/// discrete step tau with T/tau an integer.
struct ScheduleSpec {
  double delta_inv_max = 0.0;
  double total_time = 0.0;
  double tau = 0.0;
  std::string shape = "sin-sin-squared";

  int steps() const {
    if (!(tau > 0.0) || !(total_time > 0.0))
      throw std::invalid_argument("ScheduleSpec: need positive T and tau");
    const double ratio = total_time / tau;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument("ScheduleSpec: T/tau must be a positive integer");
    return static_cast<int>(rounded);
  }

  double value_at(double s) const { return schedule_value(shape, s, delta_inv_max); }
};

}  // namespace lfilter
