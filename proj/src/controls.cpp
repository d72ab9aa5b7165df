#include "bhc/controls.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bhc {

bool ControlGrid::within_bounds(double tol) const {
  for (double u : values)
    if (!(u >= bounds.lower - tol && u <= bounds.upper + tol)) return false;
  return true;
}

void ControlGrid::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("control grid time step must be positive");
  if (values.size() < 2) throw std::invalid_argument("control grid needs at least two points");
  if (!(bounds.lower <= bounds.upper)) throw std::invalid_argument("control bounds inverted");
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double u = values[j];
    if (!std::isfinite(u) || u < bounds.lower - 1e-12 || u > bounds.upper + 1e-12) {
      throw std::invalid_argument("control value u[" + std::to_string(j) + "] = " +
                                  std::to_string(u) + " outside bounds [" +
                                  std::to_string(bounds.lower) + ", " +
                                  std::to_string(bounds.upper) + "]");
    }
  }
}

ControlGrid ControlGrid::constant(double value, double dt, std::size_t n_points, ControlBounds bounds) {
  ControlGrid g;
  g.dt = dt;
  g.values.assign(n_points, value);
  g.bounds = bounds;
  return g;
}

ControlGrid ControlGrid::linear(double first, double last, double dt, std::size_t n_points,
                                ControlBounds bounds) {
  ControlGrid g;
  g.dt = dt;
  g.bounds = bounds;
  g.values.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    const double s = n_points > 1 ? static_cast<double>(j) / static_cast<double>(n_points - 1) : 0.0;
    g.values[j] = first + (last - first) * s;
  }
  return g;
}

ControlGrid refine_control(const ControlGrid& controls) {
  if (controls.size() < 2) throw std::invalid_argument("refinement needs at least two points");
  ControlGrid out = controls;
  out.dt = controls.dt / 2.0;
  out.values.clear();
  out.values.reserve(2 * controls.size() - 1);
  for (std::size_t j = 0; j + 1 < controls.size(); ++j) {
    out.values.push_back(controls.values[j]);
    out.values.push_back(controls.values[j]);
  }
  out.values.push_back(controls.values.back());
  return out;
}

std::size_t grid_points(double duration, double dt) {
  if (!(dt > 0.0) || !(duration > 0.0)) throw std::invalid_argument("duration and dt must be positive");
  const double steps = duration / dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
    throw std::invalid_argument("duration " + std::to_string(duration) +
                                " is not a multiple of dt " + std::to_string(dt));
  return static_cast<std::size_t>(rounded) + 1;
}

}  // namespace bhc
