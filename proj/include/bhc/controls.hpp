#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bhc {

/// Box bounds on u = U/J_x. Defaults are the ratios at v_x = 2 and 13.5 E_R.
struct ControlBounds {
  double lower = 1.32;
  double upper = 40.18;
};

/// Piecewise control on the regular grid t_j = j * dt, j = 0..n_t-1.
struct ControlGrid {
  double dt = 0.1;
  std::vector<double> values;
  ControlBounds bounds;
  bool clamp_endpoints = true;

  std::size_t size() const { return values.size(); }
  double duration() const { return values.empty() ? 0.0 : dt * static_cast<double>(values.size() - 1); }
  double time(std::size_t j) const { return dt * static_cast<double>(j); }

  bool within_bounds(double tol = 0.0) const;
  /// Throws std::invalid_argument on dt <= 0, fewer than two points, or a
  /// value outside the bounds.
  void validate() const;

  static ControlGrid constant(double value, double dt, std::size_t n_points, ControlBounds bounds = {});
  static ControlGrid linear(double first, double last, double dt, std::size_t n_points,
                            ControlBounds bounds = {});
};

/// Halves dt. The point inserted between old points j and j+1 repeats u_j.
ControlGrid refine_control(const ControlGrid& controls);

/// Number of grid points for a duration at a given step; throws unless the
/// duration is an integer multiple of dt (to 1e-9 relative).
std::size_t grid_points(double duration, double dt);

}  // namespace bhc
