#pragma once

// Transfer cost J = (1 - F)/2 + J_alpha + J_gamma and its exact gradient with
// respect to the control values of a split-step trajectory.

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bhc/controls.hpp"
#include "bhc/fock.hpp"
#include "bhc/mps.hpp"

namespace bhc {

struct CostConfig {
  double alpha = 0.0;
  double gamma = 0.0;
  Mps initial_state;
  Mps target_state;
  TruncationCaps caps{};
  bool fidelity_enabled = true;
  double truncation_alarm = 1e-6;
  /// Forward states are stored outright while they fit; otherwise every k-th
  /// state is kept and segments are recomputed in the backward pass.
  std::size_t memory_budget_bytes = std::size_t(512) << 20;
  std::size_t checkpoint_interval = 0;  // 0 picks automatically
};

struct DenseCostConfig {
  double alpha = 0.0;
  double gamma = 0.0;
  DenseState initial_state;
  DenseState target_state;
  DriftSplit split = DriftSplit::even_odd;
  bool fidelity_enabled = true;
};

struct GradientResult {
  double total_cost = 0.0;
  double fidelity = 0.0;
  double cost_fidelity = 0.0;
  double cost_alpha = 0.0;
  double cost_gamma = 0.0;
  cplx overlap = 0.0;
  std::vector<double> gradient;
  bool truncation_alarm = false;
  double truncation = 0.0;
};

struct RegularizerResult {
  double cost_alpha = 0.0;
  double cost_gamma = 0.0;
  std::vector<double> gradient_alpha;
  std::vector<double> gradient_gamma;
};

/// J_alpha = (alpha/2) sum_n u_n^2 dt and
/// J_gamma = (gamma/2) sum_{n<n_t} (u_{n+1} - u_n)^2 / dt.
RegularizerResult regularizer_costs(const ControlGrid& controls, double alpha, double gamma);

GradientResult cost_and_gradient(const CostConfig& config, const ControlGrid& controls);
/// Forward pass only.
GradientResult evaluate_cost(const CostConfig& config, const ControlGrid& controls);

GradientResult dense_cost_and_gradient(const DenseCostConfig& config, const ControlGrid& controls);
GradientResult dense_evaluate_cost(const DenseCostConfig& config, const ControlGrid& controls);

/// Monotone ramp from u_start to u_end whose log-slope is reduced by
/// `crossing_slowdown` where it passes u_cross.
struct ReferenceRamp {
  double u_start = 1.94565;
  double u_end = 35.7497;
  double u_cross = 3.4;
  double crossing_slowdown = 0.25;

  /// Value at fractional time x in [0, 1].
  double operator()(double x) const;
};

struct SeedSpec {
  ReferenceRamp reference;
  int n_fourier = 6;
  double amplitude_scale = 0.5;            // log-amplitude of each component
  double frequency_min = 0.5;              // in cycles per duration
  double frequency_max = 4.0;
  std::uint64_t rng_seed = 0;
};

/// Reference ramp times exp(sum_k a_k sin(2 pi f_k t/T + phi_k)), clipped to
/// the bounds; endpoints clamped to the ramp ends when the grid clamps.
ControlGrid generate_seed(const SeedSpec& spec, double dt, std::size_t n_points, ControlBounds bounds = {},
                          bool clamp_endpoints = true);

enum class CrabKind { fourier, constant, smoothed_bang };

/// One basis function; its parameters occupy a contiguous slice of theta.
///   fourier:       theta_a sin(2 pi f t/T) + theta_b cos(2 pi f t/T)
///   constant:      theta * value
///   smoothed_bang: theta_h / (1 + exp(-(t - theta_s)/width))
struct CrabBasisFunction {
  CrabKind kind = CrabKind::fourier;
  double frequency = 1.0;  // cycles per duration
  double value = 1.0;
  double width = 0.1;

  int parameter_count() const { return kind == CrabKind::constant ? 1 : 2; }
};

struct CrabParametrization {
  std::function<double(double)> reference;  // u_ref(t), t in simulation units
  std::vector<CrabBasisFunction> basis;
  std::vector<double> theta;

  int parameter_count() const;
  /// u(t; theta) and du/dtheta at one time.
  double value(double t, double duration) const;
  std::vector<double> derivative(double t, double duration) const;
  ControlGrid sample(double dt, std::size_t n_points, ControlBounds bounds = {}, bool clamp_endpoints = false) const;
};

struct CrabResult {
  GradientResult control_result;
  std::vector<double> theta_gradient;
};

using GradientEvaluator = std::function<GradientResult(const ControlGrid&)>;

/// Samples u(t; theta), evaluates the control gradient and contracts it with
/// du_n/dtheta_i.
CrabResult crab_gradient(const CrabParametrization& crab, const GradientEvaluator& evaluate, double dt,
                         std::size_t n_points, ControlBounds bounds = {});

}  // namespace bhc
