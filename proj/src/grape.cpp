#include "bhc/grape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "bhc/kernels.hpp"
#include "bhc/tebd.hpp"

namespace bhc {

RegularizerResult regularizer_costs(const ControlGrid& controls, double alpha, double gamma) {
  if (alpha < 0.0 || gamma < 0.0) throw std::invalid_argument("regularizer weights must be non-negative");
  const std::size_t n = controls.size();
  const double dt = controls.dt;
  RegularizerResult r;
  r.gradient_alpha.assign(n, 0.0);
  r.gradient_gamma.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = controls.values[j];
    r.cost_alpha += 0.5 * alpha * u * u * dt;
    r.gradient_alpha[j] = alpha * u * dt;
  }
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double du = controls.values[j + 1] - controls.values[j];
    r.cost_gamma += 0.5 * gamma * du * du / dt;
    r.gradient_gamma[j] -= gamma * du / dt;
    r.gradient_gamma[j + 1] += gamma * du / dt;
  }
  return r;
}

namespace {

struct MpsBackend {
  using State = Mps;
  GateSet gates;
  std::vector<double> weights;

  void forward(State& s, double u0, double u1) const { step(s, u0, u1, gates); }
  void backward(State& s, double u0, double u1) const { step_adjoint(s, u0, u1, gates); }
  cplx overlap_with(const State& bra, const State& ket) const { return overlap(bra, ket); }
  cplx interaction_element(const State& bra, const State& ket) const { return cross_diagonal_sum(bra, ket, weights); }
  static double truncation(const State& s) { return s.log_truncation(); }
  static std::size_t bytes(const State& s) {
    std::size_t total = 0;
    for (int i = 0; i < s.length(); ++i)
      total += sizeof(cplx) * s.site(i).size() * static_cast<std::size_t>(s.left_bond(i) * s.right_bond(i));
    return total;
  }
};

struct DenseBackend {
  using State = Eigen::VectorXcd;
  const DenseStPropagator* prop;

  void forward(State& s, double u0, double u1) const { prop->step(s, u0, u1); }
  void backward(State& s, double u0, double u1) const { prop->step_adjoint(s, u0, u1); }
  cplx overlap_with(const State& bra, const State& ket) const { return bra.dot(ket); }
  cplx interaction_element(const State& bra, const State& ket) const {
    const auto& w = prop->operators().interaction;
    return kernels::weighted_dot({bra.data(), static_cast<std::size_t>(bra.size())},
                                 {w.data(), static_cast<std::size_t>(w.size())},
                                 {ket.data(), static_cast<std::size_t>(ket.size())});
  }
  static double truncation(const State&) { return 0.0; }
  static std::size_t bytes(const State& s) { return sizeof(cplx) * static_cast<std::size_t>(s.size()); }
};

struct CoreOptions {
  bool with_gradient = true;
  bool fidelity_enabled = true;
  double alpha = 0.0, gamma = 0.0;
  double truncation_alarm = 1e-6;
  std::size_t memory_budget = std::size_t(512) << 20;
  std::size_t checkpoint_interval = 0;
};

template <class Backend>
GradientResult gradient_core(const Backend& backend, const typename Backend::State& initial,
                             const typename Backend::State& target, const ControlGrid& controls,
                             const CoreOptions& opt) {
  using State = typename Backend::State;
  controls.validate();
  const std::size_t nt = controls.size();
  const auto& u = controls.values;
  const double dt = controls.dt;
  GradientResult res;
  res.gradient.assign(nt, 0.0);

  if (opt.fidelity_enabled) {
    std::size_t interval = opt.checkpoint_interval;
    if (interval == 0) {
      const std::size_t per_state = std::max<std::size_t>(1, Backend::bytes(initial));
      interval = per_state * nt <= opt.memory_budget || !opt.with_gradient
                     ? 1
                     : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(nt))));
    }
    // checkpoints[c] holds psi at grid index c * interval.
    std::vector<State> checkpoints;
    State psi = initial;
    if (opt.with_gradient) checkpoints.push_back(psi);
    for (std::size_t j = 0; j + 1 < nt; ++j) {
      backend.forward(psi, u[j], u[j + 1]);
      if (opt.with_gradient && (j + 1) % interval == 0) checkpoints.push_back(psi);
    }
    res.truncation = Backend::truncation(psi);
    res.overlap = backend.overlap_with(target, psi);
    const double f = std::norm(res.overlap);
    if (!std::isfinite(f)) throw std::runtime_error("non-finite fidelity in the forward pass");
    res.fidelity = std::clamp(f, 0.0, 1.0);
    res.cost_fidelity = 0.5 * (1.0 - f);

    if (opt.with_gradient) {
      const cplx pc = std::conj(res.overlap);
      State chi = target;
      std::vector<State> segment;
      std::size_t segment_start = nt;  // grid index of segment[0]
      auto psi_at = [&](std::size_t n) -> const State& {
        if (interval == 1) return checkpoints[n];
        const std::size_t c = n / interval;
        if (segment_start != c * interval) {
          segment.clear();
          segment.push_back(checkpoints[c]);
          for (std::size_t j = c * interval; j < std::min(nt - 1, c * interval + interval - 1); ++j) {
            State next = segment.back();
            backend.forward(next, u[j], u[j + 1]);
            segment.push_back(std::move(next));
          }
          segment_start = c * interval;
        }
        return segment[n - segment_start];
      };
      for (std::size_t k = nt; k-- > 0;) {
        if (k + 1 < nt) backend.backward(chi, u[k], u[k + 1]);
        const cplx element = backend.interaction_element(chi, psi_at(k));
        double g = (cplx(0.0, 1.0) * pc * element).real() * dt;
        if (k == 0 || k + 1 == nt) g *= 0.5;
        res.gradient[k] = g;
      }
      res.truncation += Backend::truncation(chi);
    }
  }
  res.truncation_alarm = res.truncation > opt.truncation_alarm;

  if (opt.alpha > 0.0 || opt.gamma > 0.0) {
    const RegularizerResult reg = regularizer_costs(controls, opt.alpha, opt.gamma);
    res.cost_alpha = reg.cost_alpha;
    res.cost_gamma = reg.cost_gamma;
    for (std::size_t j = 0; j < nt; ++j) res.gradient[j] += reg.gradient_alpha[j] + reg.gradient_gamma[j];
  }
  res.total_cost = res.cost_fidelity + res.cost_alpha + res.cost_gamma;
  if (!std::isfinite(res.total_cost)) throw std::runtime_error("non-finite cost");
  if (controls.clamp_endpoints) {
    res.gradient.front() = 0.0;
    res.gradient.back() = 0.0;
  }
  if (!opt.with_gradient) res.gradient.clear();
  return res;
}

GradientResult mps_core(const CostConfig& config, const ControlGrid& controls, bool with_gradient) {
  if (config.initial_state.length() != config.target_state.length() ||
      config.initial_state.local_dim() != config.target_state.local_dim())
    throw std::invalid_argument("initial and target states have different shapes");
  const int d = config.initial_state.local_dim();
  MpsBackend backend{GateSet::real_time(controls.dt, d), interaction_diagonal(d)};
  Mps initial = config.initial_state;
  initial.set_caps(config.caps);
  initial.reset_truncation();
  initial.move_center(0);
  Mps target = config.target_state;
  target.set_caps(config.caps);
  target.reset_truncation();
  target.move_center(0);
  CoreOptions opt;
  opt.with_gradient = with_gradient;
  opt.fidelity_enabled = config.fidelity_enabled;
  opt.alpha = config.alpha;
  opt.gamma = config.gamma;
  opt.truncation_alarm = config.truncation_alarm;
  opt.memory_budget = config.memory_budget_bytes;
  opt.checkpoint_interval = config.checkpoint_interval;
  return gradient_core(backend, initial, target, controls, opt);
}

GradientResult dense_core(const DenseCostConfig& config, const ControlGrid& controls, bool with_gradient) {
  if (config.initial_state.amplitudes.size() != config.target_state.amplitudes.size())
    throw std::invalid_argument("initial and target states have different dimensions");
  const DenseStPropagator prop(config.initial_state.basis, controls.dt, config.split);
  DenseBackend backend{&prop};
  CoreOptions opt;
  opt.with_gradient = with_gradient;
  opt.fidelity_enabled = config.fidelity_enabled;
  opt.alpha = config.alpha;
  opt.gamma = config.gamma;
  return gradient_core(backend, config.initial_state.amplitudes, config.target_state.amplitudes, controls, opt);
}

}  // namespace

GradientResult cost_and_gradient(const CostConfig& config, const ControlGrid& controls) {
  return mps_core(config, controls, true);
}

GradientResult evaluate_cost(const CostConfig& config, const ControlGrid& controls) {
  return mps_core(config, controls, false);
}

GradientResult dense_cost_and_gradient(const DenseCostConfig& config, const ControlGrid& controls) {
  return dense_core(config, controls, true);
}

GradientResult dense_evaluate_cost(const DenseCostConfig& config, const ControlGrid& controls) {
  return dense_core(config, controls, false);
}

double ReferenceRamp::operator()(double x) const {
  if (!(u_start > 0.0 && u_end > 0.0 && u_cross > 0.0))
    throw std::invalid_argument("reference ramp values must be positive");
  const double la = std::log(u_start), lb = std::log(u_end);
  x = std::clamp(x, 0.0, 1.0);
  const bool crosses = (u_cross - u_start) * (u_end - u_cross) > 0.0;
  if (!crosses || crossing_slowdown >= 1.0 || la == lb) return std::exp(la + (lb - la) * x);
  // log u = lc + b (x - xc) + a (x - xc)^3 through both endpoints, slope b at
  // the crossing point xc.
  const double lc = std::log(u_cross);
  const double b = crossing_slowdown * (lb - la);
  auto coefficient = [&](double xc) { return (lb - lc - b * (1.0 - xc)) / std::pow(1.0 - xc, 3); };
  auto mismatch = [&](double xc) { return lc - b * xc - coefficient(xc) * xc * xc * xc - la; };
  double lo = 1e-9, hi = 1.0 - 1e-9;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((mismatch(lo) > 0.0) == (mismatch(mid) > 0.0))
      lo = mid;
    else
      hi = mid;
  }
  const double xc = 0.5 * (lo + hi);
  const double a = coefficient(xc);
  const double s = x - xc;
  return std::exp(lc + b * s + a * s * s * s);
}

ControlGrid generate_seed(const SeedSpec& spec, double dt, std::size_t n_points, ControlBounds bounds,
                          bool clamp_endpoints) {
  if (n_points < 2) throw std::invalid_argument("seed grid needs at least two points");
  if (spec.n_fourier < 0 || spec.amplitude_scale < 0.0 || spec.frequency_min > spec.frequency_max)
    throw std::invalid_argument("invalid seed specification");
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Component {
    double amplitude, frequency, phase;
  };
  std::vector<Component> comps;
  for (int k = 0; k < spec.n_fourier; ++k) {
    Component c;
    c.amplitude = spec.amplitude_scale * (2.0 * unit(rng) - 1.0);
    c.frequency = spec.frequency_min + (spec.frequency_max - spec.frequency_min) * unit(rng);
    c.phase = 2.0 * std::numbers::pi * unit(rng);
    comps.push_back(c);
  }
  ControlGrid g;
  g.dt = dt;
  g.bounds = bounds;
  g.clamp_endpoints = clamp_endpoints;
  g.values.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n_points - 1);
    double perturbation = 0.0;
    for (const auto& c : comps) perturbation += c.amplitude * std::sin(2.0 * std::numbers::pi * c.frequency * x + c.phase);
    const double u = spec.reference(x) * std::exp(perturbation);
    g.values[j] = std::clamp(u, bounds.lower, bounds.upper);
  }
  if (clamp_endpoints) {
    g.values.front() = std::clamp(spec.reference(0.0), bounds.lower, bounds.upper);
    g.values.back() = std::clamp(spec.reference(1.0), bounds.lower, bounds.upper);
  }
  return g;
}

int CrabParametrization::parameter_count() const {
  int m = 0;
  for (const auto& f : basis) m += f.parameter_count();
  return m;
}

double CrabParametrization::value(double t, double duration) const {
  if (static_cast<int>(theta.size()) != parameter_count())
    throw std::invalid_argument("theta length differs from the basis parameter count");
  double u = reference ? reference(t) : 0.0;
  std::size_t p = 0;
  for (const auto& f : basis) {
    switch (f.kind) {
      case CrabKind::fourier: {
        const double w = 2.0 * std::numbers::pi * f.frequency / duration;
        u += theta[p] * std::sin(w * t) + theta[p + 1] * std::cos(w * t);
        break;
      }
      case CrabKind::constant:
        u += theta[p] * f.value;
        break;
      case CrabKind::smoothed_bang:
        u += theta[p] / (1.0 + std::exp(-(t - theta[p + 1]) / f.width));
        break;
    }
    p += f.parameter_count();
  }
  return u;
}

std::vector<double> CrabParametrization::derivative(double t, double duration) const {
  if (static_cast<int>(theta.size()) != parameter_count())
    throw std::invalid_argument("theta length differs from the basis parameter count");
  std::vector<double> d(theta.size(), 0.0);
  std::size_t p = 0;
  for (const auto& f : basis) {
    switch (f.kind) {
      case CrabKind::fourier: {
        const double w = 2.0 * std::numbers::pi * f.frequency / duration;
        d[p] = std::sin(w * t);
        d[p + 1] = std::cos(w * t);
        break;
      }
      case CrabKind::constant:
        d[p] = f.value;
        break;
      case CrabKind::smoothed_bang: {
        const double s = 1.0 / (1.0 + std::exp(-(t - theta[p + 1]) / f.width));
        d[p] = s;
        d[p + 1] = -theta[p] * s * (1.0 - s) / f.width;
        break;
      }
    }
    p += f.parameter_count();
  }
  return d;
}

ControlGrid CrabParametrization::sample(double dt, std::size_t n_points, ControlBounds bounds,
                                        bool clamp_endpoints) const {
  ControlGrid g;
  g.dt = dt;
  g.bounds = bounds;
  g.clamp_endpoints = clamp_endpoints;
  const double duration = dt * static_cast<double>(n_points - 1);
  g.values.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) g.values[j] = value(g.time(j), duration);
  return g;
}

CrabResult crab_gradient(const CrabParametrization& crab, const GradientEvaluator& evaluate, double dt,
                         std::size_t n_points, ControlBounds bounds) {
  const ControlGrid grid = crab.sample(dt, n_points, bounds, false);
  CrabResult out;
  out.control_result = evaluate(grid);
  out.theta_gradient.assign(crab.theta.size(), 0.0);
  const double duration = grid.duration();
  for (std::size_t j = 0; j < n_points; ++j) {
    const auto du = crab.derivative(grid.time(j), duration);
    for (std::size_t i = 0; i < du.size(); ++i) out.theta_gradient[i] += out.control_result.gradient[j] * du[i];
  }
  return out;
}

}  // namespace bhc
