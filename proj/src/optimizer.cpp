#include "bhc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace bhc {

void validate_schedule(const ControlGrid& controls, const std::vector<HomotopyStage>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("homotopy schedule is empty");
  double previous = controls.dt;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const double dt = schedule[k].dt;
    if (!(dt > 0.0)) throw std::invalid_argument("stage " + std::to_string(k) + " has a non-positive dt");
    if (schedule[k].max_iterations < 0) throw std::invalid_argument("negative iteration limit");
    const double ratio = previous / dt;
    const double power = std::round(std::log2(ratio));
    if (!(ratio >= 1.0 - 1e-12) || std::abs(ratio - std::exp2(power)) > 1e-9 * ratio ||
        (k == 0 && std::abs(ratio - 1.0) > 1e-9))
      throw std::invalid_argument("stage " + std::to_string(k) + " dt " + std::to_string(dt) +
                                  (k == 0 ? " differs from the grid dt " : " is not a power-of-two refinement of ") +
                                  std::to_string(previous));
    previous = dt;
  }
}

namespace {

struct Point {
  std::vector<double> x;
  GradientResult r;
};

class StageRunner {
 public:
  StageRunner(const GradientEvaluator& eval, const ControlGrid& grid, const OptimizerSettings& s)
      : eval_(eval), grid_(grid), settings_(s) {
    const std::size_t n = grid.size();
    fixed_.assign(n, false);
    if (grid.clamp_endpoints) fixed_.front() = fixed_.back() = true;
  }

  GradientResult evaluate(const std::vector<double>& x) {
    ControlGrid g = grid_;
    g.values = x;
    ++evaluations_;
    GradientResult r = eval_(g);
    if (r.gradient.size() != x.size()) throw std::runtime_error("evaluator returned a gradient of the wrong length");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (fixed_[i]) r.gradient[i] = 0.0;
    return r;
  }

  std::vector<double> project(std::vector<double> x) const {
    for (double& v : x) v = std::clamp(v, grid_.bounds.lower, grid_.bounds.upper);
    return x;
  }

  bool at_lower(double v) const { return v <= grid_.bounds.lower + 1e-12 * std::max(1.0, std::abs(grid_.bounds.lower)); }
  bool at_upper(double v) const { return v >= grid_.bounds.upper - 1e-12 * std::max(1.0, std::abs(grid_.bounds.upper)); }

  // Free variables: not fixed and not held by an active bound.
  std::vector<bool> free_set(const std::vector<double>& x, const std::vector<double>& g) const {
    std::vector<bool> f(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      f[i] = !fixed_[i] && !(at_lower(x[i]) && g[i] > 0.0) && !(at_upper(x[i]) && g[i] < 0.0);
    return f;
  }

  double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& g) const {
    const auto f = free_set(x, g);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (f[i]) m = std::max(m, std::abs(g[i]));
    return m;
  }

  int evaluations() const { return evaluations_; }
  const std::vector<bool>& fixed() const { return fixed_; }

 private:
  const GradientEvaluator& eval_;
  ControlGrid grid_;
  OptimizerSettings settings_;
  std::vector<bool> fixed_;
  int evaluations_ = 0;
};

double masked_dot(const std::vector<double>& a, const std::vector<double>& b, const std::vector<bool>& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask[i]) s += a[i] * b[i];
  return s;
}

// Two-loop recursion restricted to the free variables.
std::vector<double> lbfgs_direction(const std::vector<double>& g, const std::deque<std::vector<double>>& s_hist,
                                    const std::deque<std::vector<double>>& y_hist, const std::vector<bool>& free) {
  const std::size_t n = g.size();
  const std::size_t m = s_hist.size();
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (free[i]) q[i] = g[i];
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    const double sy = masked_dot(s_hist[k], y_hist[k], free);
    rho[k] = sy > 0.0 ? 1.0 / sy : 0.0;
    alpha[k] = rho[k] * masked_dot(s_hist[k], q, free);
    for (std::size_t i = 0; i < n; ++i)
      if (free[i]) q[i] -= alpha[k] * y_hist[k][i];
  }
  double scale = 1.0;
  if (m > 0) {
    const double yy = masked_dot(y_hist.back(), y_hist.back(), free);
    const double sy = masked_dot(s_hist.back(), y_hist.back(), free);
    if (yy > 0.0 && sy > 0.0) scale = sy / yy;
  }
  for (double& v : q) v *= scale;
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * masked_dot(y_hist[k], q, free);
    for (std::size_t i = 0; i < n; ++i)
      if (free[i]) q[i] += s_hist[k][i] * (alpha[k] - beta);
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

void write_iteration(std::ostream& os, const IterationRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"type\":\"iteration\",\"stage\":%d,\"iteration\":%d,\"dt\":%.17g,\"cost\":%.17g,\"fidelity\":%.17g,"
                "\"projected_gradient_norm\":%.6e,\"step_length\":%.6e,\"evaluations\":%d,\"truncation_alarm\":%s,"
                "\"controls\":[",
                r.stage, r.iteration, r.dt, r.cost, r.fidelity, r.projected_gradient_norm, r.step_length,
                r.evaluations, r.truncation_alarm ? "true" : "false");
  os << buf;
  for (std::size_t i = 0; i < r.controls.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", r.controls[i]);
    os << buf;
  }
  os << "]}\n";
}

void write_stage_summary(std::ostream& os, const StageSummary& s) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "{\"type\":\"stage\",\"stage\":%d,\"dt\":%.17g,\"iterations\":%d,\"evaluations\":%d,\"status\":\"%s\","
                "\"initial_cost\":%.17g,\"final_cost\":%.17g,\"final_fidelity\":%.17g}\n",
                s.stage, s.dt, s.iterations, s.evaluations, s.status.c_str(), s.initial_cost, s.final_cost,
                s.final_fidelity);
  os << buf;
}

OptimizationRecord optimize(const GradientEvaluator& evaluate, ControlGrid controls,
                            const std::vector<HomotopyStage>& schedule, const OptimizerSettings& settings,
                            std::ostream* jsonl) {
  controls.validate();
  validate_schedule(controls, schedule);
  if (settings.memory < 1 || !(settings.armijo > 0.0 && settings.armijo < settings.wolfe && settings.wolfe < 1.0))
    throw std::invalid_argument("invalid optimizer settings");
  const auto start = std::chrono::steady_clock::now();
  auto out_of_time = [&] {
    if (settings.max_seconds <= 0.0) return false;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > settings.max_seconds;
  };
  OptimizationRecord record;
  int total_iterations = 0;
  bool budget_exhausted = false;

  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const HomotopyStage& spec = schedule[stage];
    while (controls.dt > spec.dt * (1.0 + 1e-9)) controls = refine_control(controls);
    StageRunner runner(evaluate, controls, settings);
    std::vector<double> x = runner.project(controls.values);
    GradientResult r = runner.evaluate(x);
    StageSummary summary;
    summary.stage = static_cast<int>(stage);
    summary.dt = controls.dt;
    summary.initial_cost = r.total_cost;

    auto push_record = [&](int iteration, double step_length) {
      IterationRecord it;
      it.stage = static_cast<int>(stage);
      it.iteration = iteration;
      it.dt = controls.dt;
      it.cost = r.total_cost;
      it.fidelity = r.fidelity;
      it.projected_gradient_norm = runner.projected_gradient_norm(x, r.gradient);
      it.step_length = step_length;
      it.evaluations = runner.evaluations();
      it.truncation_alarm = r.truncation_alarm;
      it.controls = x;
      if (jsonl) {
        write_iteration(*jsonl, it);
        jsonl->flush();
      }
      record.iterations.push_back(std::move(it));
    };
    push_record(0, 0.0);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::string status = "max_iterations";
    int iteration = 0;
    for (; iteration < spec.max_iterations; ++iteration) {
      if (budget_exhausted || out_of_time() ||
          (settings.max_total_iterations > 0 && total_iterations >= settings.max_total_iterations)) {
        status = "budget";
        budget_exhausted = true;
        break;
      }
      const double pg = runner.projected_gradient_norm(x, r.gradient);
      if (pg < spec.gradient_tolerance) {
        status = "converged";
        break;
      }
      if (settings.fidelity_goal > 0.0 && r.fidelity >= settings.fidelity_goal) {
        status = "fidelity_goal";
        break;
      }
      const auto free = runner.free_set(x, r.gradient);
      std::vector<double> d = lbfgs_direction(r.gradient, s_hist, y_hist, free);
      double slope = masked_dot(r.gradient, d, free);
      if (!(slope < 0.0)) {
        s_hist.clear();
        y_hist.clear();
        d = lbfgs_direction(r.gradient, s_hist, y_hist, free);
        slope = masked_dot(r.gradient, d, free);
        if (!(slope < 0.0)) {
          status = "converged";
          break;
        }
      }
      double dmax = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (free[i]) dmax = std::max(dmax, std::abs(d[i]));
        else d[i] = 0.0;
      const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / dmax) : 1.0;

      // Strong-Wolfe search along the projected path x(a) = P(x + a d).
      const double f0 = r.total_cost;
      auto trial = [&](double a, Point& p) {
        std::vector<double> xt(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + a * d[i];
        p.x = runner.project(std::move(xt));
        p.r = runner.evaluate(p.x);
      };
      auto armijo_ok = [&](const Point& p) {
        double decrease = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) decrease += r.gradient[i] * (p.x[i] - x[i]);
        return p.r.total_cost <= f0 + settings.armijo * std::min(decrease, 0.0) && p.r.total_cost < f0;
      };
      auto path_slope = [&](const Point& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const bool clipped = (d[i] < 0.0 && runner.at_lower(p.x[i])) || (d[i] > 0.0 && runner.at_upper(p.x[i]));
          if (!clipped) s += p.r.gradient[i] * d[i];
        }
        return s;
      };
      auto curvature_ok = [&](const Point& p) { return std::abs(path_slope(p)) <= -settings.wolfe * slope; };

      std::optional<Point> best;  // lowest Armijo-satisfying point seen
      auto consider = [&](const Point& p) {
        if (armijo_ok(p) && (!best || p.r.total_cost < best->r.total_cost)) best = p;
      };
      std::optional<Point> accepted;
      double lo = 0.0, hi = 0.0, f_lo = f0;
      bool bracketed = false;
      double a = alpha0, a_prev = 0.0, f_prev = f0;
      int evals = 0;
      while (evals < settings.max_line_search && !accepted) {
        Point p;
        trial(a, p);
        ++evals;
        consider(p);
        if (!armijo_ok(p) || (evals > 1 && p.r.total_cost >= f_prev)) {
          lo = a_prev;
          f_lo = f_prev;
          hi = a;
          bracketed = true;
          break;
        }
        if (curvature_ok(p)) {
          accepted = p;
          break;
        }
        if (path_slope(p) >= 0.0) {
          lo = a;
          f_lo = p.r.total_cost;
          hi = a_prev;
          bracketed = true;
          break;
        }
        a_prev = a;
        f_prev = p.r.total_cost;
        a *= 2.0;
      }
      while (bracketed && !accepted && evals < settings.max_line_search) {
        const double am = 0.5 * (lo + hi);
        if (std::abs(hi - lo) < 1e-14 * std::max(1.0, am)) break;
        Point p;
        trial(am, p);
        ++evals;
        consider(p);
        if (!armijo_ok(p) || p.r.total_cost >= f_lo) {
          hi = am;
        } else {
          if (curvature_ok(p)) {
            accepted = p;
            break;
          }
          if (path_slope(p) * (hi - lo) >= 0.0) hi = lo;
          lo = am;
          f_lo = p.r.total_cost;
        }
      }
      if (!accepted) accepted = best;
      if (!accepted) {
        status = "line_search_failed";
        break;
      }
      std::vector<double> s(x.size()), y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        s[i] = accepted->x[i] - x[i];
        y[i] = accepted->r.gradient[i] - r.gradient[i];
      }
      double step_length = 0.0;
      for (double v : s) step_length = std::max(step_length, std::abs(v));
      const std::vector<bool> all(x.size(), true);
      const double sy = masked_dot(s, y, all);
      if (sy > 1e-12 * std::sqrt(masked_dot(s, s, all) * masked_dot(y, y, all))) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        if (static_cast<int>(s_hist.size()) > settings.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      const double f_old = r.total_cost;
      x = accepted->x;
      r = accepted->r;
      ++total_iterations;
      push_record(iteration + 1, step_length);
      if (f_old - r.total_cost <= spec.relative_cost_tolerance * std::max(1e-300, std::abs(f_old))) {
        ++iteration;
        status = "stalled";
        break;
      }
    }
    controls.values = x;
    summary.iterations = iteration;
    summary.evaluations = runner.evaluations();
    summary.status = status;
    summary.final_cost = r.total_cost;
    summary.final_fidelity = r.fidelity;
    if (jsonl) {
      write_stage_summary(*jsonl, summary);
      jsonl->flush();
    }
    record.stages.push_back(summary);
    record.final_result = r;
  }
  record.controls = controls;
  record.status = budget_exhausted ? "budget" : record.stages.back().status;
  return record;
}

}  // namespace bhc
