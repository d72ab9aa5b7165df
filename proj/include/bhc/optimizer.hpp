#pragma once

// Box-constrained limited-memory quasi-Newton descent with a homotopy in the
// time step: each stage optimizes on its own grid, and the result is refined
// onto the next (finer) grid before the next stage starts.

#include <chrono>
#include <iosfwd>
#include <string>
#include <vector>

#include "bhc/controls.hpp"
#include "bhc/grape.hpp"

namespace bhc {

struct HomotopyStage {
  double dt = 0.1;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;    // on the projected gradient, max norm
  double relative_cost_tolerance = 1e-10;
};

struct OptimizerSettings {
  int memory = 10;
  double armijo = 1e-4;
  double wolfe = 0.9;
  int max_line_search = 25;
  double max_seconds = 0.0;  // 0 disables the wall-clock budget
  int max_total_iterations = 0;  // 0 disables
  /// Stop a stage once the fidelity reaches this value (0 disables).
  double fidelity_goal = 0.0;
};

struct IterationRecord {
  int stage = 0;
  int iteration = 0;
  double dt = 0.0;
  double cost = 0.0;
  double fidelity = 0.0;
  double projected_gradient_norm = 0.0;
  double step_length = 0.0;
  int evaluations = 0;
  bool truncation_alarm = false;
  std::vector<double> controls;
};

struct StageSummary {
  int stage = 0;
  double dt = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string status;  // converged, stalled, max_iterations, line_search_failed, budget, fidelity_goal
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double final_fidelity = 0.0;
};

struct OptimizationRecord {
  std::vector<IterationRecord> iterations;
  std::vector<StageSummary> stages;
  ControlGrid controls;
  GradientResult final_result;
  std::string status;
};

/// Throws std::invalid_argument unless the first stage matches the grid and
/// each later dt equals the previous one divided by a power of two.
void validate_schedule(const ControlGrid& controls, const std::vector<HomotopyStage>& schedule);

/// `evaluate` must return the cost and gradient for any grid in the schedule.
/// Iterates are projected onto the control bounds; endpoints stay fixed when
/// the grid clamps them. Each accepted iterate is appended to `jsonl` if set.
OptimizationRecord optimize(const GradientEvaluator& evaluate, ControlGrid controls,
                            const std::vector<HomotopyStage>& schedule, const OptimizerSettings& settings = {},
                            std::ostream* jsonl = nullptr);

void write_iteration(std::ostream& os, const IterationRecord& record);
void write_stage_summary(std::ostream& os, const StageSummary& summary);

}  // namespace bhc
