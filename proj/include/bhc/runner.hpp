#pragma once

// Run configuration, multistart batches over (duration, seed) jobs, and the
// data files behind the usual figures.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bhc/controls.hpp"
#include "bhc/grape.hpp"
#include "bhc/lattice.hpp"
#include "bhc/mps.hpp"
#include "bhc/optimizer.hpp"

namespace bhc {

struct StageConfig {
  double dt_sim = 0.1;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double relative_cost_tolerance = 1e-10;
};

struct RunConfig {
  LatticeParams lattice{};
  int table_samples = 80;
  int n_sites = 4;
  int n_particles = 4;
  int local_dim = 5;
  double superfluid_depth_er = 3.0;
  double mott_depth_er = 13.0;
  TruncationCaps caps{};
  std::vector<double> durations_sim{3.0, 4.0, 5.0, 6.0};
  std::vector<StageConfig> homotopy{{0.1}, {0.05}, {0.025}};
  double alpha = 0.0;
  double gamma = 0.0;
  bool clamp_endpoints = true;
  int seed_count = 20;
  std::uint64_t master_seed = 20240601;
  SeedSpec seed{};  // reference endpoints are filled from the table
  std::optional<ControlBounds> bounds;  // default: table range within [1.32, 40.18]
  std::string ground_state_method = "imaginary_time";  // or "exact"
  std::vector<double> tau_schedule_sim{0.2, 0.05, 0.01, 0.002};
  double truncation_alarm = 1e-6;
  OptimizerSettings optimizer{};
  std::filesystem::path output_dir = "bhcontrol-run";
  std::filesystem::path cache_dir;  // default: output_dir / "cache"
  int parallelism = 1;
};

/// Validation collects every problem before throwing.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  std::vector<std::string> problems;
};

RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration including defaults.
std::string config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of job (duration, index): independent of every other job.
std::uint64_t job_seed(std::uint64_t master, double duration, int index);

/// Everything a job needs that is shared by all jobs of a batch.
struct RunContext {
  RunConfig config;
  ConstitutiveTable table;
  ControlBounds bounds;
  double u_superfluid = 0.0;
  double u_mott = 0.0;
  Mps superfluid;
  Mps mott;
  double superfluid_energy = 0.0;
  double mott_energy = 0.0;
};

RunContext prepare_context(const RunConfig& config);

struct JobResult {
  double duration = 0.0;
  int seed_index = 0;
  std::uint64_t rng_seed = 0;
  std::string status;  // optimizer status, or "failed"
  std::string error;
  double initial_fidelity = 0.0;
  double final_fidelity = 0.0;
  double final_cost = 0.0;
  double t_si = 0.0;  // seconds
  ControlGrid controls;
  std::filesystem::path record_path;
};

struct BatchResult {
  std::vector<JobResult> jobs;
  std::map<double, double> best_fidelity;  // per duration, successful jobs only
  int failures = 0;
  std::filesystem::path output_dir;
};

/// Optimizes one (duration, seed) job and writes its record file.
JobResult run_job(const RunContext& context, double duration, int seed_index,
                  const std::filesystem::path& record_dir);

BatchResult run_batch(const RunConfig& config);
BatchResult run_batch(const RunContext& context);

/// Rebuilds the batch result from the record files of a batch directory.
BatchResult summarize_records(const std::filesystem::path& output_dir);
void write_summary(const BatchResult& batch, const std::filesystem::path& path);

enum class FigureKind { f_vs_t, controls, occupations, merit };
FigureKind parse_figure_kind(const std::string& name);

/// Writes the CSV for `kind` into `out_dir` and returns its path. The
/// occupations and merit kinds re-propagate the best job of each duration.
std::filesystem::path emit_figure_data(const BatchResult& batch, FigureKind kind, const RunContext& context,
                                       const std::filesystem::path& out_dir);

/// Writes `text` to a sibling temporary file and renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace bhc
