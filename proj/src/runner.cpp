#include "bhc/runner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bhc/observables.hpp"
#include "bhc/tebd.hpp"

namespace bhc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigSchema = "bhcontrol.run-config v1";
constexpr const char* kRecordSchema = "bhcontrol.job-record v1";

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : "; ") + p;
  return s;
}

// Reads optional fields of one JSON object, recording problems instead of
// throwing so that every mistake is reported at once.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) problems_.push_back(path_ + " must be an object");
  }
  ~Reader() {
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        problems_.push_back("unknown key " + path_ + "." + it.key());
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const std::exception&) {
      problems_.push_back(path_ + "." + key + " has the wrong type");
    }
  }
  const json* child(const std::string& key) {
    seen_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::vector<std::string> seen_;
};

std::string format_duration(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::vector<int> unit_filling_seed(int n_sites, int n_particles) {
  std::vector<int> occ(n_sites, n_particles / n_sites);
  for (int i = 0; i < n_particles % n_sites; ++i) occ[i] += 1;
  return occ;
}

std::vector<HomotopyStage> schedule_of(const RunConfig& c) {
  std::vector<HomotopyStage> s;
  for (const auto& st : c.homotopy)
    s.push_back({st.dt_sim, st.max_iterations, st.gradient_tolerance, st.relative_cost_tolerance});
  return s;
}

json controls_json(const ControlGrid& g) {
  return json{{"dt_sim", g.dt}, {"clamp_endpoints", g.clamp_endpoints}, {"values", g.values}};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> p)
    : std::invalid_argument("invalid configuration: " + join(p)), problems(std::move(p)) {}

RunConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  std::vector<std::string> problems;
  RunConfig c;
  {
    Reader top(root, "config", problems);
    std::string schema = kConfigSchema;
    top.get("schema", schema);
    if (schema != kConfigSchema) problems.push_back("config.schema must be \"" + std::string(kConfigSchema) + "\"");
    if (const json* j = top.child("lattice")) {
      Reader r(*j, "lattice", problems);
      double mass_amu = c.lattice.atom_mass / si::amu;
      double as_a0 = c.lattice.scattering_length / si::bohr_radius;
      r.get("laser_wavelength_m", c.lattice.laser_wavelength);
      r.get("atom_mass_amu", mass_amu);
      r.get("scattering_length_a0", as_a0);
      r.get("transverse_depth_y_er", c.lattice.transverse_depth_y);
      r.get("transverse_depth_z_er", c.lattice.transverse_depth_z);
      r.get("table_samples", c.table_samples);
      c.lattice.atom_mass = mass_amu * si::amu;
      c.lattice.scattering_length = as_a0 * si::bohr_radius;
    }
    if (const json* j = top.child("system")) {
      Reader r(*j, "system", problems);
      r.get("sites", c.n_sites);
      r.get("particles", c.n_particles);
      r.get("local_dim", c.local_dim);
    }
    if (const json* j = top.child("states")) {
      Reader r(*j, "states", problems);
      r.get("superfluid_depth_er", c.superfluid_depth_er);
      r.get("mott_depth_er", c.mott_depth_er);
      r.get("ground_state_method", c.ground_state_method);
      r.get("tau_schedule_sim", c.tau_schedule_sim);
    }
    if (const json* j = top.child("truncation")) {
      Reader r(*j, "truncation", problems);
      r.get("max_bond", c.caps.max_bond);
      r.get("sv_threshold", c.caps.sv_threshold);
      r.get("alarm_weight", c.truncation_alarm);
    }
    top.get("durations_sim", c.durations_sim);
    if (const json* j = top.child("homotopy")) {
      if (!j->is_array()) {
        problems.push_back("homotopy must be an array of stages");
      } else {
        c.homotopy.clear();
        for (std::size_t k = 0; k < j->size(); ++k) {
          StageConfig st;
          Reader r((*j)[k], "homotopy[" + std::to_string(k) + "]", problems);
          r.get("dt_sim", st.dt_sim);
          r.get("max_iterations", st.max_iterations);
          r.get("gradient_tolerance", st.gradient_tolerance);
          r.get("relative_cost_tolerance", st.relative_cost_tolerance);
          c.homotopy.push_back(st);
        }
      }
    }
    if (const json* j = top.child("cost")) {
      Reader r(*j, "cost", problems);
      r.get("alpha", c.alpha);
      r.get("gamma", c.gamma);
      r.get("clamp_endpoints", c.clamp_endpoints);
      if (const json* b = r.child("bounds")) {
        Reader rb(*b, "cost.bounds", problems);
        ControlBounds bounds;
        rb.get("lower", bounds.lower);
        rb.get("upper", bounds.upper);
        c.bounds = bounds;
      }
    }
    if (const json* j = top.child("seeds")) {
      Reader r(*j, "seeds", problems);
      r.get("count", c.seed_count);
      r.get("master_seed", c.master_seed);
      r.get("n_fourier", c.seed.n_fourier);
      r.get("log_amplitude", c.seed.amplitude_scale);
      r.get("frequency_min_per_duration", c.seed.frequency_min);
      r.get("frequency_max_per_duration", c.seed.frequency_max);
      r.get("crossing_ratio", c.seed.reference.u_cross);
      r.get("crossing_slowdown", c.seed.reference.crossing_slowdown);
    }
    if (const json* j = top.child("optimizer")) {
      Reader r(*j, "optimizer", problems);
      r.get("memory", c.optimizer.memory);
      r.get("armijo", c.optimizer.armijo);
      r.get("wolfe", c.optimizer.wolfe);
      r.get("max_line_search", c.optimizer.max_line_search);
      r.get("max_seconds_per_job", c.optimizer.max_seconds);
      r.get("fidelity_goal", c.optimizer.fidelity_goal);
    }
    if (const json* j = top.child("output")) {
      Reader r(*j, "output", problems);
      std::string dir = c.output_dir.string(), cache;
      r.get("directory", dir);
      r.get("cache_directory", cache);
      r.get("parallelism", c.parallelism);
      c.output_dir = dir;
      if (!cache.empty()) c.cache_dir = cache;
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema"] = kConfigSchema;
  j["lattice"] = {{"laser_wavelength_m", c.lattice.laser_wavelength},
                  {"atom_mass_amu", c.lattice.atom_mass / si::amu},
                  {"scattering_length_a0", c.lattice.scattering_length / si::bohr_radius},
                  {"transverse_depth_y_er", c.lattice.transverse_depth_y},
                  {"transverse_depth_z_er", c.lattice.transverse_depth_z},
                  {"table_samples", c.table_samples}};
  j["system"] = {{"sites", c.n_sites}, {"particles", c.n_particles}, {"local_dim", c.local_dim}};
  j["states"] = {{"superfluid_depth_er", c.superfluid_depth_er},
                 {"mott_depth_er", c.mott_depth_er},
                 {"ground_state_method", c.ground_state_method},
                 {"tau_schedule_sim", c.tau_schedule_sim}};
  j["truncation"] = {{"max_bond", c.caps.max_bond}, {"sv_threshold", c.caps.sv_threshold},
                     {"alarm_weight", c.truncation_alarm}};
  j["durations_sim"] = c.durations_sim;
  j["homotopy"] = json::array();
  for (const auto& st : c.homotopy)
    j["homotopy"].push_back({{"dt_sim", st.dt_sim},
                             {"max_iterations", st.max_iterations},
                             {"gradient_tolerance", st.gradient_tolerance},
                             {"relative_cost_tolerance", st.relative_cost_tolerance}});
  j["cost"] = {{"alpha", c.alpha}, {"gamma", c.gamma}, {"clamp_endpoints", c.clamp_endpoints}};
  if (c.bounds) j["cost"]["bounds"] = {{"lower", c.bounds->lower}, {"upper", c.bounds->upper}};
  j["seeds"] = {{"count", c.seed_count},
                {"master_seed", c.master_seed},
                {"n_fourier", c.seed.n_fourier},
                {"log_amplitude", c.seed.amplitude_scale},
                {"frequency_min_per_duration", c.seed.frequency_min},
                {"frequency_max_per_duration", c.seed.frequency_max},
                {"crossing_ratio", c.seed.reference.u_cross},
                {"crossing_slowdown", c.seed.reference.crossing_slowdown}};
  j["optimizer"] = {{"memory", c.optimizer.memory},
                    {"armijo", c.optimizer.armijo},
                    {"wolfe", c.optimizer.wolfe},
                    {"max_line_search", c.optimizer.max_line_search},
                    {"max_seconds_per_job", c.optimizer.max_seconds},
                    {"fidelity_goal", c.optimizer.fidelity_goal}};
  j["output"] = {{"directory", c.output_dir.string()},
                 {"cache_directory", c.cache_dir.string()},
                 {"parallelism", c.parallelism}};
  return j.dump(2) + "\n";
}

void validate(const RunConfig& c) {
  std::vector<std::string> p;
  try {
    c.lattice.validate();
  } catch (const std::exception& e) {
    p.push_back(e.what());
  }
  auto depth_ok = [&](double v, const char* name) {
    if (!(v >= kMinDepth && v <= kMaxDepth))
      p.push_back(std::string(name) + " = " + std::to_string(v) + " E_R outside [2, 13.5] E_R");
  };
  depth_ok(c.superfluid_depth_er, "states.superfluid_depth_er");
  depth_ok(c.mott_depth_er, "states.mott_depth_er");
  if (c.table_samples < 50) p.push_back("lattice.table_samples must be at least 50");
  if (c.n_sites < 2) p.push_back("system.sites must be at least 2");
  if (c.n_particles < 1) p.push_back("system.particles must be positive");
  if (c.local_dim < 2) p.push_back("system.local_dim must be at least 2");
  if (c.n_sites >= 1 && c.n_particles > c.n_sites * (c.local_dim - 1))
    p.push_back("particles do not fit under the local dimension cap");
  if (c.caps.max_bond < 1) p.push_back("truncation.max_bond must be positive");
  if (!(c.caps.sv_threshold >= 0.0 && c.caps.sv_threshold < 1.0)) p.push_back("truncation.sv_threshold must lie in [0, 1)");
  if (c.durations_sim.empty()) p.push_back("durations_sim is empty");
  for (double t : c.durations_sim)
    if (!(t > 0.0)) p.push_back("durations_sim entries must be positive");
  if (c.homotopy.empty()) {
    p.push_back("homotopy needs at least one stage");
  } else {
    for (double t : c.durations_sim) {
      if (!(t > 0.0)) continue;
      try {
        grid_points(t, c.homotopy.front().dt_sim);
      } catch (const std::exception& e) {
        p.push_back(std::string("duration ") + format_duration(t) + ": " + e.what());
      }
    }
    try {
      ControlGrid probe;
      probe.dt = c.homotopy.front().dt_sim;
      probe.values = {2.0, 2.0};
      std::vector<HomotopyStage> s = schedule_of(c);
      validate_schedule(probe, s);
    } catch (const std::exception& e) {
      p.push_back(std::string("homotopy: ") + e.what());
    }
  }
  if (c.alpha < 0.0 || c.gamma < 0.0) p.push_back("cost.alpha and cost.gamma must be non-negative");
  if (c.bounds && !(c.bounds->lower > 0.0 && c.bounds->lower < c.bounds->upper))
    p.push_back("cost.bounds must satisfy 0 < lower < upper");
  if (c.seed_count < 1) p.push_back("seeds.count must be positive");
  if (c.seed.n_fourier < 0 || c.seed.amplitude_scale < 0.0 || c.seed.frequency_min > c.seed.frequency_max)
    p.push_back("seeds: invalid Fourier settings");
  if (c.ground_state_method != "imaginary_time" && c.ground_state_method != "exact")
    p.push_back("states.ground_state_method must be \"imaginary_time\" or \"exact\"");
  if (c.tau_schedule_sim.empty()) p.push_back("states.tau_schedule_sim is empty");
  for (double t : c.tau_schedule_sim)
    if (!(t > 0.0)) p.push_back("states.tau_schedule_sim entries must be positive");
  if (c.parallelism < 1) p.push_back("output.parallelism must be at least 1");
  if (c.optimizer.memory < 1) p.push_back("optimizer.memory must be positive");
  if (!(c.optimizer.armijo > 0.0 && c.optimizer.armijo < c.optimizer.wolfe && c.optimizer.wolfe < 1.0))
    p.push_back("optimizer: need 0 < armijo < wolfe < 1");
  if (c.output_dir.empty()) p.push_back("output.directory is empty");
  if (!p.empty()) throw ConfigError(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t job_seed(std::uint64_t master, double duration, int index) {
  const std::uint64_t stream = splitmix64(master ^ splitmix64(std::bit_cast<std::uint64_t>(duration)));
  return splitmix64(stream + static_cast<std::uint64_t>(index));
}

void write_file_atomically(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

RunContext prepare_context(const RunConfig& config) {
  validate(config);
  const fs::path cache = config.cache_dir.empty() ? config.output_dir / "cache" : config.cache_dir;
  ConstitutiveTable table = load_or_build_table(config.lattice, config.table_samples, cache);
  RunContext ctx{config, table, {}, 0.0, 0.0, {}, {}, 0.0, 0.0};
  ctx.bounds = config.bounds.value_or(
      ControlBounds{std::max(ControlBounds{}.lower, table.u_min()), std::min(ControlBounds{}.upper, table.u_max())});
  ctx.u_superfluid = table.ratio_at(config.superfluid_depth_er);
  ctx.u_mott = table.ratio_at(config.mott_depth_er);
  for (double u : {ctx.u_superfluid, ctx.u_mott})
    if (u < ctx.bounds.lower - 1e-9 || u > ctx.bounds.upper + 1e-9)
      throw ConfigError({"state ratio " + std::to_string(u) + " lies outside the control bounds"});
  ctx.config.seed.reference.u_start = ctx.u_superfluid;
  ctx.config.seed.reference.u_end = ctx.u_mott;

  auto make_state = [&](double u, double& energy_out) {
    if (config.ground_state_method == "exact") {
      auto basis = std::make_shared<const FockBasis>(config.n_sites, config.n_particles,
                                                     std::min(config.n_particles, config.local_dim - 1));
      GroundState gs = ground_state(basis, u);
      energy_out = gs.energy;
      return Mps::from_dense(gs.state, config.local_dim, config.caps);
    }
    ImaginaryTimeOptions opt;
    opt.tau_schedule = config.tau_schedule_sim;
    opt.caps = config.caps;
    const auto seed = unit_filling_seed(config.n_sites, config.n_particles);
    ImaginaryTimeResult r = ground_state_imaginary(seed, u, config.local_dim, opt);
    energy_out = r.energy;
    return r.state;
  };
  ctx.superfluid = make_state(ctx.u_superfluid, ctx.superfluid_energy);
  ctx.mott = make_state(ctx.u_mott, ctx.mott_energy);
  return ctx;
}

JobResult run_job(const RunContext& ctx, double duration, int seed_index, const fs::path& record_dir) {
  const RunConfig& c = ctx.config;
  JobResult job;
  job.duration = duration;
  job.seed_index = seed_index;
  job.rng_seed = job_seed(c.master_seed, duration, seed_index);
  const std::string stem = "T" + format_duration(duration) + "_seed" + std::to_string(seed_index);
  job.record_path = record_dir / (stem + ".jsonl");
  fs::path partial = job.record_path;
  partial += ".partial";

  std::ofstream out(partial, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + partial.string());
  out << json{{"type", "job"}, {"schema", kRecordSchema}, {"duration_sim", duration},
              {"seed_index", seed_index}, {"rng_seed", job.rng_seed}}
             .dump()
      << "\n";
  try {
    SeedSpec spec = c.seed;
    spec.rng_seed = job.rng_seed;
    const double dt0 = c.homotopy.front().dt_sim;
    ControlGrid seed = generate_seed(spec, dt0, grid_points(duration, dt0), ctx.bounds, c.clamp_endpoints);
    CostConfig cost;
    cost.alpha = c.alpha;
    cost.gamma = c.gamma;
    cost.initial_state = ctx.superfluid;
    cost.target_state = ctx.mott;
    cost.caps = c.caps;
    cost.truncation_alarm = c.truncation_alarm;
    const GradientEvaluator eval = [&](const ControlGrid& g) { return cost_and_gradient(cost, g); };
    OptimizationRecord rec = optimize(eval, seed, schedule_of(c), c.optimizer, &out);
    job.status = rec.status;
    job.initial_fidelity = rec.iterations.front().fidelity;
    job.final_fidelity = rec.final_result.fidelity;
    job.final_cost = rec.final_result.total_cost;
    job.controls = rec.controls;
    job.t_si = si_duration(ctx.table, rec.controls.dt, rec.controls.values);
    out << json{{"type", "result"},
                {"duration_sim", duration},
                {"seed_index", seed_index},
                {"rng_seed", job.rng_seed},
                {"status", job.status},
                {"initial_fidelity", job.initial_fidelity},
                {"final_fidelity", job.final_fidelity},
                {"final_cost", job.final_cost},
                {"t_si_s", job.t_si},
                {"controls", controls_json(job.controls)}}
               .dump()
        << "\n";
  } catch (const std::exception& e) {
    job.status = "failed";
    job.error = e.what();
    out << json{{"type", "failure"}, {"duration_sim", duration}, {"seed_index", seed_index},
                {"rng_seed", job.rng_seed}, {"error", job.error}}
               .dump()
        << "\n";
  }
  out.close();
  fs::rename(partial, job.record_path);
  return job;
}

namespace {

void finalize(BatchResult& batch) {
  batch.best_fidelity.clear();
  batch.failures = 0;
  for (const auto& j : batch.jobs) {
    if (j.status == "failed") {
      ++batch.failures;
      continue;
    }
    auto [it, inserted] = batch.best_fidelity.emplace(j.duration, j.final_fidelity);
    if (!inserted) it->second = std::max(it->second, j.final_fidelity);
  }
}

}  // namespace

BatchResult run_batch(const RunConfig& config) {
  fs::create_directories(config.output_dir);
  write_file_atomically(config.output_dir / "config.resolved.json", config_to_json(config));
  return run_batch(prepare_context(config));
}

BatchResult run_batch(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const fs::path record_dir = c.output_dir / "records";
  fs::create_directories(record_dir);
  if (!fs::exists(c.output_dir / "config.resolved.json"))
    write_file_atomically(c.output_dir / "config.resolved.json", config_to_json(c));

  struct Job {
    double duration;
    int index;
  };
  std::vector<Job> jobs;
  for (double t : c.durations_sim)
    for (int k = 0; k < c.seed_count; ++k) jobs.push_back({t, k});

  BatchResult batch;
  batch.output_dir = c.output_dir;
  batch.jobs.resize(jobs.size());
  std::mutex index_mutex;
  std::ofstream index(c.output_dir / "results.jsonl", std::ios::app);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      JobResult r;
      try {
        r = run_job(ctx, jobs[k].duration, jobs[k].index, record_dir);
      } catch (const std::exception& e) {
        r.duration = jobs[k].duration;
        r.seed_index = jobs[k].index;
        r.status = "failed";
        r.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(index_mutex);
        index << json{{"duration_sim", r.duration}, {"seed_index", r.seed_index}, {"status", r.status},
                      {"final_fidelity", r.final_fidelity}, {"record", r.record_path.filename().string()},
                      {"error", r.error}}
                     .dump()
              << std::endl;
      }
      batch.jobs[k] = std::move(r);
    }
  };
  const int n_threads = std::max(1, std::min<int>(c.parallelism, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  finalize(batch);
  write_summary(batch, c.output_dir / "summary.json");
  return batch;
}

BatchResult summarize_records(const fs::path& output_dir) {
  BatchResult batch;
  batch.output_dir = output_dir;
  const fs::path record_dir = output_dir / "records";
  if (!fs::exists(record_dir)) throw std::runtime_error("no records directory in " + output_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(record_dir))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::optional<json> last;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      const std::string type = j.value("type", "");
      if (type == "result" || type == "failure") last = j;
    }
    if (!last) continue;
    JobResult r;
    r.record_path = f;
    r.duration = last->at("duration_sim").get<double>();
    r.seed_index = last->at("seed_index").get<int>();
    r.rng_seed = last->value("rng_seed", std::uint64_t{0});
    if (last->at("type") == "failure") {
      r.status = "failed";
      r.error = last->value("error", "");
    } else {
      r.status = last->at("status").get<std::string>();
      r.initial_fidelity = last->at("initial_fidelity").get<double>();
      r.final_fidelity = last->at("final_fidelity").get<double>();
      r.final_cost = last->at("final_cost").get<double>();
      r.t_si = last->at("t_si_s").get<double>();
      const json& cj = last->at("controls");
      r.controls.dt = cj.at("dt_sim").get<double>();
      r.controls.clamp_endpoints = cj.at("clamp_endpoints").get<bool>();
      r.controls.values = cj.at("values").get<std::vector<double>>();
    }
    batch.jobs.push_back(std::move(r));
  }
  std::sort(batch.jobs.begin(), batch.jobs.end(), [](const JobResult& a, const JobResult& b) {
    return a.duration != b.duration ? a.duration < b.duration : a.seed_index < b.seed_index;
  });
  finalize(batch);
  return batch;
}

void write_summary(const BatchResult& batch, const fs::path& path) {
  json j;
  j["schema"] = "bhcontrol.batch-summary v1";
  j["jobs"] = batch.jobs.size();
  j["failures"] = batch.failures;
  j["best_fidelity"] = json::array();
  for (const auto& [t, f] : batch.best_fidelity) j["best_fidelity"].push_back({{"duration_sim", t}, {"fidelity", f}});
  write_file_atomically(path, j.dump(2) + "\n");
}

FigureKind parse_figure_kind(const std::string& name) {
  if (name == "f_vs_t") return FigureKind::f_vs_t;
  if (name == "controls") return FigureKind::controls;
  if (name == "occupations") return FigureKind::occupations;
  if (name == "merit") return FigureKind::merit;
  throw std::invalid_argument("unknown figure kind \"" + name + "\" (expected f_vs_t, controls, occupations, merit)");
}

fs::path emit_figure_data(const BatchResult& batch, FigureKind kind, const RunContext& ctx, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream os;
  char buf[160];
  auto best_jobs = [&] {
    std::map<double, const JobResult*> best;
    for (const auto& j : batch.jobs) {
      if (j.status == "failed") continue;
      auto it = best.find(j.duration);
      if (it == best.end() || j.final_fidelity > it->second->final_fidelity) best[j.duration] = &j;
    }
    return best;
  };
  fs::path path;
  switch (kind) {
    case FigureKind::f_vs_t: {
      path = out_dir / "f_vs_t.csv";
      os << "# schema: bhcontrol.figure.f_vs_t v1\n";
      os << "T_sim,seed_index,status,F_initial,F_final,infidelity,T_SI_s\n";
      for (const auto& j : batch.jobs) {
        if (j.status == "failed") continue;
        std::snprintf(buf, sizeof buf, "%.12g,%d,%s,%.17g,%.17g,%.17g,%.17g\n", j.duration, j.seed_index,
                      j.status.c_str(), j.initial_fidelity, j.final_fidelity, 1.0 - j.final_fidelity, j.t_si);
        os << buf;
      }
      break;
    }
    case FigureKind::controls: {
      path = out_dir / "controls.csv";
      os << "# schema: bhcontrol.figure.controls v1\n";
      os << "T_sim,seed_index,t_sim,u,v_x_er\n";
      for (const auto& j : batch.jobs) {
        if (j.status == "failed") continue;
        for (std::size_t n = 0; n < j.controls.size(); ++n) {
          const double u = j.controls.values[n];
          std::snprintf(buf, sizeof buf, "%.12g,%d,%.12g,%.17g,%.17g\n", j.duration, j.seed_index, j.controls.time(n),
                        u, ctx.table.depth_for_ratio(u));
          os << buf;
        }
      }
      break;
    }
    case FigureKind::occupations:
    case FigureKind::merit: {
      const bool occ = kind == FigureKind::occupations;
      path = out_dir / (occ ? "occupations.csv" : "merit.csv");
      os << "# schema: bhcontrol.figure." << (occ ? "occupations" : "merit") << " v1\n";
      os << "T_sim,seed_index,t_sim";
      if (occ) {
        for (int i = 0; i < ctx.config.n_sites; ++i) os << ",n_" << i + 1;
      } else {
        os << ",F,rho,eta";
      }
      os << "\n";
      for (const auto& [t, job] : best_jobs()) {
        const MeritSeries s = merit_series(ctx.superfluid, ctx.mott, job->controls, ctx.config.caps);
        for (std::size_t k = 0; k < s.times.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%.12g,%d,%.12g", t, job->seed_index, s.times[k]);
          os << buf;
          if (occ) {
            for (double v : s.occupations[k]) {
              std::snprintf(buf, sizeof buf, ",%.17g", v);
              os << buf;
            }
          } else {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g", s.fidelity[k], s.rho[k], s.eta[k]);
            os << buf;
          }
          os << "\n";
        }
      }
      break;
    }
  }
  write_file_atomically(path, os.str());
  return path;
}

}  // namespace bhc
