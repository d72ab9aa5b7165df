// Command-line front end. Exit codes: 0 success, 2 invalid input,
// 3 runtime failure, 4 batch finished with failed jobs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bhc/fock.hpp"
#include "bhc/kernels.hpp"
#include "bhc/observables.hpp"
#include "bhc/runner.hpp"
#include "bhc/tebd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitPartial = 4;

struct Overrides {
  std::string config_path;
  std::string output_dir;
  std::string cache_dir;
  std::vector<double> durations;
  int seeds = 0;
  int parallelism = 0;
  int max_bond = 0;
  long long master_seed = -1;
  std::string ground_state_method;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "run configuration (JSON)");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
  cmd->add_option("--cache-dir", o.cache_dir, "constitutive table cache directory");
  cmd->add_option("--max-bond", o.max_bond, "bond dimension cap D");
  cmd->add_option("--ground-state", o.ground_state_method, "imaginary_time or exact");
}

bhc::RunConfig resolve(const Overrides& o) {
  bhc::RunConfig c = o.config_path.empty() ? bhc::RunConfig{} : bhc::load_config(o.config_path);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
  if (!o.durations.empty()) c.durations_sim = o.durations;
  if (o.seeds > 0) c.seed_count = o.seeds;
  if (o.parallelism > 0) c.parallelism = o.parallelism;
  if (o.max_bond > 0) c.caps.max_bond = o.max_bond;
  if (o.master_seed >= 0) c.master_seed = static_cast<std::uint64_t>(o.master_seed);
  if (!o.ground_state_method.empty()) c.ground_state_method = o.ground_state_method;
  bhc::validate(c);
  return c;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

bhc::ControlGrid read_controls(const std::string& path, const bhc::ControlBounds& bounds) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read controls file " + path);
  std::string line;
  std::optional<json> found;
  std::stringstream all;
  while (std::getline(in, line)) {
    all << line << "\n";
    json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.value("type", "") == "result") found = j.at("controls");
  }
  if (!found) {
    json j = json::parse(all.str(), nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument(path + " is neither a job record nor a controls JSON");
    found = j;
  }
  bhc::ControlGrid g;
  g.dt = found->at("dt_sim").get<double>();
  g.values = found->at("values").get<std::vector<double>>();
  g.clamp_endpoints = found->value("clamp_endpoints", true);
  g.bounds = bounds;
  g.validate();
  return g;
}

int cmd_lattice_table(const Overrides& o, const std::string& out_path) {
  const bhc::RunConfig c = resolve(o);
  const fs::path cache = c.cache_dir.empty() ? c.output_dir / "cache" : c.cache_dir;
  const bhc::ConstitutiveTable table = bhc::load_or_build_table(c.lattice, c.table_samples, cache);
  std::ofstream file;
  table.write(open_output(out_path, file), bhc::table_cache_key(c.lattice, c.table_samples, {}));
  std::fprintf(stderr, "E_R/h = %.6f kHz, U/J range [%.5f, %.5f]\n", c.lattice.recoil_energy() / bhc::si::planck / 1e3,
               table.u_min(), table.u_max());
  return 0;
}

int cmd_ground_states(const Overrides& o, const std::string& out_dir) {
  const bhc::RunConfig c = resolve(o);
  const bhc::RunContext ctx = bhc::prepare_context(c);
  const fs::path dir = out_dir.empty() ? c.output_dir : fs::path(out_dir);
  fs::create_directories(dir);
  auto basis = std::make_shared<const bhc::FockBasis>(c.n_sites, c.n_particles,
                                                      bhc::default_max_occupation(c.n_particles, c.local_dim));
  struct Item {
    const char* name;
    double u;
    const bhc::Mps* mps;
  };
  for (const Item& it : {Item{"superfluid", ctx.u_superfluid, &ctx.superfluid}, Item{"mott", ctx.u_mott, &ctx.mott}}) {
    const bhc::GroundState gs = bhc::ground_state(basis, it.u);
    std::ostringstream dense, snap;
    bhc::write_state(dense, gs.state);
    bhc::write_snapshot(snap, *it.mps);
    bhc::write_file_atomically(dir / (std::string(it.name) + ".dense.txt"), dense.str());
    bhc::write_file_atomically(dir / (std::string(it.name) + ".mps.txt"), snap.str());
    const double f = bhc::fidelity(it.mps->to_dense(basis), gs.state);
    std::printf("%s u=%.10g E_exact=%.12g E_mps=%.12g F(mps, exact)=%.15f\n", it.name, it.u, gs.energy,
                bhc::energy(*it.mps, it.u), f);
  }
  return 0;
}

int cmd_propagate(const Overrides& o, const std::string& controls_path, double duration, const std::string& out_dir) {
  const bhc::RunConfig c = resolve(o);
  const bhc::RunContext ctx = bhc::prepare_context(c);
  bhc::ControlGrid grid;
  if (!controls_path.empty()) {
    grid = read_controls(controls_path, ctx.bounds);
  } else {
    if (!(duration > 0.0)) throw std::invalid_argument("propagate needs --controls or a positive --duration");
    const double dt = c.homotopy.back().dt_sim;
    const std::size_t n = bhc::grid_points(duration, dt);
    bhc::ReferenceRamp ramp = ctx.config.seed.reference;
    grid.dt = dt;
    grid.bounds = ctx.bounds;
    for (std::size_t k = 0; k < n; ++k) grid.values.push_back(ramp(static_cast<double>(k) / static_cast<double>(n - 1)));
  }
  const fs::path dir = out_dir.empty() ? c.output_dir : fs::path(out_dir);
  fs::create_directories(dir);
  const bhc::MeritSeries s = bhc::merit_series(ctx.superfluid, ctx.mott, grid, c.caps);
  std::ostringstream merit, occ;
  bhc::write_merit_csv(merit, s);
  bhc::write_occupations_csv(occ, s);
  bhc::write_file_atomically(dir / "merit.csv", merit.str());
  bhc::write_file_atomically(dir / "occupations.csv", occ.str());
  std::printf("T=%.10g steps=%zu F=%.15f rho=%.6g eta=%.6g T_SI=%.6g s\n", grid.duration(), grid.size() - 1,
              s.fidelity.back(), s.rho.back(), s.eta.back(), bhc::si_duration(ctx.table, grid.dt, grid.values));
  return 0;
}

int cmd_optimize(const Overrides& o, double duration, int seed_index) {
  const bhc::RunConfig c = resolve(o);
  if (seed_index < 0) throw std::invalid_argument("--seed-index must be non-negative");
  bhc::grid_points(duration, c.homotopy.front().dt_sim);
  const bhc::RunContext ctx = bhc::prepare_context(c);
  const fs::path dir = c.output_dir / "records";
  fs::create_directories(dir);
  bhc::write_file_atomically(c.output_dir / "config.resolved.json", bhc::config_to_json(c));
  const bhc::JobResult r = bhc::run_job(ctx, duration, seed_index, dir);
  if (r.status == "failed") {
    std::fprintf(stderr, "job failed: %s\n", r.error.c_str());
    return kExitRuntime;
  }
  std::printf("T=%.10g seed=%d status=%s F0=%.10f F=%.15f T_SI=%.6g s record=%s\n", r.duration, r.seed_index,
              r.status.c_str(), r.initial_fidelity, r.final_fidelity, r.t_si, r.record_path.string().c_str());
  return 0;
}

int cmd_batch(const Overrides& o) {
  const bhc::RunConfig c = resolve(o);
  const bhc::BatchResult b = bhc::run_batch(c);
  for (const auto& [t, f] : b.best_fidelity) std::printf("T=%.10g best_F=%.15f\n", t, f);
  std::printf("jobs=%zu failures=%d summary=%s\n", b.jobs.size(), b.failures,
              (b.output_dir / "summary.json").string().c_str());
  return b.failures > 0 ? kExitPartial : 0;
}

int cmd_emit(const std::string& run_dir, const std::vector<std::string>& kinds, const std::string& out_dir) {
  const bhc::RunConfig c = bhc::load_config(fs::path(run_dir) / "config.resolved.json");
  std::vector<bhc::FigureKind> parsed;
  for (const auto& k : kinds) parsed.push_back(bhc::parse_figure_kind(k));
  const bhc::BatchResult b = bhc::summarize_records(run_dir);
  bhc::write_summary(b, fs::path(run_dir) / "summary.json");
  const bhc::RunContext ctx = bhc::prepare_context(c);
  const fs::path dir = out_dir.empty() ? fs::path(run_dir) / "figures" : fs::path(out_dir);
  for (auto k : parsed) std::printf("%s\n", bhc::emit_figure_data(b, k, ctx, dir).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of the superfluid to Mott insulator transfer"};
  app.require_subcommand(1);
  bool show_isa = false;
  app.add_flag("--show-isa", show_isa, "print the selected kernel instruction set");

  Overrides o;
  std::string out_path, out_dir, controls_path, run_dir;
  std::vector<std::string> kinds{"f_vs_t", "controls", "occupations", "merit"};
  double duration = 0.0;
  int seed_index = 0;

  auto* table = app.add_subcommand("lattice-table", "constitutive table J_x(v_x), U(v_x)");
  add_common(table, o);
  table->add_option("--out", out_path, "output file (default stdout)");

  auto* states = app.add_subcommand("ground-states", "superfluid and Mott states with the dense oracle");
  add_common(states, o);
  states->add_option("--out", out_dir, "output directory");

  auto* prop = app.add_subcommand("propagate", "propagate the superfluid state along a control");
  add_common(prop, o);
  prop->add_option("--controls", controls_path, "controls JSON or job record");
  prop->add_option("--duration", duration, "use the reference ramp of this duration (simulation units)");
  prop->add_option("--out", out_dir, "output directory");

  auto* opt = app.add_subcommand("optimize", "optimize one (duration, seed) job");
  add_common(opt, o);
  opt->add_option("--duration", duration, "duration (simulation units)")->required();
  opt->add_option("--seed-index", seed_index, "seed index")->check(CLI::NonNegativeNumber);
  opt->add_option("--master-seed", o.master_seed, "master seed");

  auto* batch = app.add_subcommand("batch", "multistart optimization over durations and seeds");
  add_common(batch, o);
  batch->add_option("--durations", o.durations, "durations (simulation units)");
  batch->add_option("--seeds", o.seeds, "seeds per duration");
  batch->add_option("-j,--parallelism", o.parallelism, "worker threads");
  batch->add_option("--master-seed", o.master_seed, "master seed");

  auto* emit = app.add_subcommand("emit", "write figure data from a batch directory");
  emit->add_option("run_dir", run_dir, "batch output directory")->required();
  emit->add_option("--kind", kinds, "f_vs_t, controls, occupations, merit");
  emit->add_option("--out", out_dir, "output directory (default run_dir/figures)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }
  if (show_isa) std::fprintf(stderr, "kernels: %s\n", std::string(bhc::kernels::isa_name(bhc::kernels::active_isa())).c_str());

  try {
    if (*table) return cmd_lattice_table(o, out_path);
    if (*states) return cmd_ground_states(o, out_dir);
    if (*prop) return cmd_propagate(o, controls_path, duration, out_dir);
    if (*opt) return cmd_optimize(o, duration, seed_index);
    if (*batch) return cmd_batch(o);
    if (*emit) return cmd_emit(run_dir, kinds, out_dir);
  } catch (const bhc::ConfigError& e) {
    std::fprintf(stderr, "configuration error:\n");
    for (const auto& p : e.problems) std::fprintf(stderr, "  - %s\n", p.c_str());
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
