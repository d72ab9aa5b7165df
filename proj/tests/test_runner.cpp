#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bhc/observables.hpp"
#include "bhc/runner.hpp"

using namespace bhc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "bhc_runner_test";

json make_config(const std::string& name) {
  json j = json::parse(R"({
    "schema": "bhcontrol.run-config v1",
    "lattice": {"table_samples": 50},
    "system": {"sites": 3, "particles": 3, "local_dim": 4},
    "durations_sim": [1.0],
    "homotopy": [{"dt_sim": 0.1, "max_iterations": 4}, {"dt_sim": 0.05, "max_iterations": 2}],
    "seeds": {"count": 2, "master_seed": 7},
    "output": {"parallelism": 1}
  })");
  j["output"]["directory"] = (kRoot / name).string();
  j["output"]["cache_directory"] = (kRoot / "cache").string();
  return j;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const RunContext& shared_context() {
  static const RunContext ctx = prepare_context(config_from_json(make_config("shared").dump()));
  return ctx;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const RunConfig c = config_from_json(make_config("parse").dump());
  CHECK(c.n_sites == 3);
  CHECK(c.homotopy.size() == 2);
  CHECK(c.homotopy[1].dt_sim == 0.05);
  CHECK(c.seed_count == 2);

  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  json unknown = make_config("x");
  unknown["system"]["site"] = 4;
  try {
    config_from_json(unknown.dump());
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    REQUIRE(e.problems.size() == 1);
    CHECK(e.problems[0].find("system.site") != std::string::npos);
  }

  json many = make_config("x");
  many["states"]["superfluid_depth_er"] = 1.0;
  many["durations_sim"] = {1.03};
  many["homotopy"][1]["dt_sim"] = 0.03;
  many["system"]["local_dim"] = "five";
  try {
    config_from_json(many.dump());
    FAIL("bad config accepted");
  } catch (const ConfigError& e) {
    CHECK(e.problems.size() >= 1);
    CHECK(std::string(e.what()).find("local_dim") != std::string::npos);
  }
  many["system"]["local_dim"] = 4;
  try {
    config_from_json(many.dump());
    FAIL("bad config accepted");
  } catch (const ConfigError& e) {
    CHECK(e.problems.size() == 3);
  }
  CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config(kRoot / "missing.json"), ConfigError);
}

TEST_CASE("job seeds") {
  CHECK(job_seed(7, 3.0, 0) == job_seed(7, 3.0, 0));
  CHECK(job_seed(7, 3.0, 0) != job_seed(7, 3.0, 1));
  CHECK(job_seed(7, 3.0, 0) != job_seed(7, 4.0, 0));
  CHECK(job_seed(7, 3.0, 0) != job_seed(8, 3.0, 0));
  CHECK(splitmix64(0) != 0);
}

TEST_CASE("batch records, summary and determinism") {
  json j = make_config("batch_a");
  j["output"]["parallelism"] = 2;
  fs::remove_all(kRoot / "batch_a");
  const BatchResult a = run_batch(config_from_json(j.dump()));
  REQUIRE(a.jobs.size() == 2);
  CHECK(a.failures == 0);
  CHECK(fs::exists(kRoot / "batch_a" / "summary.json"));
  CHECK(fs::exists(kRoot / "batch_a" / "config.resolved.json"));
  CHECK(read_lines(kRoot / "batch_a" / "results.jsonl").size() == 2);
  for (const auto& job : a.jobs) {
    CHECK(fs::exists(job.record_path));
    CHECK(job.final_fidelity >= job.initial_fidelity - 1e-12);
    CHECK(job.controls.dt == 0.05);
    CHECK(job.controls.within_bounds());
    const auto lines = read_lines(job.record_path);
    CHECK(json::parse(lines.front())["type"] == "job");
    CHECK(json::parse(lines.back())["type"] == "result");
  }
  CHECK(a.best_fidelity.at(1.0) == std::max(a.jobs[0].final_fidelity, a.jobs[1].final_fidelity));

  json k = make_config("batch_b");
  k["output"]["parallelism"] = 1;
  fs::remove_all(kRoot / "batch_b");
  const BatchResult b = run_batch(config_from_json(k.dump()));
  REQUIRE(b.jobs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.jobs[i].rng_seed == b.jobs[i].rng_seed);
    CHECK(std::abs(a.jobs[i].final_cost - b.jobs[i].final_cost) < 1e-12);
  }

  // a crashed job leaves only a partial file, which the summary skips
  std::ofstream(kRoot / "batch_a" / "records" / "T9_seed0.jsonl.partial") << "{\"type\":\"job\"}\n";
  const BatchResult s = summarize_records(kRoot / "batch_a");
  REQUIRE(s.jobs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(s.jobs[i].final_fidelity == a.jobs[i].final_fidelity);
    CHECK(s.jobs[i].controls.values == a.jobs[i].controls.values);
  }
  CHECK(s.best_fidelity == a.best_fidelity);
}

TEST_CASE("job outcome is independent of the rest of the batch") {
  const RunContext& ctx = shared_context();
  const fs::path dir = kRoot / "single";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const JobResult one = run_job(ctx, 1.0, 1, dir);
  const JobResult again = run_job(ctx, 1.0, 1, dir);
  CHECK(one.rng_seed == job_seed(7, 1.0, 1));
  CHECK(one.final_cost == again.final_cost);
  const GradientResult check =
      evaluate_cost(CostConfig{ctx.config.alpha, ctx.config.gamma, ctx.superfluid, ctx.mott, ctx.config.caps}, one.controls);
  CHECK(check.fidelity == doctest::Approx(one.final_fidelity).epsilon(1e-10));
  CHECK(one.t_si == doctest::Approx(si_duration(ctx.table, one.controls.dt, one.controls.values)).epsilon(1e-12));
}

TEST_CASE("figure data") {
  const RunContext& ctx = shared_context();
  const fs::path dir = kRoot / "figs";
  fs::remove_all(dir);
  fs::create_directories(dir / "records");
  const BatchResult empty = summarize_records(dir);
  for (const char* kind : {"f_vs_t", "controls", "occupations", "merit"}) {
    const fs::path p = emit_figure_data(empty, parse_figure_kind(kind), ctx, dir / "out_empty");
    const auto lines = read_lines(p);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == std::string("# schema: bhcontrol.figure.") + kind + " v1");
  }
  CHECK_THROWS_AS(parse_figure_kind("histogram"), std::invalid_argument);

  BatchResult batch;
  batch.jobs.push_back(run_job(ctx, 1.0, 0, dir / "records"));
  JobResult failed;
  failed.duration = 1.0;
  failed.seed_index = 1;
  failed.status = "failed";
  failed.error = "synthetic";
  batch.jobs.push_back(failed);
  batch.best_fidelity[1.0] = batch.jobs[0].final_fidelity;
  const JobResult& job = batch.jobs[0];

  const auto fvt = read_lines(emit_figure_data(batch, FigureKind::f_vs_t, ctx, dir / "out"));
  REQUIRE(fvt.size() == 3);
  CHECK(fvt[1] == "T_sim,seed_index,status,F_initial,F_final,infidelity,T_SI_s");
  std::vector<std::string> cells;
  {
    std::stringstream row(fvt[2]);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
  }
  REQUIRE(cells.size() == 7);
  CHECK(std::stod(cells[6]) == doctest::Approx(si_duration(ctx.table, job.controls.dt, job.controls.values)).epsilon(1e-10));
  CHECK(std::stod(cells[5]) == doctest::Approx(1.0 - job.final_fidelity).epsilon(1e-9));

  const auto ctl = read_lines(emit_figure_data(batch, FigureKind::controls, ctx, dir / "out"));
  CHECK(ctl[1] == "T_sim,seed_index,t_sim,u,v_x_er");
  CHECK(ctl.size() == 2 + job.controls.size());
  {
    std::stringstream row(ctl[2]);
    std::vector<double> v;
    for (std::string c; std::getline(row, c, ',');) v.push_back(std::stod(c));
    REQUIRE(v.size() == 5);
    CHECK(ctx.table.ratio_at(v[4]) == doctest::Approx(v[3]).epsilon(1e-6));
  }

  const auto occ = read_lines(emit_figure_data(batch, FigureKind::occupations, ctx, dir / "out"));
  CHECK(occ[1] == "T_sim,seed_index,t_sim,n_1,n_2,n_3");
  CHECK(occ.size() == 2 + job.controls.size());
  const auto merit = read_lines(emit_figure_data(batch, FigureKind::merit, ctx, dir / "out"));
  CHECK(merit[1] == "T_sim,seed_index,t_sim,F,rho,eta");
  CHECK(merit.size() == 2 + job.controls.size());
}

#ifdef BHC_CLI_PATH
TEST_CASE("command line exit codes") {
  const std::string cli = BHC_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(run("--help") == 0);
  CHECK(run("no-such-command") == 2);
  const fs::path bad = kRoot / "bad.json";
  std::ofstream(bad) << R"({"schema": "bhcontrol.run-config v1", "bogus": 1})";
  CHECK(run("optimize -c " + bad.string() + " --duration 1") == 2);

  const fs::path good = kRoot / "cli.json";
  std::ofstream(good) << make_config("cli").dump();
  fs::remove_all(kRoot / "cli");
  CHECK(run("lattice-table -c " + good.string() + " --out " + (kRoot / "table.txt").string()) == 0);
  CHECK(fs::exists(kRoot / "table.txt"));
  CHECK(run("optimize -c " + good.string() + " --duration 1.03") == 2);
  CHECK(run("optimize -c " + good.string() + " --duration 1 --seed-index 0") == 0);
  CHECK(run("emit " + (kRoot / "cli").string() + " --kind f_vs_t --out " + (kRoot / "cli" / "figs").string()) == 0);
  CHECK(fs::exists(kRoot / "cli" / "figs" / "f_vs_t.csv"));
}
#endif
