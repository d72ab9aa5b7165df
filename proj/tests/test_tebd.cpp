#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bhc/fock.hpp"
#include "bhc/tebd.hpp"
#include "support.hpp"

using namespace bhc;

TEST_CASE("gate set") {
  const GateSet g = GateSet::real_time(0.05, 5);
  const Eigen::MatrixXcd& h = g.hop_gate();
  CHECK((h.adjoint() * h - Eigen::MatrixXcd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((h - oracle::expm(bond_hopping(5), 0.05)).cwiseAbs().maxCoeff() < 1e-13);
  for (cplx p : g.one_site_phase(0.0)) CHECK(p == cplx(1.0));
  const auto p = g.one_site_phase(3.0);
  for (int n = 0; n < 5; ++n) CHECK(std::abs(p[n] - std::polar(1.0, -3.0 * n * (n - 1) * 0.05 / 4)) < 1e-15);
}

TEST_CASE("one step against the dense even/odd oracle") {
  std::mt19937_64 rng(14);
  for (int n : {2, 3, 4}) {
    auto basis = oracle::make_basis(n, n);
    const int d = 5;
    const auto ref = oracle::sector_operators(*basis);
    const DenseState psi = oracle::random_state(basis, rng);
    const GateSet gates = GateSet::real_time(0.1, d);
    Mps m = Mps::from_dense(psi, d, TruncationCaps::unlimited());
    step(m, 2.5, 17.0, gates);
    CHECK(m.gauge_position() == 0);
    const Eigen::VectorXcd expect = oracle::split_step(ref, 0.1, 2.5, 17.0, true) * psi.amplitudes;
    CHECK(oracle::deficit(m.to_dense(basis).amplitudes, expect) < 1e-10);
    CHECK((m.to_dense(basis).amplitudes - expect).norm() < 1e-10);

    step_adjoint(m, 2.5, 17.0, gates);
    CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-10);

    Mps a = Mps::from_dense(psi, d, TruncationCaps::unlimited());
    step_adjoint(a, 2.5, 17.0, gates);
    const Eigen::VectorXcd back = oracle::split_step(ref, 0.1, 2.5, 17.0, true).adjoint() * psi.amplitudes;
    CHECK((a.to_dense(basis).amplitudes - back).norm() < 1e-10);
  }
}

TEST_CASE("zero time step is the identity") {
  std::mt19937_64 rng(15);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  const GateSet gates = GateSet::real_time(0.0, 5);
  Mps m = Mps::from_dense(psi, 5, TruncationCaps::unlimited());
  step(m, 3.0, 7.0, gates);
  CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-14);
  step_adjoint(m, 3.0, 7.0, gates);
  CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-14);
}

TEST_CASE("round trip keeps fidelity") {
  std::mt19937_64 rng(16);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  const Mps start = Mps::from_dense(psi, 5, TruncationCaps::unlimited());
  const GateSet gates = GateSet::real_time(0.025, 5);
  Mps m = start;
  const auto u = oracle::random_controls(11, rng);
  for (int k = 0; k < 10; ++k) step(m, u[k], u[k + 1], gates);
  for (int k = 9; k >= 0; --k) step_adjoint(m, u[k], u[k + 1], gates);
  CHECK(1.0 - std::norm(overlap(start, m)) < 1e-9);
}

TEST_CASE("deep lattice phase on the Mott product state") {
  auto basis = oracle::make_basis(4, 4);
  const std::vector<int> ones{1, 1, 1, 1};
  const double u = 40.0;
  const auto ref = oracle::sector_operators(*basis);
  const double hop_norm = (ref.drift).norm();
  for (double dt : {0.02, 0.01}) {
    Mps m = Mps::product_state(ones, 5, TruncationCaps::unlimited());
    step(m, u, u, GateSet::real_time(dt, 5));
    const cplx amp = m.to_dense(basis).amplitudes(*basis->index_of(ones));
    // the interaction energy of |1111> is zero: the pure phase is 1
    CHECK(std::abs(amp - 1.0) < dt * dt * hop_norm * hop_norm);
  }
}

TEST_CASE("propagate records and constraints") {
  auto basis = oracle::make_basis(4, 4);
  const std::vector<int> occ{2, 0, 1, 1};
  const Mps start = Mps::product_state(occ, 5, TruncationCaps::unlimited());
  const GateSet gates = GateSet::real_time(0.05, 5);

  const ControlGrid two = ControlGrid::linear(3.0, 8.0, 0.05, 2);
  const Trajectory t2 = propagate(start, two, gates);
  Mps one = start;
  step(one, 3.0, 8.0, gates);
  CHECK((t2.final_state.to_dense(basis).amplitudes - one.to_dense(basis).amplitudes).norm() < 1e-14);
  CHECK(t2.records.size() == 2);

  std::ostringstream log;
  PropagateOptions opt;
  opt.target = &start;
  opt.record_occupations = true;
  opt.jsonl = &log;
  const ControlGrid ramp = ControlGrid::linear(1.32, 40.18, 0.05, 21);
  const Trajectory t = propagate(start, ramp, gates, opt);
  REQUIRE(t.records.size() == 21);
  CHECK(*t.records.front().fidelity == doctest::Approx(1.0));
  CHECK(t.records.back().time == doctest::Approx(1.0));
  for (const auto& r : t.records) {
    double total = 0.0;
    for (double n : r.occupations) total += n;
    CHECK(total == doctest::Approx(4.0).epsilon(1e-12));
  }
  std::size_t lines = 0;
  for (char c : log.str()) lines += c == '\n';
  CHECK(lines == 21);

  CHECK_THROWS_AS(propagate(start, ramp, GateSet::real_time(0.1, 5)), std::invalid_argument);
}

TEST_CASE("linear ramp against the dense oracle with a bond cap") {
  std::mt19937_64 rng(17);
  auto basis = oracle::make_basis(4, 4);
  const GroundState sf = ground_state(basis, 2.0);
  const ControlGrid ramp = ControlGrid::linear(1.32, 40.18, 0.025, 201);
  const Mps start = Mps::from_dense(sf.state, 5, {64, 1e-12});
  const Trajectory t = propagate(start, ramp, GateSet::real_time(0.025, 5));
  const DenseState dense = evolve_trotter_dense(sf.state, ramp, DriftSplit::even_odd);
  CHECK(oracle::deficit(t.final_state.to_dense(basis).amplitudes, dense.amplitudes) < 1e-8);
  CHECK(t.final_state.max_bond_dimension() <= 64);
}

TEST_CASE("first-order convergence in the time step") {
  // value-copied refinement of a fixed control; successive state changes shrink like dt
  auto basis = oracle::make_basis(4, 4);
  const GroundState sf = ground_state(basis, 2.0);
  const Mps start = Mps::from_dense(sf.state, 5, TruncationCaps::unlimited());
  auto final_state = [&](const ControlGrid& g) {
    return propagate(start, g, GateSet::real_time(g.dt, 5)).final_state.to_dense(basis).amplitudes;
  };
  ControlGrid g = ControlGrid::linear(2.0, 35.0, 0.2, 21);
  std::vector<Eigen::VectorXcd> s;
  for (int k = 0; k < 4; ++k) {
    s.push_back(final_state(g));
    g = refine_control(g);
  }
  const double d1 = (s[1] - s[0]).norm(), d2 = (s[2] - s[1]).norm(), d3 = (s[3] - s[2]).norm();
  CHECK(d1 / d2 > 1.5);
  CHECK(d2 / d3 > 1.5);
  CHECK(d2 / d3 < 5.0);
}

TEST_CASE("imaginary-time ground states") {
  auto basis = oracle::make_basis(4, 4);
  const std::vector<int> seed{1, 1, 1, 1};
  for (double u : {1.9456, 40.0}) {
    const GroundState exact = ground_state(basis, u);
    const ImaginaryTimeResult r = ground_state_imaginary(seed, u, 5);
    CHECK(std::norm(inner(exact.state, r.state.to_dense(basis))) > 0.9999);
    CHECK(std::abs(r.energy / exact.energy - 1.0) < 1e-6);
    CHECK(std::abs(energy(r.state, u) - r.energy) < 1e-12 * std::abs(r.energy) + 1e-14);
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k] <= r.energy_trace[k - 1] + 1e-9);
  }
  // at u -> infinity |1111> is already the ground state
  const ImaginaryTimeResult fixed = ground_state_imaginary(seed, 1e9, 5);
  CHECK(fixed.sweeps <= 2);
  CHECK(std::norm(overlap(fixed.state, Mps::product_state(seed, 5))) > 1.0 - 1e-12);
}

TEST_CASE("imaginary-time convergence failure carries the trace") {
  const std::vector<int> seed{1, 1, 1, 1};
  ImaginaryTimeOptions opt;
  opt.max_sweeps_per_stage = 3;
  opt.tolerance = 1e-16;
  try {
    ground_state_imaginary(seed, 2.0, 5, opt);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(!e.energy_trace.empty());
  }
}
