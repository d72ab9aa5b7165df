#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bhc/fock.hpp"
#include "support.hpp"

using namespace bhc;

TEST_CASE("basis dimension") {
  CHECK(basis_dimension(2, 2, 2) == 3);
  CHECK(basis_dimension(3, 3, 2) == 7);
  CHECK(basis_dimension(20, 20, 20) == 68'923'264'410ULL);
  for (int ns = 1; ns <= 5; ++ns)
    for (int np = 1; np <= 5; ++np)
      for (int m = 1; m <= 4; ++m)
        CHECK(basis_dimension(ns, np, m) == oracle::enumerate_states(ns, np, m).size());
  CHECK_THROWS_AS(basis_dimension(200, 200, 200), std::overflow_error);
}

TEST_CASE("basis ordering and index") {
  const FockBasis b(4, 4, 4);
  const auto expected = oracle::enumerate_states(4, 4, 4);
  REQUIRE(b.size() == expected.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto s = b.state(k);
    CHECK(std::vector<int>(s.begin(), s.end()) == expected[k]);
    CHECK(*b.index_of(s) == k);
  }
  const std::vector<int> too_many{5, 0, 0, 0};
  CHECK_FALSE(b.index_of(too_many).has_value());
}

TEST_CASE("two-site Hamiltonian by hand") {
  const FockBasis b(2, 2, 2);
  const double u = 1.7, r2 = std::sqrt(2.0);
  Eigen::MatrixXd expected(3, 3);
  expected << u, -r2, 0, -r2, 0, -r2, 0, -r2, u;
  const Eigen::MatrixXd h = build_hamiltonian(b, u);
  CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Hamiltonian matches ladder-operator oracle") {
  for (auto [ns, np] : {std::pair{3, 3}, std::pair{4, 4}, std::pair{4, 3}}) {
    auto basis = oracle::make_basis(ns, np);
    const auto ops = build_operators(basis);
    const auto ref = oracle::sector_operators(*basis);
    CHECK((Eigen::MatrixXd(ops.drift) - ref.drift).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Eigen::MatrixXd(ops.drift_odd) - ref.drift_odd).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Eigen::MatrixXd(ops.drift_even) - ref.drift_even).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Eigen::VectorXd(ref.interaction.diagonal()) - ops.interaction).cwiseAbs().maxCoeff() < 1e-14);
    const Eigen::MatrixXd h0 = build_hamiltonian(*basis, 0.0);
    CHECK(h0.diagonal().cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd h = build_hamiltonian(*basis, 3.3);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ground state of two bosons on two sites") {
  auto basis = std::make_shared<const FockBasis>(2, 2, 2);
  const GroundState gs = ground_state(basis, 0.0);
  CHECK(gs.energy == doctest::Approx(-2.0).epsilon(1e-13));
  CHECK(std::abs(gs.state.amplitudes(0) - 0.5) < 1e-12);
  CHECK(std::abs(gs.state.amplitudes(1) - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(gs.state.amplitudes(2) - 0.5) < 1e-12);
}

TEST_CASE("Mott limit and energy monotonicity") {
  auto basis = oracle::make_basis(4, 4);
  const std::vector<int> ones{1, 1, 1, 1};
  const DenseState mott = DenseState::basis_state(basis, ones);
  CHECK(std::norm(inner(mott, ground_state(basis, 40.0).state)) > 0.99);
  std::vector<double> e;
  for (double u = 0.0; u <= 40.0; u += 2.0) e.push_back(ground_state(basis, u).energy);
  for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k] >= e[k - 1] - 1e-12);
  for (std::size_t k = 1; k + 1 < e.size(); ++k) CHECK(e[k + 1] - 2 * e[k] + e[k - 1] <= 1e-10);
}

TEST_CASE("Lanczos path agrees with the dense eigensolver") {
  // 8 sites, 8 bosons, n_max 4 exceeds the dense limit.
  auto basis = std::make_shared<const FockBasis>(8, 8, 4);
  REQUIRE(basis->size() > kDenseLimit);
  const GroundState gs = ground_state(basis, 5.0);
  const Eigen::VectorXd residual =
      (build_hamiltonian(*basis, 5.0) * gs.state.amplitudes.real()) - gs.energy * gs.state.amplitudes.real();
  CHECK(residual.norm() < 1e-8);
  CHECK(gs.state.amplitudes.imag().norm() < 1e-12);
}

TEST_CASE("exact evolution") {
  std::mt19937_64 rng(3);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  const double u = 6.5, t = 0.8;
  CHECK((evolve_exact(psi, u, 0.0).amplitudes - psi.amplitudes).norm() < 1e-13);
  const DenseState once = evolve_exact(psi, u, t);
  const DenseState twice = evolve_exact(evolve_exact(psi, u, t / 2), u, t / 2);
  CHECK((once.amplitudes - twice.amplitudes).norm() < 1e-10);

  const auto ref = oracle::sector_operators(*basis);
  const Eigen::VectorXcd direct = oracle::expm(ref.drift + u * ref.interaction, t) * psi.amplitudes;
  CHECK((once.amplitudes - direct).norm() < 1e-8);

  const ExactPropagator kry(basis, u, ExactPropagator::Method::krylov);
  CHECK((kry.evolve(psi, t).amplitudes - direct).norm() < 1e-8);
}

TEST_CASE("split-step propagation against the matrix exponential oracle") {
  std::mt19937_64 rng(5);
  auto basis = oracle::make_basis(4, 4);
  const auto ref = oracle::sector_operators(*basis);
  const DenseState psi = oracle::random_state(basis, rng);
  const double dt = 0.07;
  for (bool even_odd : {false, true}) {
    const DenseStPropagator p(basis, dt, even_odd ? DriftSplit::even_odd : DriftSplit::exact);
    const Eigen::MatrixXcd m = p.step_matrix(2.0, 9.0);
    CHECK((m - oracle::split_step(ref, dt, 2.0, 9.0, even_odd)).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXcd v = psi.amplitudes;
    p.step(v, 2.0, 9.0);
    CHECK((v - m * psi.amplitudes).norm() < 1e-12);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    p.step_adjoint(v, 2.0, 9.0);
    CHECK((v - psi.amplitudes).norm() < 1e-12);
  }
}

TEST_CASE("Trotter limit at constant control") {
  std::mt19937_64 rng(9);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  const double u = 4.0, total = 1.0;
  const DenseState exact = evolve_exact(psi, u, total);
  std::vector<double> err;
  for (int n : {10, 20, 40}) {
    const ControlGrid g = ControlGrid::constant(u, total / n, n + 1);
    const DenseState s = evolve_trotter_dense(psi, g, DriftSplit::exact);
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
    err.push_back((s.amplitudes - exact.amplitudes).norm());
  }
  // symmetric splitting: global error O(dt^2)
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.1));

  // single step: splitting error bounded by dt^3 times the commutator size
  const auto ref = oracle::sector_operators(*basis);
  const Eigen::MatrixXd hc = u * ref.interaction, hd = ref.drift;
  const double comm = (hc * hd - hd * hc).norm();
  for (double dt : {0.1, 0.05, 0.025}) {
    const DenseStPropagator p(basis, dt, DriftSplit::exact);
    const Eigen::MatrixXcd e = p.step_matrix(u, u) - oracle::expm(hc + hd, dt);
    CHECK(e.norm() < dt * dt * dt * comm * comm);
    CHECK(e.norm() > 0.0);
  }
}

TEST_CASE("finite differences") {
  const std::vector<double> u{1.5, 3.0, 20.0, 7.0};
  const double alpha = 0.3, dt = 0.1;
  const CostFunction quad = [&](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += 0.5 * alpha * v * v * dt;
    return s;
  };
  const auto g = finite_difference_gradient(quad, u, 1e-4);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(g[k] == doctest::Approx(alpha * u[k] * dt).epsilon(1e-8));

  const CostFunction cubic = [](std::span<const double> x) { return std::sin(x[0]) * x[0] * x[0]; };
  const std::vector<double> x0{1.3};
  const double exact = std::cos(1.3) * 1.69 + 2 * 1.3 * std::sin(1.3);
  const double e1 = std::abs(finite_difference_gradient(cubic, x0, 1e-3)[0] - exact);
  const double e2 = std::abs(finite_difference_gradient(cubic, x0, 5e-4)[0] - exact);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));

  CHECK_THROWS_AS(finite_difference_gradient(quad, u, 1.0), std::invalid_argument);
  const CostFunction nan_cost = [](std::span<const double> x) { return x[1] > 3.0 ? std::nan("") : 0.0; };
  CHECK_THROWS_WITH_AS(finite_difference_gradient(nan_cost, u, 1e-4), doctest::Contains("1"), std::runtime_error);
}

TEST_CASE("state export") {
  auto basis = std::make_shared<const FockBasis>(2, 2, 2);
  std::ostringstream os;
  write_state(os, ground_state(basis, 0.0).state);
  const std::string s = os.str();
  CHECK(s.find("schema") != std::string::npos);
  CHECK(s.find("1 1 1 ") != std::string::npos);
}
