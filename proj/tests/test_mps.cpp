#include <doctest.h>

#include <random>
#include <sstream>

#include "bhc/mps.hpp"
#include "bhc/tebd.hpp"
#include "support.hpp"

using namespace bhc;

namespace {

const std::vector<int> kOnes{1, 1, 1, 1};

Eigen::VectorXcd site_operator_dense(const FockBasis& b, const Eigen::VectorXcd& psi, int site,
                                     const Eigen::MatrixXcd& op) {
  // applies a one-site operator in the fixed-N basis (op must conserve n)
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    auto s = b.state(k);
    std::vector<int> occ(s.begin(), s.end());
    const int n = occ[site];
    for (int m = 0; m < op.rows(); ++m) {
      if (op(m, n) == 0.0) continue;
      occ[site] = m;
      if (auto idx = b.index_of(occ)) out(*idx) += op(m, n) * psi(k);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("product states") {
  auto basis = oracle::make_basis(4, 4);
  const Mps a = Mps::product_state(kOnes, 5);
  CHECK(std::abs(overlap(a, a) - 1.0) < 1e-15);
  const DenseState d = a.to_dense(basis);
  CHECK(std::abs(d.amplitudes(*basis->index_of(kOnes)) - 1.0) < 1e-15);
  CHECK(d.amplitudes.norm() == doctest::Approx(1.0));
  const std::vector<int> other{2, 0, 1, 1};
  CHECK(std::abs(overlap(a, Mps::product_state(other, 5))) == 0.0);
  for (const cplx n : local_expectations(a, number_operator(5))) CHECK(std::abs(n - 1.0) < 1e-15);
  CHECK(a.max_bond_dimension() == 1);
}

TEST_CASE("dense round trip and canonical form") {
  std::mt19937_64 rng(21);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  Mps m = Mps::from_dense(psi, 5, TruncationCaps::unlimited());
  CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(m.gauge_position() == 0);
  CHECK(m.canonical_error() < 1e-10);
  const auto bonds = m.bond_dimensions();
  CHECK(m.left_bond(0) == 1);
  CHECK(m.right_bond(3) == 1);
  for (int g : {3, 1, 2, 0}) {
    m.move_center(g);
    CHECK(m.gauge_position() == g);
    CHECK(m.canonical_error() < 1e-10);
    CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-12);
  }
}

TEST_CASE("Schmidt rank of a two-component superposition") {
  auto basis = oracle::make_basis(4, 4);
  const std::vector<int> x{4, 0, 0, 0}, y{0, 0, 0, 4};
  DenseState ghz{basis, Eigen::VectorXcd::Zero(basis->size())};
  ghz.amplitudes(*basis->index_of(x)) = 1.0 / std::sqrt(2.0);
  ghz.amplitudes(*basis->index_of(y)) = 1.0 / std::sqrt(2.0);
  const Mps m = Mps::from_dense(ghz, 5, TruncationCaps::unlimited());
  for (int b : m.bond_dimensions()) CHECK(b == 2);
}

TEST_CASE("bond cap truncates an entangled state") {
  std::mt19937_64 rng(2);
  auto basis = oracle::make_basis(4, 4);
  const Mps m = Mps::from_dense(oracle::random_state(basis, rng), 5, {1, 1e-12});
  CHECK(m.log_truncation() > 0.0);
  CHECK(m.max_bond_dimension() == 1);
}

TEST_CASE("overlaps and expectations against dense contractions") {
  std::mt19937_64 rng(4);
  auto basis = oracle::make_basis(4, 4);
  const Eigen::MatrixXcd n = number_operator(5);
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(5, 5);  // diagonal, n-conserving
  for (int k = 0; k < 5; ++k) op(k, k) = cplx(0.3 * k * k, -0.1 * k);
  for (int trial = 0; trial < 5; ++trial) {
    const DenseState a = oracle::random_state(basis, rng), b = oracle::random_state(basis, rng);
    Mps ma = Mps::from_dense(a, 5, TruncationCaps::unlimited());
    Mps mb = Mps::from_dense(b, 5, TruncationCaps::unlimited());
    const cplx ov = a.amplitudes.dot(b.amplitudes);
    CHECK(std::abs(overlap(ma, mb) - ov) < 1e-10);
    CHECK(std::abs(overlap(ma, ma) - 1.0) < 1e-12);
    mb.move_center(2);
    CHECK(std::abs(std::abs(overlap(ma, mb)) - std::abs(ov)) < 1e-12);
    const auto cross = cross_matrix_elements(ma, mb, op);
    const auto local = local_expectations(ma, n);
    for (int i = 0; i < 4; ++i) {
      const cplx ref = a.amplitudes.dot(site_operator_dense(*basis, b.amplitudes, i, op));
      CHECK(std::abs(cross[i] - ref) < 1e-10);
      CHECK(std::abs(cross_matrix_element(ma, mb, i, op) - ref) < 1e-10);
      const cplx nref = a.amplitudes.dot(site_operator_dense(*basis, a.amplitudes, i, n));
      CHECK(std::abs(local[i] - nref) < 1e-10);
      CHECK(std::abs(local_expectation(ma, i, n) - nref) < 1e-10);
      CHECK(std::abs(local_expectation(ma, i, Eigen::MatrixXcd::Identity(5, 5)) - 1.0) < 1e-12);
      CHECK(std::abs(cross_matrix_element(ma, ma, i, n) - local[i]) < 1e-12);
      CHECK(std::abs(cross_matrix_element(ma, mb, i, Eigen::MatrixXcd::Identity(5, 5)) - ov) < 1e-10);
    }
    std::vector<double> w{0.0, 0.0, 1.0, 3.0, 6.0};
    cplx sum_ref = 0.0;
    const Eigen::MatrixXcd wd = Eigen::VectorXcd(Eigen::Map<Eigen::VectorXd>(w.data(), 5).cast<cplx>()).asDiagonal();
    for (int i = 0; i < 4; ++i) sum_ref += a.amplitudes.dot(site_operator_dense(*basis, b.amplitudes, i, wd));
    CHECK(std::abs(cross_diagonal_sum(ma, mb, w) - sum_ref) < 1e-10);
  }
}

TEST_CASE("two-site gates") {
  std::mt19937_64 rng(8);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  const Mps start = Mps::from_dense(psi, 5, TruncationCaps::unlimited());

  Mps id = start;
  id.apply_two_site_gate(0, Eigen::MatrixXcd::Identity(25, 25), GaugeDirection::right);
  CHECK((id.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-12);

  const Eigen::MatrixXcd hop = oracle::expm(bond_hopping(5), 0.3);
  Mps g = start;
  g.apply_two_site_gate(0, hop, GaugeDirection::right);
  CHECK(g.gauge_position() == 1);
  CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-12));
  g.apply_two_site_gate(1, hop, GaugeDirection::right);
  g.apply_two_site_gate(2, hop, GaugeDirection::left);
  CHECK(g.gauge_position() == 2);
  CHECK(g.canonical_error() < 1e-10);
  Eigen::MatrixXd bond[3];
  for (int b = 0; b < 3; ++b) {
    const int d = 5;
    const auto a = oracle::annihilator(d);
    const Eigen::MatrixXd ai = oracle::embed(a, b, 4), aj = oracle::embed(a, b + 1, 4);
    const Eigen::MatrixXd full = -(aj.transpose() * ai + ai.transpose() * aj);
    const auto rows = oracle::sector_rows(*basis);
    bond[b].resize(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows.size(); ++c) bond[b](r, c) = full(rows[r], rows[c]);
  }
  const Eigen::VectorXcd expect =
      oracle::expm(bond[2], 0.3) * (oracle::expm(bond[1], 0.3) * (oracle::expm(bond[0], 0.3) * psi.amplitudes));
  CHECK(oracle::deficit(g.to_dense(basis).amplitudes, expect) < 1e-10);
  CHECK((g.to_dense(basis).amplitudes - expect).norm() < 1e-10);
}

TEST_CASE("one-site diagonals") {
  std::mt19937_64 rng(1);
  auto basis = oracle::make_basis(4, 4);
  const DenseState psi = oracle::random_state(basis, rng);
  Mps m = Mps::from_dense(psi, 5, TruncationCaps::unlimited());
  const std::vector<cplx> ones(5, 1.0);
  m.apply_one_site_diagonal(2, ones);
  CHECK((m.to_dense(basis).amplitudes - psi.amplitudes).norm() < 1e-15);

  std::vector<cplx> p1(5), p2(5);
  for (int k = 0; k < 5; ++k) {
    p1[k] = std::polar(1.0, 0.3 * k);
    p2[k] = std::polar(1.0 + 0.1 * k, -0.7 * k * k);
  }
  Mps x = m, y = m;
  x.apply_one_site_diagonal(1, p1);
  x.apply_one_site_diagonal(3, p2);
  x.apply_one_site_diagonal(1, p2);
  y.apply_one_site_diagonal(1, p2);
  y.apply_one_site_diagonal(1, p1);
  y.apply_one_site_diagonal(3, p2);
  CHECK((x.to_dense(basis).amplitudes - y.to_dense(basis).amplitudes).cwiseAbs().maxCoeff() < 1e-15);

  const double u = 40.18, dt = 0.025;
  const std::vector<int> occ{2, 0, 1, 1};
  Mps f = Mps::product_state(occ, 5);
  const GateSet gates = GateSet::real_time(dt, 5);
  for (int i = 0; i < 4; ++i) f.apply_one_site_diagonal(i, gates.one_site_phase(u));
  const cplx amp = f.to_dense(basis).amplitudes(*basis->index_of(occ));
  // C(u) alone: exp(-i u dt/4 sum n(n-1)) with sum n(n-1) = 2
  CHECK(std::abs(amp - std::polar(1.0, -u * dt * 2.0 / 4.0)) < 1e-14);
}

TEST_CASE("truncated SVD") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(6, 5);
  std::normal_distribution<double> g;
  // two blocks: rows {0,2,4} x cols {1,3}, rows {1,3,5} x cols {0,2,4}
  for (int r : {0, 2, 4})
    for (int c : {1, 3}) m(r, c) = cplx(g(rng), g(rng));
  for (int r : {1, 3, 5})
    for (int c : {0, 2, 4}) m(r, c) = cplx(g(rng), g(rng));
  CHECK(nonzero_blocks(m).size() == 2);
  const TruncatedSvd full = truncated_svd(m, TruncationCaps::unlimited());
  const Eigen::JacobiSVD<Eigen::MatrixXcd> ref(m);
  REQUIRE(full.s.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(full.s(k) * full.norm == doctest::Approx(ref.singularValues()(k)).epsilon(1e-12));
  CHECK((full.u * (full.s * full.norm).asDiagonal() * full.vh - m).norm() < 1e-12);
  CHECK(full.discarded < 1e-15);
  for (int k = 0; k < full.u.cols(); ++k) {
    Eigen::Index first = 0;
    while (std::abs(full.u(first, k)) < 1e-14) ++first;
    CHECK(full.u(first, k).real() > 0.0);
    CHECK(std::abs(full.u(first, k).imag()) < 1e-14);
  }
  const TruncatedSvd cut = truncated_svd(m, {2, 0.0});
  CHECK(cut.s.size() == 2);
  CHECK(cut.s.norm() == doctest::Approx(1.0).epsilon(1e-14));
  const double lost = ref.singularValues().tail(3).squaredNorm() / m.squaredNorm();
  CHECK(cut.discarded == doctest::Approx(lost).epsilon(1e-10));
}

TEST_CASE("snapshot round trip") {
  std::mt19937_64 rng(12);
  auto basis = oracle::make_basis(4, 4);
  Mps m = Mps::from_dense(oracle::random_state(basis, rng), 5, {64, 1e-12});
  m.move_center(2);
  std::stringstream ss;
  write_snapshot(ss, m);
  CHECK(ss.str().rfind("# schema: bhcontrol.mps v1", 0) == 0);
  const Mps back = read_snapshot(ss);
  CHECK(back.gauge_position() == 2);
  CHECK(back.caps().max_bond == 64);
  CHECK((back.to_dense(basis).amplitudes - m.to_dense(basis).amplitudes).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream bad("# schema: something else\n");
  CHECK_THROWS(read_snapshot(bad));
}
