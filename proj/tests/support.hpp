#pragma once

// Independent reference implementations for the tests. Nothing here calls
// into the library's Hamiltonian, propagators or contractions.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "bhc/fock.hpp"
#include "bhc/mps.hpp"

namespace oracle {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

inline MatrixXd annihilator(int d) {
  MatrixXd a = MatrixXd::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// op acting on `site` of an n-site chain, as a d^n x d^n matrix. Site 0 is
// the most significant digit of the product index.
inline MatrixXd embed(const MatrixXd& op, int site, int n_sites) {
  const int d = static_cast<int>(op.rows());
  MatrixXd out = MatrixXd::Identity(1, 1);
  for (int i = 0; i < n_sites; ++i) {
    const MatrixXd f = i == site ? op : MatrixXd::Identity(d, d);
    out = Eigen::kroneckerProduct(out, f).eval();
  }
  return out;
}

inline std::vector<int> digits(long long index, int n_sites, int d) {
  std::vector<int> occ(n_sites);
  for (int i = n_sites - 1; i >= 0; --i) {
    occ[i] = static_cast<int>(index % d);
    index /= d;
  }
  return occ;
}

// All occupation vectors with fixed particle number, by brute force over the
// product space, sorted lexicographically descending.
inline std::vector<std::vector<int>> enumerate_states(int n_sites, int n_particles, int max_occ) {
  std::vector<std::vector<int>> out;
  long long total = 1;
  for (int i = 0; i < n_sites; ++i) total *= max_occ + 1;
  for (long long k = 0; k < total; ++k) {
    auto occ = digits(k, n_sites, max_occ + 1);
    int s = 0;
    for (int n : occ) s += n;
    if (s == n_particles) out.push_back(occ);
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

// Rows of the product space belonging to the fixed-N sector, in basis order.
inline std::vector<long long> sector_rows(const bhc::FockBasis& basis) {
  const int d = basis.max_occupation() + 1;
  std::vector<long long> rows;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    long long idx = 0;
    for (int n : basis.state(k)) idx = idx * d + n;
    rows.push_back(idx);
  }
  return rows;
}

struct Operators {
  MatrixXd drift, drift_odd, drift_even, interaction;
};

// H pieces from ladder algebra in the product space, then projected.
inline Operators sector_operators(const bhc::FockBasis& basis) {
  const int n = basis.n_sites();
  const int d = basis.max_occupation() + 1;
  const MatrixXd a = annihilator(d);
  const MatrixXd num = a.transpose() * a;
  const long long full = static_cast<long long>(std::pow(d, n));
  MatrixXd odd = MatrixXd::Zero(full, full), even = odd, inter = odd;
  for (int i = 0; i + 1 < n; ++i) {
    const MatrixXd ai = embed(a, i, n), aj = embed(a, i + 1, n);
    const MatrixXd hop = -(aj.transpose() * ai + ai.transpose() * aj);
    (i % 2 == 0 ? odd : even) += hop;
  }
  for (int i = 0; i < n; ++i) {
    const MatrixXd ni = embed(num, i, n);
    inter += 0.5 * ni * (ni - MatrixXd::Identity(full, full));
  }
  const auto rows = sector_rows(basis);
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  auto project = [&](const MatrixXd& f) {
    MatrixXd p(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) p(r, c) = f(rows[r], rows[c]);
    return p;
  };
  Operators ops;
  ops.drift_odd = project(odd);
  ops.drift_even = project(even);
  ops.drift = ops.drift_odd + ops.drift_even;
  ops.interaction = project(inter);
  return ops;
}

inline MatrixXcd expm(const MatrixXd& h, double t) {
  const MatrixXcd a = cplx(0.0, -t) * h.cast<cplx>();
  return a.exp();
}

// One split step C(u1) exp(-i H_even dt) exp(-i H_odd dt) C(u0), or with the
// exact drift exponential.
inline MatrixXcd split_step(const Operators& ops, double dt, double u0, double u1, bool even_odd) {
  const MatrixXcd c0 = expm(u0 * ops.interaction, dt / 2.0);
  const MatrixXcd c1 = expm(u1 * ops.interaction, dt / 2.0);
  const MatrixXcd drift = even_odd ? MatrixXcd(expm(ops.drift_even, dt) * expm(ops.drift_odd, dt))
                                   : expm(ops.drift, dt);
  return c1 * drift * c0;
}

inline VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorXcd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = cplx(g(rng), g(rng));
  return v / v.norm();
}

inline bhc::DenseState random_state(std::shared_ptr<const bhc::FockBasis> basis, std::mt19937_64& rng) {
  return {basis, random_vector(static_cast<Eigen::Index>(basis->size()), rng)};
}

inline std::shared_ptr<const bhc::FockBasis> make_basis(int n_sites, int n_particles, int local_dim = 5) {
  return std::make_shared<const bhc::FockBasis>(n_sites, n_particles,
                                                bhc::default_max_occupation(n_particles, local_dim));
}

inline bhc::Mps random_mps(std::shared_ptr<const bhc::FockBasis> basis, std::mt19937_64& rng, int local_dim = 5) {
  return bhc::Mps::from_dense(random_state(basis, rng), local_dim, bhc::TruncationCaps::unlimited());
}

// Control values drawn uniformly inside the bounds.
inline std::vector<double> random_controls(std::size_t n, std::mt19937_64& rng, double lo = 1.32, double hi = 40.18) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  std::vector<double> v(n);
  for (auto& x : v) x = std::exp(u(rng));
  return v;
}

inline double deficit(const VectorXcd& a, const VectorXcd& b) {
  return 1.0 - std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

}  // namespace oracle
