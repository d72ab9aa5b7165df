#include "bhc/fock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bhc/kernels.hpp"

namespace bhc {

std::uint64_t basis_dimension(int n_sites, int n_particles, int max_occupation) {
  if (n_sites < 1 || n_particles < 1 || max_occupation < 1)
    throw std::invalid_argument("basis_dimension: all counts must be at least 1");
  // ways[n] = number of ways to place n particles on the sites seen so far.
  std::vector<unsigned __int128> ways(n_particles + 1, 0);
  ways[0] = 1;
  const unsigned __int128 limit = std::numeric_limits<std::uint64_t>::max();
  for (int s = 0; s < n_sites; ++s) {
    std::vector<unsigned __int128> next(n_particles + 1, 0);
    for (int n = 0; n <= n_particles; ++n) {
      if (ways[n] == 0) continue;
      for (int k = 0; k <= max_occupation && n + k <= n_particles; ++k) {
        next[n + k] += ways[n];
        if (next[n + k] > limit) {
          throw std::overflow_error(
              "Hilbert-space dimension exceeds 64 bits; use the closed binomial formula "
              "(N_s + N_p - 1)! / (N_p! (N_s - 1)!) instead of enumeration");
        }
      }
    }
    ways = std::move(next);
  }
  return static_cast<std::uint64_t>(ways[n_particles]);
}

int default_max_occupation(int n_particles, int local_dim) {
  return std::min(n_particles, local_dim - 1);
}

FockBasis::FockBasis(int n_sites, int n_particles, int max_occupation)
    : n_sites_(n_sites), n_particles_(n_particles), max_occupation_(max_occupation) {
  if (n_sites < 1 || n_particles < 1 || max_occupation < 1)
    throw std::invalid_argument("FockBasis: all counts must be at least 1");
  if (static_cast<long long>(n_sites) * max_occupation < n_particles)
    throw std::invalid_argument("FockBasis: particles do not fit under the occupation cap");
  if (n_sites * std::log2(static_cast<double>(max_occupation + 1)) > 63.0)
    throw std::invalid_argument("FockBasis: too many sites for the state index");
  const std::uint64_t dim = basis_dimension(n_sites, n_particles, max_occupation);
  if (dim > kMaxStates)
    throw std::invalid_argument("FockBasis: " + std::to_string(dim) +
                                " states exceed the desk-scale limit");
  n_states_ = static_cast<std::size_t>(dim);
  occupations_.reserve(n_states_ * n_sites_);
  std::vector<int> current(n_sites_, 0);
  // Depth-first fill, largest occupation first, gives descending lexicographic order.
  std::function<void(int, int)> fill = [&](int site, int remaining) {
    if (site == n_sites_ - 1) {
      if (remaining <= max_occupation_) {
        current[site] = remaining;
        occupations_.insert(occupations_.end(), current.begin(), current.end());
      }
      return;
    }
    const int sites_after = n_sites_ - site - 1;
    const int hi = std::min(remaining, max_occupation_);
    const int lo = std::max(0, remaining - max_occupation_ * sites_after);
    for (int k = hi; k >= lo; --k) {
      current[site] = k;
      fill(site + 1, remaining - k);
    }
  };
  fill(0, n_particles_);
  index_.reserve(n_states_);
  for (std::size_t k = 0; k < n_states_; ++k) index_.emplace(key(state(k)), k);
}

std::uint64_t FockBasis::key(std::span<const int> occupations) const {
  std::uint64_t h = 0;
  for (int n : occupations) h = h * static_cast<std::uint64_t>(max_occupation_ + 1) + static_cast<std::uint64_t>(n);
  return h;
}

std::optional<std::size_t> FockBasis::index_of(std::span<const int> occupations) const {
  if (occupations.size() != static_cast<std::size_t>(n_sites_)) return std::nullopt;
  int total = 0;
  for (int n : occupations) {
    if (n < 0 || n > max_occupation_) return std::nullopt;
    total += n;
  }
  if (total != n_particles_) return std::nullopt;
  auto it = index_.find(key(occupations));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd FockBasis::site_occupations(int site) const {
  Eigen::VectorXd n(n_states_);
  for (std::size_t k = 0; k < n_states_; ++k) n(k) = state(k)[site];
  return n;
}

DenseState DenseState::basis_state(std::shared_ptr<const FockBasis> basis,
                                   std::span<const int> occupations) {
  const auto idx = basis->index_of(occupations);
  if (!idx) throw std::invalid_argument("occupation vector not in the basis");
  DenseState s{basis, Eigen::VectorXcd::Zero(basis->size())};
  s.amplitudes(*idx) = 1.0;
  return s;
}

cplx inner(const DenseState& bra, const DenseState& ket) {
  if (bra.amplitudes.size() != ket.amplitudes.size())
    throw std::invalid_argument("inner: state dimensions differ");
  return kernels::dot({bra.amplitudes.data(), static_cast<std::size_t>(bra.amplitudes.size())},
                      {ket.amplitudes.data(), static_cast<std::size_t>(ket.amplitudes.size())});
}

void write_state(std::ostream& os, const DenseState& state) {
  const FockBasis& b = *state.basis;
  os << "# schema: bhcontrol.dense-state v1 sites=" << b.n_sites() << " particles=" << b.n_particles()
     << " max_occupation=" << b.max_occupation() << "\n";
  os << "# index, occupations, real, imag\n";
  char buf[64];
  for (std::size_t k = 0; k < b.size(); ++k) {
    os << k;
    for (int n : b.state(k)) os << ' ' << n;
    std::snprintf(buf, sizeof buf, " %.17g %.17g\n", state.amplitudes(k).real(),
                  state.amplitudes(k).imag());
    os << buf;
  }
}

SparseReal BoseHubbardOperators::hamiltonian(double u) const {
  SparseReal h = drift;
  SparseReal diag(interaction.size(), interaction.size());
  diag.reserve(Eigen::VectorXi::Constant(interaction.size(), 1));
  for (Eigen::Index k = 0; k < interaction.size(); ++k) diag.insert(k, k) = u * interaction(k);
  h += diag;
  h.makeCompressed();
  return h;
}

BoseHubbardOperators build_operators(std::shared_ptr<const FockBasis> basis) {
  const FockBasis& b = *basis;
  const auto n = static_cast<Eigen::Index>(b.size());
  std::vector<Eigen::Triplet<double>> all, odd, even;
  std::vector<int> work(b.n_sites());
  Eigen::VectorXd interaction(n);
  for (std::size_t k = 0; k < b.size(); ++k) {
    auto occ = b.state(k);
    double e = 0.0;
    for (int m : occ) e += 0.5 * m * (m - 1);
    interaction(k) = e;
    for (int i = 0; i + 1 < b.n_sites(); ++i) {
      // a_{i+1}^dag a_i and its conjugate; only the upper triangle is generated
      // here, mirrored below.
      for (int dir = 0; dir < 2; ++dir) {
        const int from = dir == 0 ? i : i + 1;
        const int to = dir == 0 ? i + 1 : i;
        if (occ[from] == 0 || occ[to] == b.max_occupation()) continue;
        std::copy(occ.begin(), occ.end(), work.begin());
        const double amp = -std::sqrt(static_cast<double>(work[from]) * (work[to] + 1));
        work[from] -= 1;
        work[to] += 1;
        const auto target = b.index_of(work);
        if (!target) continue;
        const Eigen::Triplet<double> t(static_cast<int>(*target), static_cast<int>(k), amp);
        all.push_back(t);
        (i % 2 == 0 ? odd : even).push_back(t);
      }
    }
  }
  BoseHubbardOperators ops;
  ops.basis = basis;
  ops.interaction = interaction;
  ops.drift.resize(n, n);
  ops.drift.setFromTriplets(all.begin(), all.end());
  ops.drift_odd.resize(n, n);
  ops.drift_odd.setFromTriplets(odd.begin(), odd.end());
  ops.drift_even.resize(n, n);
  ops.drift_even.setFromTriplets(even.begin(), even.end());
  return ops;
}

SparseReal build_hamiltonian(const FockBasis& basis, double u) {
  auto shared = std::make_shared<const FockBasis>(basis);
  return build_operators(shared).hamiltonian(u);
}

namespace {

void fix_phase(Eigen::VectorXcd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  const cplx a = v(arg);
  if (std::abs(a) > 0.0) v *= std::conj(a) / std::abs(a);
}

// Lowest eigenpair by Lanczos with full reorthogonalization.
std::pair<double, Eigen::VectorXd> lanczos_lowest(const SparseReal& h, int max_iter = 300,
                                                  double tol = 1e-12) {
  const Eigen::Index n = h.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) += 1e-3 * std::sin(1.0 + k);
  v.normalize();
  std::vector<Eigen::VectorXd> basis{v};
  std::vector<double> alpha, beta;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = h * basis.back();
    alpha.push_back(basis.back().dot(w));
    for (const auto& q : basis) w -= q.dot(w) * q;
    for (const auto& q : basis) w -= q.dot(w) * q;
    const double b = w.norm();
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      t(j, j) = alpha[j];
      if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double e0 = es.eigenvalues()(0);
    const double residual = std::abs(b * es.eigenvectors()(m - 1, 0));
    if (residual < tol * std::max(1.0, std::abs(e0)) || b < 1e-14 || std::abs(e0 - previous) < 1e-15) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (int j = 0; j < m; ++j) x += es.eigenvectors()(j, 0) * basis[j];
      return {e0, x.normalized()};
    }
    previous = e0;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  throw std::runtime_error("Lanczos ground-state search did not converge");
}

}  // namespace

GroundState ground_state(std::shared_ptr<const FockBasis> basis, double u) {
  const BoseHubbardOperators ops = build_operators(basis);
  const SparseReal h = ops.hamiltonian(u);
  GroundState gs;
  gs.state.basis = basis;
  if (basis->size() <= kDenseLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    gs.energy = es.eigenvalues()(0);
    gs.state.amplitudes = es.eigenvectors().col(0).cast<cplx>();
  } else {
    auto [e, v] = lanczos_lowest(h);
    gs.energy = e;
    gs.state.amplitudes = v.cast<cplx>();
  }
  gs.state.amplitudes.normalize();
  fix_phase(gs.state.amplitudes);
  return gs;
}

ExactPropagator::ExactPropagator(std::shared_ptr<const FockBasis> basis, double u, Method method)
    : basis_(std::move(basis)), u_(u), method_(method) {
  hamiltonian_ = build_operators(basis_).hamiltonian(u_);
  if (method_ == Method::automatic)
    method_ = basis_->size() <= kDenseLimit ? Method::eigen : Method::krylov;
  if (method_ == Method::eigen) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(hamiltonian_)};
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
  }
}

DenseState ExactPropagator::evolve(const DenseState& state, double duration) const {
  if (!(duration >= 0.0)) throw std::invalid_argument("evolution duration must be non-negative");
  DenseState out = state;
  if (duration == 0.0) return out;
  if (method_ == Method::eigen) {
    Eigen::VectorXcd c = eigenvectors_.transpose().cast<cplx>() * state.amplitudes;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -eigenvalues_(k) * duration);
    out.amplitudes = eigenvectors_.cast<cplx>() * c;
  } else {
    out.amplitudes = krylov_expm(hamiltonian_, state.amplitudes, duration);
  }
  return out;
}

DenseState evolve_exact(const DenseState& state, double u, double duration) {
  return ExactPropagator(state.basis, u).evolve(state, duration);
}

Eigen::VectorXcd krylov_expm(const SparseReal& h, const Eigen::VectorXcd& v, double t,
                             int krylov_dim, double tol) {
  const Eigen::Index n = h.rows();
  Eigen::VectorXcd out = v;
  double remaining = t;
  double tau = t;
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  while (remaining > 0.0) {
    const double beta0 = out.norm();
    if (beta0 == 0.0) return out;
    std::vector<Eigen::VectorXcd> q{out / beta0};
    std::vector<double> alpha, beta;
    double last_beta = 0.0;
    for (int j = 0; j < m_cap; ++j) {
      Eigen::VectorXcd w = h * q[j];
      alpha.push_back(q[j].dot(w).real());
      for (const auto& qq : q) w -= qq.dot(w) * qq;
      for (const auto& qq : q) w -= qq.dot(w) * qq;
      last_beta = w.norm();
      if (last_beta < 1e-14 || j + 1 == m_cap) break;
      beta.push_back(last_beta);
      q.push_back(w / last_beta);
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      tm(j, j) = alpha[j];
      if (j + 1 < m) tm(j, j + 1) = tm(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tm);
    for (;;) {
      tau = std::min(tau, remaining);
      Eigen::VectorXcd c(m);
      for (int k = 0; k < m; ++k)
        c(k) = std::polar(1.0, -es.eigenvalues()(k) * tau) * es.eigenvectors()(0, k);
      Eigen::VectorXcd y = es.eigenvectors().cast<cplx>() * c;
      const bool exhausted = last_beta < 1e-14 || m == n;
      const double err = exhausted ? 0.0 : last_beta * std::abs(y(m - 1));
      if (err <= tol || tau < 1e-12 * t) {
        Eigen::VectorXcd next = Eigen::VectorXcd::Zero(n);
        for (int k = 0; k < m; ++k) next += y(k) * q[k];
        out = beta0 * next;
        remaining -= tau;
        if (err < 0.1 * tol) tau *= 2.0;
        break;
      }
      tau *= 0.5;
    }
  }
  return out;
}

namespace {

Eigen::MatrixXcd unitary_from_symmetric(const Eigen::MatrixXd& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  Eigen::VectorXcd phases(h.rows());
  for (Eigen::Index k = 0; k < h.rows(); ++k) phases(k) = std::polar(1.0, -es.eigenvalues()(k) * dt);
  const Eigen::MatrixXcd v = es.eigenvectors().cast<cplx>();
  return v * phases.asDiagonal() * v.adjoint();
}

}  // namespace

DenseStPropagator::DenseStPropagator(std::shared_ptr<const FockBasis> basis, double dt, DriftSplit split)
    : basis_(basis), dt_(dt), split_(split), ops_(build_operators(basis)) {
  if (basis->size() > kDenseLimit)
    throw std::invalid_argument("dense split-step propagator limited to desk-scale bases");
  if (split_ == DriftSplit::exact) {
    drift_ = unitary_from_symmetric(Eigen::MatrixXd(ops_.drift), dt_);
  } else {
    drift_odd_ = unitary_from_symmetric(Eigen::MatrixXd(ops_.drift_odd), dt_);
    drift_even_ = unitary_from_symmetric(Eigen::MatrixXd(ops_.drift_even), dt_);
  }
}

void DenseStPropagator::half_control(Eigen::VectorXcd& psi, double u, bool adjoint) const {
  const double sign = adjoint ? 1.0 : -1.0;
  Eigen::VectorXcd phases(psi.size());
  for (Eigen::Index k = 0; k < psi.size(); ++k)
    phases(k) = std::polar(1.0, sign * u * ops_.interaction(k) * dt_ / 2.0);
  kernels::mul({psi.data(), static_cast<std::size_t>(psi.size())},
               {phases.data(), static_cast<std::size_t>(phases.size())});
}

void DenseStPropagator::apply_drift(Eigen::VectorXcd& psi, bool adjoint) const {
  if (split_ == DriftSplit::exact) {
    psi = adjoint ? Eigen::VectorXcd(drift_.adjoint() * psi) : Eigen::VectorXcd(drift_ * psi);
  } else if (!adjoint) {
    psi = drift_even_ * (drift_odd_ * psi);
  } else {
    psi = drift_odd_.adjoint() * (drift_even_.adjoint() * psi);
  }
}

void DenseStPropagator::step(Eigen::VectorXcd& psi, double u_n, double u_np1) const {
  half_control(psi, u_n, false);
  apply_drift(psi, false);
  half_control(psi, u_np1, false);
}

void DenseStPropagator::step_adjoint(Eigen::VectorXcd& psi, double u_n, double u_np1) const {
  half_control(psi, u_np1, true);
  apply_drift(psi, true);
  half_control(psi, u_n, true);
}

Eigen::MatrixXcd DenseStPropagator::step_matrix(double u_n, double u_np1) const {
  const auto n = static_cast<Eigen::Index>(basis_->size());
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Unit(n, k);
    step(e, u_n, u_np1);
    m.col(k) = e;
  }
  return m;
}

DenseState evolve_trotter_dense(const DenseState& state, const ControlGrid& controls, DriftSplit split) {
  controls.validate();
  const DenseStPropagator prop(state.basis, controls.dt, split);
  DenseState out = state;
  for (std::size_t n = 0; n + 1 < controls.size(); ++n)
    prop.step(out.amplitudes, controls.values[n], controls.values[n + 1]);
  return out;
}

std::vector<double> finite_difference_gradient(const CostFunction& cost, std::span<const double> u,
                                               double step) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw std::invalid_argument("finite-difference step must lie in [1e-7, 1e-3]");
  std::vector<double> probe(u.begin(), u.end());
  std::vector<double> grad(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    probe[n] = u[n] + step;
    const double plus = cost(probe);
    probe[n] = u[n] - step;
    const double minus = cost(probe);
    probe[n] = u[n];
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::runtime_error("non-finite cost while probing control index " + std::to_string(n));
    grad[n] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

}  // namespace bhc
