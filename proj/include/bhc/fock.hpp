#pragma once

// Exact-diagonalization reference for small Bose-Hubbard chains in the
// occupation-number basis. Used to cross-check the MPS propagator, the exact
// gradient and the imaginary-time ground states.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "bhc/controls.hpp"

namespace bhc {

using cplx = std::complex<double>;
using SparseReal = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Number of occupation vectors of `n_sites` sites holding `n_particles` with
/// at most `max_occupation` per site. Throws std::overflow_error if the count
/// exceeds 64 bits.
std::uint64_t basis_dimension(int n_sites, int n_particles, int max_occupation);

/// min(n_particles, local_dim - 1); the local dimension defaults to 5.
int default_max_occupation(int n_particles, int local_dim = 5);

/// Fixed-N occupation basis, ordered lexicographically descending:
/// (2,0), (1,1), (0,2) for two sites and two particles.
class FockBasis {
 public:
  static constexpr std::uint64_t kMaxStates = 1'000'000;

  FockBasis(int n_sites, int n_particles, int max_occupation);

  int n_sites() const { return n_sites_; }
  int n_particles() const { return n_particles_; }
  int max_occupation() const { return max_occupation_; }
  int local_dim() const { return max_occupation_ + 1; }
  std::size_t size() const { return n_states_; }

  std::span<const int> state(std::size_t k) const {
    return {occupations_.data() + k * n_sites_, static_cast<std::size_t>(n_sites_)};
  }
  std::optional<std::size_t> index_of(std::span<const int> occupations) const;

  /// Occupation of `site` in every basis state, as doubles.
  Eigen::VectorXd site_occupations(int site) const;

 private:
  std::uint64_t key(std::span<const int> occupations) const;

  int n_sites_, n_particles_, max_occupation_;
  std::size_t n_states_ = 0;
  std::vector<int> occupations_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

struct DenseState {
  std::shared_ptr<const FockBasis> basis;
  Eigen::VectorXcd amplitudes;

  double norm() const { return amplitudes.norm(); }
  static DenseState basis_state(std::shared_ptr<const FockBasis> basis, std::span<const int> occupations);
};

cplx inner(const DenseState& bra, const DenseState& ket);

/// Writes "index occupation... real imaginary" rows after a schema comment.
void write_state(std::ostream& os, const DenseState& state);

/// Hopping and interaction pieces of H(u) = H_drift + u * H_int with
/// H_drift = -sum_i (a_{i+1}^dag a_i + h.c.), H_int = (1/2) sum_i n_i (n_i - 1).
struct BoseHubbardOperators {
  std::shared_ptr<const FockBasis> basis;
  SparseReal drift;
  SparseReal drift_odd;   // bonds (1,2), (3,4), ... counted from one
  SparseReal drift_even;  // bonds (2,3), (4,5), ...
  Eigen::VectorXd interaction;  // diagonal of H_int, equal to dH/du

  SparseReal hamiltonian(double u) const;
};

BoseHubbardOperators build_operators(std::shared_ptr<const FockBasis> basis);
SparseReal build_hamiltonian(const FockBasis& basis, double u);

struct GroundState {
  double energy = 0.0;
  DenseState state;
};

/// Lowest eigenpair of H(u); the largest-magnitude amplitude is made real
/// positive. Dense solver up to kDenseLimit states, Lanczos above.
GroundState ground_state(std::shared_ptr<const FockBasis> basis, double u);

inline constexpr std::size_t kDenseLimit = 4000;

/// exp(-i H(u) t) for a fixed u, via a cached eigendecomposition up to
/// kDenseLimit states and Lanczos-Krylov exponentiation above.
class ExactPropagator {
 public:
  enum class Method { automatic, eigen, krylov };

  ExactPropagator(std::shared_ptr<const FockBasis> basis, double u, Method method = Method::automatic);

  DenseState evolve(const DenseState& state, double duration) const;
  Method method() const { return method_; }

 private:
  std::shared_ptr<const FockBasis> basis_;
  double u_;
  Method method_;
  SparseReal hamiltonian_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

DenseState evolve_exact(const DenseState& state, double u, double duration);

/// Krylov approximation of exp(-i H t) v for a real symmetric sparse H.
Eigen::VectorXcd krylov_expm(const SparseReal& h, const Eigen::VectorXcd& v, double t,
                             int krylov_dim = 30, double tol = 1e-13);

/// How the drift factor of each symmetric-split step is exponentiated.
enum class DriftSplit {
  exact,     // exp(-i H_drift dt)
  even_odd,  // exp(-i H_even dt) exp(-i H_odd dt), matching the MPS sweeps
};

/// Dense split-step propagator: step n maps psi_n to
/// C(u_{n+1}) D C(u_n) psi_n with C(u) = exp(-i u H_int dt / 2).
class DenseStPropagator {
 public:
  DenseStPropagator(std::shared_ptr<const FockBasis> basis, double dt, DriftSplit split);

  const BoseHubbardOperators& operators() const { return ops_; }
  double dt() const { return dt_; }
  DriftSplit split() const { return split_; }

  void step(Eigen::VectorXcd& psi, double u_n, double u_np1) const;
  void step_adjoint(Eigen::VectorXcd& psi, double u_n, double u_np1) const;
  void half_control(Eigen::VectorXcd& psi, double u, bool adjoint) const;
  /// Full step operator as a dense matrix.
  Eigen::MatrixXcd step_matrix(double u_n, double u_np1) const;

 private:
  void apply_drift(Eigen::VectorXcd& psi, bool adjoint) const;

  std::shared_ptr<const FockBasis> basis_;
  double dt_;
  DriftSplit split_;
  BoseHubbardOperators ops_;
  Eigen::MatrixXcd drift_;       // exact
  Eigen::MatrixXcd drift_odd_;   // split
  Eigen::MatrixXcd drift_even_;
};

/// Applies all steps of the control grid.
DenseState evolve_trotter_dense(const DenseState& state, const ControlGrid& controls,
                                DriftSplit split = DriftSplit::exact);

using CostFunction = std::function<double(std::span<const double>)>;

/// Central differences (J(u + h e_n) - J(u - h e_n)) / 2h for every element.
/// Throws std::runtime_error naming the index when a probe is not finite.
std::vector<double> finite_difference_gradient(const CostFunction& cost, std::span<const double> u,
                                               double step);

}  // namespace bhc
