#pragma once

// Open-boundary matrix product states for number-conserving boson chains.
//
// Site i stores one (left x right) matrix per physical state j, so the
// amplitude of |j_1 ... j_N> is A_1[j_1] A_2[j_2] ... A_N[j_N] with 1x1
// boundary bonds. Everything left of the orthogonality center is
// left-normalized, everything right of it right-normalized.

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bhc/fock.hpp"

namespace bhc {

struct TruncationCaps {
  std::size_t max_bond = 200;
  double sv_threshold = 1e-12;  // relative to the largest singular value

  static TruncationCaps unlimited() { return {std::size_t(1) << 30, 0.0}; }
};

enum class GaugeDirection { left, right };

using SiteTensor = std::vector<Eigen::MatrixXcd>;  // indexed by physical state

class Mps {
 public:
  Mps() = default;
  Mps(std::vector<SiteTensor> sites, int gauge_position, TruncationCaps caps);

  static Mps product_state(std::span<const int> occupations, int local_dim, TruncationCaps caps = {});
  /// Successive SVDs of the full amplitude tensor; ends with the center at site 0.
  static Mps from_dense(const DenseState& state, int local_dim, TruncationCaps caps);

  DenseState to_dense(std::shared_ptr<const FockBasis> basis) const;

  int length() const { return static_cast<int>(sites_.size()); }
  int local_dim() const { return sites_.empty() ? 0 : static_cast<int>(sites_[0].size()); }
  int gauge_position() const { return gauge_; }
  const TruncationCaps& caps() const { return caps_; }
  void set_caps(TruncationCaps caps) { caps_ = caps; }
  double log_truncation() const { return discarded_; }
  void reset_truncation() { discarded_ = 0.0; }
  void add_truncation(double weight) { discarded_ += weight; }

  const SiteTensor& site(int i) const { return sites_[i]; }
  SiteTensor& site(int i) { return sites_[i]; }
  int left_bond(int i) const { return static_cast<int>(sites_[i][0].rows()); }
  int right_bond(int i) const { return static_cast<int>(sites_[i][0].cols()); }
  std::vector<int> bond_dimensions() const;
  int max_bond_dimension() const;

  /// Norm carried by the center tensor.
  double norm() const;
  void normalize();
  void scale(cplx s);

  /// Moves the orthogonality center with exact SVD sweeps; no truncation.
  void move_center(int site);

  /// Applies a d^2 x d^2 gate (row index j_i * d + j_{i+1}) on sites
  /// (bond, bond+1). The center must sit on one of the two sites; afterwards
  /// it sits on `bond` (left) or `bond+1` (right).
  void apply_two_site_gate(int bond, const Eigen::MatrixXcd& gate, GaugeDirection direction);

  /// Multiplies the physical index of `site` by `phases`; gauge untouched.
  void apply_one_site_diagonal(int site, std::span<const cplx> phases);

  /// Largest deviation of the isometry contractions from identity.
  double canonical_error() const;

 private:
  std::vector<SiteTensor> sites_;
  int gauge_ = 0;
  TruncationCaps caps_;
  double discarded_ = 0.0;
};

/// Outcome of a truncated SVD of an m x n matrix.
struct TruncatedSvd {
  Eigen::MatrixXcd u;      // m x k
  Eigen::VectorXd s;       // k, renormalized to unit sum of squares
  Eigen::MatrixXcd vh;     // k x n
  double discarded = 0.0;  // dropped weight relative to the total
  double norm = 0.0;       // Frobenius norm before truncation
};

/// Row and column sets of the connected nonzero blocks of a matrix.
struct NonzeroBlock {
  std::vector<Eigen::Index> rows, cols;
};
std::vector<NonzeroBlock> nonzero_blocks(const Eigen::MatrixXcd& m);

/// Deterministic thin SVD: singular values descending, first nonzero entry of
/// each left singular vector real positive.
TruncatedSvd truncated_svd(const Eigen::MatrixXcd& m, const TruncationCaps& caps);

cplx overlap(const Mps& bra, const Mps& ket);

/// <psi| op_site |psi> / 1 for a normalized state.
cplx local_expectation(const Mps& mps, int site, const Eigen::MatrixXcd& op);
/// <psi| op_i |psi> for every site i, one environment pass.
std::vector<cplx> local_expectations(const Mps& mps, const Eigen::MatrixXcd& op);

cplx cross_matrix_element(const Mps& bra, const Mps& ket, int site, const Eigen::MatrixXcd& op);
/// <bra| op_i |ket> for every site with cached environments.
std::vector<cplx> cross_matrix_elements(const Mps& bra, const Mps& ket, const Eigen::MatrixXcd& op);
/// sum_i <bra| diag(weights)_i |ket> for a diagonal one-site operator.
cplx cross_diagonal_sum(const Mps& bra, const Mps& ket, std::span<const double> weights);

/// <bra| G_(i,i+1) |ket> for every bond i with a d^2 x d^2 operator.
std::vector<cplx> bond_matrix_elements(const Mps& bra, const Mps& ket, const Eigen::MatrixXcd& op);

/// Versioned text snapshot: header, then per site "site i left phys right"
/// followed by row-major (left, phys, right) entries as "re im".
void write_snapshot(std::ostream& os, const Mps& mps);
Mps read_snapshot(std::istream& is);

}  // namespace bhc
