#include "bhc/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bhc/kernels.hpp"

namespace bhc {

namespace {

constexpr std::uint64_t kDenseTensorLimit = 10'000'000;

std::span<cplx> span_of(Eigen::MatrixXcd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const cplx> span_of(const Eigen::MatrixXcd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void check_same_shape(const Mps& a, const Mps& b) {
  if (a.length() != b.length() || a.local_dim() != b.local_dim())
    throw std::invalid_argument("MPS shapes differ: " + std::to_string(a.length()) + "x" +
                                std::to_string(a.local_dim()) + " vs " + std::to_string(b.length()) +
                                "x" + std::to_string(b.local_dim()));
}

// L[i] contracts sites < i (bra bond x ket bond).
std::vector<Eigen::MatrixXcd> left_environments(const Mps& bra, const Mps& ket) {
  const int n = ket.length();
  std::vector<Eigen::MatrixXcd> env(n + 1);
  env[0] = Eigen::MatrixXcd::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(bra.right_bond(i), ket.right_bond(i));
    for (int j = 0; j < ket.local_dim(); ++j)
      next.noalias() += bra.site(i)[j].adjoint() * (env[i] * ket.site(i)[j]);
    env[i + 1] = std::move(next);
  }
  return env;
}

// R[i] contracts sites >= i (ket bond x bra bond).
std::vector<Eigen::MatrixXcd> right_environments(const Mps& bra, const Mps& ket) {
  const int n = ket.length();
  std::vector<Eigen::MatrixXcd> env(n + 1);
  env[n] = Eigen::MatrixXcd::Ones(1, 1);
  for (int i = n - 1; i >= 0; --i) {
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(ket.left_bond(i), bra.left_bond(i));
    for (int j = 0; j < ket.local_dim(); ++j)
      next.noalias() += ket.site(i)[j] * (env[i + 1] * bra.site(i)[j].adjoint());
    env[i] = std::move(next);
  }
  return env;
}

cplx site_term(const SiteTensor& bra, const SiteTensor& ket, const Eigen::MatrixXcd& left,
               const Eigen::MatrixXcd& right, const Eigen::MatrixXcd& op) {
  const int d = static_cast<int>(ket.size());
  std::vector<Eigen::MatrixXcd> x(d);
  for (int k = 0; k < d; ++k) x[k] = left * ket[k] * right;
  cplx total = 0.0;
  for (int j = 0; j < d; ++j) {
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(bra[j].rows(), bra[j].cols());
    for (int k = 0; k < d; ++k)
      if (op(j, k) != 0.0) kernels::axpy(span_of(y), op(j, k), span_of(x[k]));
    total += kernels::dot(span_of(bra[j]), span_of(y));
  }
  return total;
}

}  // namespace

Mps::Mps(std::vector<SiteTensor> sites, int gauge_position, TruncationCaps caps)
    : sites_(std::move(sites)), gauge_(gauge_position), caps_(caps) {
  if (sites_.empty()) throw std::invalid_argument("MPS needs at least one site");
  const std::size_t d = sites_[0].size();
  if (d < 1) throw std::invalid_argument("MPS local dimension must be positive");
  if (gauge_ < 0 || gauge_ >= length()) throw std::invalid_argument("gauge position outside the chain");
  for (int i = 0; i < length(); ++i) {
    if (sites_[i].size() != d) throw std::invalid_argument("inconsistent local dimension at site " + std::to_string(i));
    for (const auto& m : sites_[i])
      if (m.rows() != sites_[i][0].rows() || m.cols() != sites_[i][0].cols())
        throw std::invalid_argument("inconsistent bond shapes at site " + std::to_string(i));
    if (i > 0 && left_bond(i) != right_bond(i - 1))
      throw std::invalid_argument("bond mismatch between sites " + std::to_string(i - 1) + " and " +
                                  std::to_string(i));
  }
  if (left_bond(0) != 1 || right_bond(length() - 1) != 1)
    throw std::invalid_argument("boundary bond dimensions must be 1");
}

Mps Mps::product_state(std::span<const int> occupations, int local_dim, TruncationCaps caps) {
  if (occupations.empty()) throw std::invalid_argument("product state needs at least one site");
  std::vector<SiteTensor> sites;
  sites.reserve(occupations.size());
  for (std::size_t i = 0; i < occupations.size(); ++i) {
    const int n = occupations[i];
    if (n < 0 || n >= local_dim)
      throw std::invalid_argument("occupation " + std::to_string(n) + " at site " + std::to_string(i) +
                                  " does not fit local dimension " + std::to_string(local_dim));
    SiteTensor t(local_dim, Eigen::MatrixXcd::Zero(1, 1));
    t[n](0, 0) = 1.0;
    sites.push_back(std::move(t));
  }
  return Mps(std::move(sites), 0, caps);
}

Mps Mps::from_dense(const DenseState& state, int local_dim, TruncationCaps caps) {
  const FockBasis& b = *state.basis;
  if (b.max_occupation() >= local_dim)
    throw std::invalid_argument("basis occupations exceed the MPS local dimension");
  const int n = b.n_sites();
  std::uint64_t full = 1;
  for (int i = 0; i < n; ++i) {
    full *= static_cast<std::uint64_t>(local_dim);
    if (full > kDenseTensorLimit) throw std::invalid_argument("full amplitude tensor too large for from_dense");
  }
  // Amplitude tensor with site 0 as the most significant index.
  Eigen::MatrixXcd rest = Eigen::MatrixXcd::Zero(1, static_cast<Eigen::Index>(full));
  for (std::size_t k = 0; k < b.size(); ++k) {
    std::uint64_t idx = 0;
    for (int occ : b.state(k)) idx = idx * local_dim + occ;
    rest(0, static_cast<Eigen::Index>(idx)) = state.amplitudes(k);
  }
  const double input_norm = rest.norm();
  std::vector<SiteTensor> sites(n);
  double discarded = 0.0;
  Eigen::Index left = 1;
  for (int i = 0; i + 1 < n; ++i) {
    const Eigen::Index tail = rest.cols() / local_dim;
    Eigen::MatrixXcd m(left * local_dim, tail);
    for (int j = 0; j < local_dim; ++j) m.middleRows(j * left, left) = rest.middleCols(j * tail, tail);
    TruncatedSvd svd = truncated_svd(m, caps);
    discarded += svd.discarded;
    const Eigen::Index k = svd.s.size();
    sites[i].assign(local_dim, Eigen::MatrixXcd());
    for (int j = 0; j < local_dim; ++j) sites[i][j] = svd.u.middleRows(j * left, left);
    rest = svd.s.cast<cplx>().asDiagonal() * svd.vh;
    left = k;
  }
  sites[n - 1].assign(local_dim, Eigen::MatrixXcd());
  for (int j = 0; j < local_dim; ++j) sites[n - 1][j] = rest.col(j);
  Mps out(std::move(sites), n - 1, caps);
  out.add_truncation(discarded);
  out.move_center(0);
  out.scale(input_norm / out.norm());
  return out;
}

DenseState Mps::to_dense(std::shared_ptr<const FockBasis> basis) const {
  if (basis->n_sites() != length()) throw std::invalid_argument("basis and MPS lengths differ");
  if (basis->size() > FockBasis::kMaxStates) throw std::invalid_argument("basis too large for a dense state");
  DenseState out{basis, Eigen::VectorXcd::Zero(basis->size())};
  for (std::size_t k = 0; k < basis->size(); ++k) {
    auto occ = basis->state(k);
    if (std::any_of(occ.begin(), occ.end(), [&](int v) { return v >= local_dim(); })) continue;
    Eigen::RowVectorXcd v = sites_[0][occ[0]];
    for (int i = 1; i < length(); ++i) v = v * sites_[i][occ[i]];
    out.amplitudes(k) = v(0);
  }
  return out;
}

std::vector<int> Mps::bond_dimensions() const {
  std::vector<int> dims;
  for (int i = 0; i + 1 < length(); ++i) dims.push_back(right_bond(i));
  return dims;
}

int Mps::max_bond_dimension() const {
  int m = 1;
  for (int d : bond_dimensions()) m = std::max(m, d);
  return m;
}

double Mps::norm() const {
  double s = 0.0;
  for (const auto& m : sites_[gauge_]) s += kernels::norm2(span_of(m));
  return std::sqrt(s);
}

void Mps::normalize() {
  const double n = norm();
  if (!(n > 0.0)) throw std::runtime_error("cannot normalize a zero MPS");
  scale(1.0 / n);
}

void Mps::scale(cplx s) {
  for (auto& m : sites_[gauge_]) kernels::scale(span_of(m), s);
}

void Mps::move_center(int target) {
  if (target < 0 || target >= length()) throw std::invalid_argument("gauge target outside the chain");
  const int d = local_dim();
  // Exact moves: only singular values that are exactly zero are dropped.
  const TruncationCaps exact{std::size_t(1) << 30, 0.0};
  while (gauge_ < target) {
    SiteTensor& a = sites_[gauge_];
    const Eigen::Index l = a[0].rows(), r = a[0].cols();
    Eigen::MatrixXcd m(l * d, r);
    for (int j = 0; j < d; ++j) m.middleRows(j * l, l) = a[j];
    TruncatedSvd svd = truncated_svd(m, exact);
    const Eigen::MatrixXcd carry = (svd.s * svd.norm).cast<cplx>().asDiagonal() * svd.vh;
    for (int j = 0; j < d; ++j) a[j] = svd.u.middleRows(j * l, l);
    for (auto& b : sites_[gauge_ + 1]) b = carry * b;
    ++gauge_;
  }
  while (gauge_ > target) {
    SiteTensor& a = sites_[gauge_];
    const Eigen::Index l = a[0].rows(), r = a[0].cols();
    Eigen::MatrixXcd m(l, d * r);
    for (int j = 0; j < d; ++j) m.middleCols(j * r, r) = a[j];
    TruncatedSvd svd = truncated_svd(m, exact);
    const Eigen::MatrixXcd carry = svd.u * (svd.s * svd.norm).cast<cplx>().asDiagonal();
    for (int j = 0; j < d; ++j) a[j] = svd.vh.middleCols(j * r, r);
    for (auto& b : sites_[gauge_ - 1]) b = b * carry;
    --gauge_;
  }
}

void Mps::apply_two_site_gate(int bond, const Eigen::MatrixXcd& gate, GaugeDirection direction) {
  if (bond < 0 || bond + 1 >= length()) throw std::invalid_argument("bond outside the chain");
  if (gauge_ != bond && gauge_ != bond + 1)
    throw std::logic_error("two-site gate on bond " + std::to_string(bond) + " with the gauge at site " +
                           std::to_string(gauge_));
  const int d = local_dim();
  if (gate.rows() != d * d || gate.cols() != d * d) throw std::invalid_argument("gate must be d^2 x d^2");
  SiteTensor& a = sites_[bond];
  SiteTensor& b = sites_[bond + 1];
  const Eigen::Index l = a[0].rows(), r = b[0].cols();
  std::vector<Eigen::MatrixXcd> theta(d * d);
  for (int k1 = 0; k1 < d; ++k1)
    for (int k2 = 0; k2 < d; ++k2) theta[k1 * d + k2].noalias() = a[k1] * b[k2];
  Eigen::MatrixXcd m(l * d, d * r);
  Eigen::MatrixXcd acc(l, r);
  for (int j1 = 0; j1 < d; ++j1) {
    for (int j2 = 0; j2 < d; ++j2) {
      acc.setZero();
      for (int k = 0; k < d * d; ++k) {
        const cplx g = gate(j1 * d + j2, k);
        if (g != 0.0) kernels::axpy(span_of(acc), g, span_of(theta[k]));
      }
      m.block(j1 * l, j2 * r, l, r) = acc;
    }
  }
  TruncatedSvd svd = truncated_svd(m, caps_);
  discarded_ += svd.discarded;
  const Eigen::VectorXcd s = svd.s.cast<cplx>();
  if (direction == GaugeDirection::right) {
    svd.vh = s.asDiagonal() * svd.vh;
    gauge_ = bond + 1;
  } else {
    svd.u = svd.u * s.asDiagonal();
    gauge_ = bond;
  }
  for (int j = 0; j < d; ++j) {
    a[j] = svd.u.middleRows(j * l, l);
    b[j] = svd.vh.middleCols(j * r, r);
  }
}

void Mps::apply_one_site_diagonal(int site, std::span<const cplx> phases) {
  if (site < 0 || site >= length()) throw std::invalid_argument("site outside the chain");
  if (phases.size() != static_cast<std::size_t>(local_dim()))
    throw std::invalid_argument("phase vector length differs from the local dimension");
  for (int j = 0; j < local_dim(); ++j)
    if (phases[j] != 1.0) kernels::scale(span_of(sites_[site][j]), phases[j]);
}

double Mps::canonical_error() const {
  double worst = 0.0;
  for (int i = 0; i < length(); ++i) {
    if (i == gauge_) continue;
    const auto& a = sites_[i];
    Eigen::MatrixXcd g;
    if (i < gauge_) {
      g = Eigen::MatrixXcd::Zero(a[0].cols(), a[0].cols());
      for (const auto& m : a) g.noalias() += m.adjoint() * m;
    } else {
      g = Eigen::MatrixXcd::Zero(a[0].rows(), a[0].rows());
      for (const auto& m : a) g.noalias() += m * m.adjoint();
    }
    g -= Eigen::MatrixXcd::Identity(g.rows(), g.cols());
    worst = std::max(worst, g.cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<NonzeroBlock> nonzero_blocks(const Eigen::MatrixXcd& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  std::vector<Eigen::Index> parent(rows + cols);
  for (Eigen::Index k = 0; k < rows + cols; ++k) parent[k] = k;
  auto find = [&](Eigen::Index k) {
    while (parent[k] != k) k = parent[k] = parent[parent[k]];
    return k;
  };
  std::vector<char> used(rows + cols, 0);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      if (m(r, c) != 0.0) {
        used[r] = used[rows + c] = 1;
        const Eigen::Index a = find(r), b = find(rows + c);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<NonzeroBlock> blocks;
  std::vector<Eigen::Index> slot(rows + cols, -1);
  for (Eigen::Index k = 0; k < rows + cols; ++k) {
    if (!used[k]) continue;
    const Eigen::Index root = find(k);
    if (slot[root] < 0) {
      slot[root] = static_cast<Eigen::Index>(blocks.size());
      blocks.emplace_back();
    }
    auto& blk = blocks[slot[root]];
    if (k < rows)
      blk.rows.push_back(k);
    else
      blk.cols.push_back(k - rows);
  }
  return blocks;
}

TruncatedSvd truncated_svd(const Eigen::MatrixXcd& m, const TruncationCaps& caps) {
  // Number conservation makes m block diagonal up to permutations; each block
  // is decomposed on its own and the spectra are merged.
  const auto blocks = nonzero_blocks(m);
  struct Piece {
    Eigen::MatrixXcd u, vh;
    Eigen::VectorXd s;
  };
  std::vector<Piece> pieces(blocks.size());
  struct Entry {
    double s;
    std::size_t block;
    Eigen::Index index;
  };
  std::vector<Entry> spectrum;
  double total = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    Eigen::MatrixXcd sub(blk.rows.size(), blk.cols.size());
    for (std::size_t c = 0; c < blk.cols.size(); ++c)
      for (std::size_t r = 0; r < blk.rows.size(); ++r) sub(r, c) = m(blk.rows[r], blk.cols[c]);
    if (sub.rows() == 1 || sub.cols() == 1) {
      // Rank one: the block is its own singular vector.
      const double nrm = sub.norm();
      pieces[b].s = Eigen::VectorXd::Constant(1, nrm);
      if (sub.rows() == 1) {
        pieces[b].u = Eigen::MatrixXcd::Ones(1, 1);
        pieces[b].vh = sub / nrm;
      } else {
        pieces[b].u = sub / nrm;
        pieces[b].vh = Eigen::MatrixXcd::Ones(1, 1);
      }
    } else if (std::max(sub.rows(), sub.cols()) <= 16) {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sub, Eigen::ComputeThinU | Eigen::ComputeThinV);
      pieces[b].u = svd.matrixU();
      pieces[b].vh = svd.matrixV().adjoint();
      pieces[b].s = svd.singularValues();
    } else {
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(sub, Eigen::ComputeThinU | Eigen::ComputeThinV);
      pieces[b].u = svd.matrixU();
      pieces[b].vh = svd.matrixV().adjoint();
      pieces[b].s = svd.singularValues();
    }
    for (Eigen::Index k = 0; k < pieces[b].s.size(); ++k) {
      spectrum.push_back({pieces[b].s(k), b, k});
      total += pieces[b].s(k) * pieces[b].s(k);
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw std::runtime_error("SVD of a zero or non-finite block");
  std::stable_sort(spectrum.begin(), spectrum.end(), [](const Entry& a, const Entry& b) { return a.s > b.s; });
  TruncatedSvd out;
  out.norm = std::sqrt(total);
  const double cutoff = caps.sv_threshold * spectrum.front().s;
  std::size_t keep = 0;
  while (keep < spectrum.size() && spectrum[keep].s > 0.0 && spectrum[keep].s >= cutoff) ++keep;
  keep = std::max<std::size_t>(1, std::min(keep, caps.max_bond));
  double kept = 0.0;
  for (std::size_t k = 0; k < keep; ++k) kept += spectrum[k].s * spectrum[k].s;
  out.discarded = std::max(0.0, (total - kept) / total);
  out.s.resize(keep);
  out.u = Eigen::MatrixXcd::Zero(m.rows(), keep);
  out.vh = Eigen::MatrixXcd::Zero(keep, m.cols());
  for (std::size_t k = 0; k < keep; ++k) {
    const Entry& e = spectrum[k];
    const auto& blk = blocks[e.block];
    const Piece& p = pieces[e.block];
    out.s(k) = e.s / std::sqrt(kept);
    for (std::size_t r = 0; r < blk.rows.size(); ++r) out.u(blk.rows[r], k) = p.u(r, e.index);
    for (std::size_t c = 0; c < blk.cols.size(); ++c) out.vh(k, blk.cols[c]) = p.vh(e.index, c);
  }
  const double tiny = 1e-14 * out.u.cwiseAbs().maxCoeff();
  for (std::size_t c = 0; c < keep; ++c) {
    for (Eigen::Index r = 0; r < out.u.rows(); ++r) {
      const cplx v = out.u(r, c);
      if (std::abs(v) > tiny) {
        const cplx phase = v / std::abs(v);
        out.u.col(c) *= std::conj(phase);
        out.vh.row(c) *= phase;
        break;
      }
    }
  }
  return out;
}

cplx overlap(const Mps& bra, const Mps& ket) {
  check_same_shape(bra, ket);
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  for (int i = 0; i < ket.length(); ++i) {
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(bra.right_bond(i), ket.right_bond(i));
    for (int j = 0; j < ket.local_dim(); ++j) next.noalias() += bra.site(i)[j].adjoint() * (env * ket.site(i)[j]);
    env = std::move(next);
  }
  return env(0, 0);
}

cplx local_expectation(const Mps& mps, int site, const Eigen::MatrixXcd& op) {
  if (site < 0 || site >= mps.length()) throw std::invalid_argument("site outside the chain");
  if (op.rows() != mps.local_dim() || op.cols() != mps.local_dim())
    throw std::invalid_argument("local operator must be d x d");
  if (mps.gauge_position() != site) {
    Mps moved = mps;
    moved.move_center(site);
    return local_expectation(moved, site, op);
  }
  const auto& a = mps.site(site);
  const Eigen::MatrixXcd left = Eigen::MatrixXcd::Identity(a[0].rows(), a[0].rows());
  const Eigen::MatrixXcd right = Eigen::MatrixXcd::Identity(a[0].cols(), a[0].cols());
  return site_term(a, a, left, right, op);
}

std::vector<cplx> local_expectations(const Mps& mps, const Eigen::MatrixXcd& op) {
  return cross_matrix_elements(mps, mps, op);
}

cplx cross_matrix_element(const Mps& bra, const Mps& ket, int site, const Eigen::MatrixXcd& op) {
  check_same_shape(bra, ket);
  if (site < 0 || site >= ket.length()) throw std::invalid_argument("site outside the chain");
  return cross_matrix_elements(bra, ket, op)[site];
}

std::vector<cplx> cross_matrix_elements(const Mps& bra, const Mps& ket, const Eigen::MatrixXcd& op) {
  check_same_shape(bra, ket);
  if (op.rows() != ket.local_dim() || op.cols() != ket.local_dim())
    throw std::invalid_argument("local operator must be d x d");
  const auto left = left_environments(bra, ket);
  const auto right = right_environments(bra, ket);
  std::vector<cplx> out(ket.length());
  for (int i = 0; i < ket.length(); ++i) out[i] = site_term(bra.site(i), ket.site(i), left[i], right[i + 1], op);
  return out;
}

cplx cross_diagonal_sum(const Mps& bra, const Mps& ket, std::span<const double> weights) {
  check_same_shape(bra, ket);
  const int d = ket.local_dim();
  if (weights.size() != static_cast<std::size_t>(d)) throw std::invalid_argument("weights must have d entries");
  // Right environments once, then a single left sweep accumulating site terms.
  const auto right = right_environments(bra, ket);
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  cplx total = 0.0;
  for (int i = 0; i < ket.length(); ++i) {
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(bra.right_bond(i), ket.right_bond(i));
    for (int j = 0; j < d; ++j) {
      Eigen::MatrixXcd x = env * ket.site(i)[j];
      if (weights[j] != 0.0) {
        Eigen::MatrixXcd y = x * right[i + 1];
        total += weights[j] * kernels::dot(span_of(bra.site(i)[j]), span_of(y));
      }
      next.noalias() += bra.site(i)[j].adjoint() * x;
    }
    env = std::move(next);
  }
  return total;
}

std::vector<cplx> bond_matrix_elements(const Mps& bra, const Mps& ket, const Eigen::MatrixXcd& op) {
  check_same_shape(bra, ket);
  const int d = ket.local_dim();
  if (op.rows() != d * d || op.cols() != d * d) throw std::invalid_argument("bond operator must be d^2 x d^2");
  const auto left = left_environments(bra, ket);
  const auto right = right_environments(bra, ket);
  std::vector<cplx> out;
  for (int i = 0; i + 1 < ket.length(); ++i) {
    std::vector<Eigen::MatrixXcd> x(d * d);
    for (int k1 = 0; k1 < d; ++k1)
      for (int k2 = 0; k2 < d; ++k2) x[k1 * d + k2] = left[i] * ket.site(i)[k1] * ket.site(i + 1)[k2] * right[i + 2];
    cplx total = 0.0;
    for (int j1 = 0; j1 < d; ++j1) {
      for (int j2 = 0; j2 < d; ++j2) {
        Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(x[0].rows(), x[0].cols());
        for (int k = 0; k < d * d; ++k)
          if (op(j1 * d + j2, k) != 0.0) kernels::axpy(span_of(y), op(j1 * d + j2, k), span_of(x[k]));
        const Eigen::MatrixXcd b = bra.site(i)[j1] * bra.site(i + 1)[j2];
        total += kernels::dot(span_of(b), span_of(y));
      }
    }
    out.push_back(total);
  }
  return out;
}

void write_snapshot(std::ostream& os, const Mps& mps) {
  char buf[96];
  os << "# schema: bhcontrol.mps v1\n";
  std::snprintf(buf, sizeof buf, "%.17g %.17g", mps.caps().sv_threshold, mps.log_truncation());
  os << "sites " << mps.length() << " local_dim " << mps.local_dim() << " gauge " << mps.gauge_position()
     << " max_bond " << mps.caps().max_bond << " sv_threshold_and_truncation " << buf << "\n";
  for (int i = 0; i < mps.length(); ++i) {
    const auto& a = mps.site(i);
    os << "site " << i << ' ' << a[0].rows() << ' ' << a.size() << ' ' << a[0].cols() << "\n";
    for (Eigen::Index l = 0; l < a[0].rows(); ++l)
      for (std::size_t j = 0; j < a.size(); ++j)
        for (Eigen::Index r = 0; r < a[0].cols(); ++r) {
          std::snprintf(buf, sizeof buf, "%.17g %.17g\n", a[j](l, r).real(), a[j](l, r).imag());
          os << buf;
        }
  }
}

Mps read_snapshot(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# schema: bhcontrol.mps v1")
    throw std::runtime_error("not a bhcontrol.mps v1 snapshot");
  std::string w1, w2, w3, w4, w5;
  int n = 0, d = 0, gauge = 0;
  TruncationCaps caps;
  double truncation = 0.0;
  if (!(is >> w1 >> n >> w2 >> d >> w3 >> gauge >> w4 >> caps.max_bond >> w5 >> caps.sv_threshold >> truncation) ||
      w1 != "sites" || w2 != "local_dim" || w3 != "gauge" || w4 != "max_bond" || n < 1 || d < 1)
    throw std::runtime_error("malformed MPS snapshot header");
  std::vector<SiteTensor> sites(n);
  for (int i = 0; i < n; ++i) {
    std::string tag;
    int idx = 0, l = 0, dd = 0, r = 0;
    if (!(is >> tag >> idx >> l >> dd >> r) || tag != "site" || idx != i || dd != d || l < 1 || r < 1)
      throw std::runtime_error("malformed MPS snapshot at site " + std::to_string(i));
    sites[i].assign(d, Eigen::MatrixXcd(l, r));
    for (int a = 0; a < l; ++a)
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < r; ++b) {
          double re = 0.0, im = 0.0;
          if (!(is >> re >> im)) throw std::runtime_error("truncated MPS snapshot at site " + std::to_string(i));
          sites[i][j](a, b) = cplx(re, im);
        }
  }
  Mps out(std::move(sites), gauge, caps);
  out.add_truncation(truncation);
  return out;
}

}  // namespace bhc
