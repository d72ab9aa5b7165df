#include "bhc/tebd.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace bhc {

Eigen::MatrixXd bond_hopping(int local_dim) {
  const int d = local_dim;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * d, d * d);
  for (int n1 = 0; n1 < d; ++n1) {
    for (int n2 = 0; n2 < d; ++n2) {
      // a_1^dag a_2 |n1, n2> = sqrt((n1 + 1) n2) |n1 + 1, n2 - 1>
      if (n1 + 1 < d && n2 > 0) {
        const double amp = std::sqrt(static_cast<double>((n1 + 1) * n2));
        h((n1 + 1) * d + (n2 - 1), n1 * d + n2) -= amp;
        h(n1 * d + n2, (n1 + 1) * d + (n2 - 1)) -= amp;
      }
    }
  }
  return h;
}

std::vector<double> interaction_diagonal(int local_dim) {
  std::vector<double> w(local_dim);
  for (int n = 0; n < local_dim; ++n) w[n] = 0.5 * n * (n - 1);
  return w;
}

Eigen::MatrixXcd number_operator(int local_dim) {
  Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(local_dim, local_dim);
  for (int j = 0; j < local_dim; ++j) n(j, j) = static_cast<double>(j);
  return n;
}

namespace {

// exp(z h) for the two-site hopping, built sector by sector in n_1 + n_2 so
// that entries between different particle numbers are exactly zero.
Eigen::MatrixXcd exponentiate(const Eigen::MatrixXd& h, cplx z, int d) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(h.rows(), h.cols());
  for (int total = 0; total <= 2 * (d - 1); ++total) {
    std::vector<int> idx;
    for (int n1 = 0; n1 < d; ++n1)
      if (total - n1 >= 0 && total - n1 < d) idx.push_back(n1 * d + (total - n1));
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd sub(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) sub(a, b) = h(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    Eigen::VectorXcd f(k);
    for (int a = 0; a < k; ++a) f(a) = std::exp(z * es.eigenvalues()(a));
    const Eigen::MatrixXcd v = es.eigenvectors().cast<cplx>();
    const Eigen::MatrixXcd e = v * f.asDiagonal() * v.adjoint();
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) out(idx[a], idx[b]) = e(a, b);
  }
  return out;
}

// diag(c x c) applied on the left (pre = false) or right (pre = true) of g.
Eigen::MatrixXcd with_phases(const Eigen::MatrixXcd& g, const std::vector<cplx>& c, bool pre) {
  const int d = static_cast<int>(c.size());
  Eigen::MatrixXcd out = g;
  for (int j1 = 0; j1 < d; ++j1)
    for (int j2 = 0; j2 < d; ++j2) {
      const cplx p = c[j1] * c[j2];
      if (pre)
        out.col(j1 * d + j2) *= p;
      else
        out.row(j1 * d + j2) *= p;
    }
  return out;
}

std::vector<cplx> conj(std::vector<cplx> c) {
  for (auto& v : c) v = std::conj(v);
  return c;
}

void require_gauge(const Mps& mps, const GateSet& gates) {
  if (mps.length() < 2) throw std::invalid_argument("split-step propagation needs at least two sites");
  if (mps.gauge_position() != 0)
    throw std::logic_error("step expects the gauge at site 0, found " + std::to_string(mps.gauge_position()));
  if (mps.local_dim() != gates.local_dim()) throw std::invalid_argument("gate and MPS local dimensions differ");
}

int last_odd_bond(int n) { return (n - 2) % 2 == 0 ? n - 2 : n - 3; }
int last_even_bond(int n) { return (n - 2) % 2 == 1 ? n - 2 : n - 3; }

}  // namespace

GateSet GateSet::real_time(double dt, int local_dim) {
  if (!(dt >= 0.0)) throw std::invalid_argument("time step must be non-negative");
  GateSet g;
  g.dt_ = dt;
  g.local_dim_ = local_dim;
  g.hop_ = exponentiate(bond_hopping(local_dim), cplx(0.0, -dt), local_dim);
  return g;
}

GateSet GateSet::imaginary_time(double tau, int local_dim) {
  if (!(tau > 0.0)) throw std::invalid_argument("imaginary time step must be positive");
  GateSet g;
  g.dt_ = tau;
  g.local_dim_ = local_dim;
  g.imaginary_ = true;
  g.hop_ = exponentiate(bond_hopping(local_dim), cplx(-tau, 0.0), local_dim);
  return g;
}

std::vector<cplx> GateSet::one_site_phase(double u) const {
  std::vector<cplx> c(local_dim_);
  const cplx z = imaginary_ ? cplx(-dt_, 0.0) : cplx(0.0, -dt_);
  for (int n = 0; n < local_dim_; ++n) c[n] = std::exp(z * (u * n * (n - 1) / 4.0));
  return c;
}

void step(Mps& mps, double u_n, double u_np1, const GateSet& gates) {
  require_gauge(mps, gates);
  const int n = mps.length();
  const auto c_n = gates.one_site_phase(u_n);
  const auto c_np1 = gates.one_site_phase(u_np1);
  const Eigen::MatrixXcd forward = with_phases(gates.hop_gate(), c_n, true);
  const Eigen::MatrixXcd backward = with_phases(gates.hop_gate(), c_np1, false);

  for (int b = 0; b + 1 < n; b += 2) {
    mps.move_center(b);
    mps.apply_two_site_gate(b, forward, GaugeDirection::right);
  }
  mps.move_center(n - 1);
  mps.apply_one_site_diagonal(n - 1, n % 2 == 0 ? c_np1 : c_n);
  for (int b = last_even_bond(n); b >= 1; b -= 2) {
    mps.move_center(b + 1);
    mps.apply_two_site_gate(b, backward, GaugeDirection::left);
  }
  mps.move_center(0);
  mps.apply_one_site_diagonal(0, c_np1);
  if (gates.imaginary()) mps.normalize();
}

void step_adjoint(Mps& mps, double u_n, double u_np1, const GateSet& gates) {
  require_gauge(mps, gates);
  const int n = mps.length();
  const auto c_n = conj(gates.one_site_phase(u_n));
  const auto c_np1 = conj(gates.one_site_phase(u_np1));
  const Eigen::MatrixXcd hop_dag = gates.hop_gate().adjoint();
  const Eigen::MatrixXcd forward_dag = with_phases(hop_dag, c_n, false);
  const Eigen::MatrixXcd backward_dag = with_phases(hop_dag, c_np1, true);

  mps.apply_one_site_diagonal(0, c_np1);
  for (int b = 1; b + 1 < n; b += 2) {
    mps.move_center(b);
    mps.apply_two_site_gate(b, backward_dag, GaugeDirection::right);
  }
  mps.move_center(n - 1);
  mps.apply_one_site_diagonal(n - 1, n % 2 == 0 ? c_np1 : c_n);
  for (int b = last_odd_bond(n); b >= 0; b -= 2) {
    mps.move_center(b + 1);
    mps.apply_two_site_gate(b, forward_dag, GaugeDirection::left);
  }
  mps.move_center(0);
  if (gates.imaginary()) mps.normalize();
}

void write_step_record(std::ostream& os, const StepRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "{\"step\":%zu,\"time\":%.17g,\"u\":%.17g,\"norm\":%.17g,\"truncation\":%.6e",
                r.step, r.time, r.u, r.norm, r.truncation);
  os << buf;
  if (r.fidelity) {
    std::snprintf(buf, sizeof buf, ",\"fidelity\":%.17g", *r.fidelity);
    os << buf;
  }
  if (r.rho) {
    std::snprintf(buf, sizeof buf, ",\"rho\":%.17g", *r.rho);
    os << buf;
  }
  if (r.eta) {
    std::snprintf(buf, sizeof buf, ",\"eta\":%.17g", *r.eta);
    os << buf;
  }
  if (!r.occupations.empty()) {
    os << ",\"occupations\":[";
    for (std::size_t i = 0; i < r.occupations.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", r.occupations[i]);
      os << buf;
    }
    os << "]";
  }
  os << "}\n";
}

Trajectory propagate(Mps mps, const ControlGrid& controls, const GateSet& gates, const PropagateOptions& options) {
  controls.validate();
  if (std::abs(controls.dt - gates.dt()) > 1e-15 * std::max(1.0, controls.dt) || gates.imaginary())
    throw std::invalid_argument("gate set does not match the control grid time step");
  Trajectory traj;
  const Eigen::MatrixXcd nop = number_operator(mps.local_dim());
  auto record = [&](std::size_t j) {
    StepRecord r;
    r.step = j;
    r.time = controls.time(j);
    r.u = controls.values[j];
    r.norm = mps.norm();
    r.truncation = mps.log_truncation();
    if (options.target) r.fidelity = std::norm(overlap(*options.target, mps));
    if (options.record_occupations)
      for (cplx v : local_expectations(mps, nop)) r.occupations.push_back(v.real());
    if (options.hook) options.hook(mps, r);
    if (!traj.truncation_alarm && r.truncation > options.truncation_alarm) {
      traj.truncation_alarm = true;
      char buf[160];
      std::snprintf(buf, sizeof buf, "discarded weight %.3e exceeds alarm %.3e at step %zu", r.truncation,
                    options.truncation_alarm, j);
      traj.warning = buf;
    }
    if (options.jsonl) write_step_record(*options.jsonl, r);
    traj.records.push_back(std::move(r));
  };
  record(0);
  for (std::size_t j = 0; j + 1 < controls.size(); ++j) {
    step(mps, controls.values[j], controls.values[j + 1], gates);
    record(j + 1);
  }
  traj.final_state = std::move(mps);
  return traj;
}

double energy(const Mps& mps, double u) {
  const int d = mps.local_dim();
  const Eigen::MatrixXcd hop = bond_hopping(d).cast<cplx>();
  double e = 0.0;
  for (cplx v : bond_matrix_elements(mps, mps, hop)) e += v.real();
  const auto w = interaction_diagonal(d);
  e += u * cross_diagonal_sum(mps, mps, w).real();
  return e / overlap(mps, mps).real();
}

ImaginaryTimeResult ground_state_imaginary(std::span<const int> seed, double u, int local_dim,
                                           const ImaginaryTimeOptions& options) {
  if (options.tau_schedule.empty()) throw std::invalid_argument("empty imaginary-time schedule");
  ImaginaryTimeResult res;
  res.state = Mps::product_state(seed, local_dim, options.caps);
  double previous = energy(res.state, u);
  res.energy_trace.push_back(previous);
  for (double tau : options.tau_schedule) {
    const GateSet gates = GateSet::imaginary_time(tau / 2.0, local_dim);
    bool converged = false;
    int sweeps = 0;
    for (; sweeps < options.max_sweeps_per_stage; ++sweeps) {
      step(res.state, u, u, gates);
      step_adjoint(res.state, u, u, gates);
      ++res.sweeps;
      const double e = energy(res.state, u);
      res.energy_trace.push_back(e);
      const double change = std::abs(e - previous);
      previous = e;
      if (change <= options.tolerance * std::max(1.0, std::abs(e))) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw ConvergenceError("imaginary-time search did not converge at tau = " + std::to_string(tau),
                             res.energy_trace);
    if (sweeps == 0) break;  // already at the fixed point of this stage
  }
  res.energy = previous;
  return res;
}

}  // namespace bhc
