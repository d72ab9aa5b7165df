#pragma once

// Split-step propagation of an MPS under H(u) = H_drift + u H_int.
//
// One step U_n = C(u_{n+1}) D C(u_n) with C(u) = exp(-i u H_int dt/2) and the
// drift split as exp(-i H_even dt) exp(-i H_odd dt). The sweep groups each
// odd-bond hop with the C(u_n) factors of its two sites (left to right), and
// each even-bond hop with the C(u_{n+1}) factors (right to left); the chain
// ends receive the remaining one-site factors.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bhc/controls.hpp"
#include "bhc/mps.hpp"

namespace bhc {

/// Two-site hopping term -(a_1^dag a_2 + a_2^dag a_1) in a d-state local space.
Eigen::MatrixXd bond_hopping(int local_dim);
/// Diagonal of the one-site interaction n(n-1)/2.
std::vector<double> interaction_diagonal(int local_dim);
/// Occupation number operator.
Eigen::MatrixXcd number_operator(int local_dim);

class GateSet {
 public:
  /// exp(-i h dt) gates for real time.
  static GateSet real_time(double dt, int local_dim);
  /// exp(-h tau) gates for imaginary time.
  static GateSet imaginary_time(double tau, int local_dim);

  double dt() const { return dt_; }
  int local_dim() const { return local_dim_; }
  bool imaginary() const { return imaginary_; }
  const Eigen::MatrixXcd& hop_gate() const { return hop_; }
  /// Per-site factor of C(u): exp(-i u n(n-1) dt/4), or exp(-u n(n-1) tau/4).
  std::vector<cplx> one_site_phase(double u) const;

 private:
  double dt_ = 0.0;
  int local_dim_ = 0;
  bool imaginary_ = false;
  Eigen::MatrixXcd hop_;
};

/// One full step psi_n -> U_n psi_n. Gauge must be (and ends) at site 0.
void step(Mps& mps, double u_n, double u_np1, const GateSet& gates);
/// psi_{n+1} -> U_n^dag psi_{n+1}, the same gates in reverse order, conjugated.
void step_adjoint(Mps& mps, double u_n, double u_np1, const GateSet& gates);

struct StepRecord {
  std::size_t step = 0;
  double time = 0.0;
  double u = 0.0;
  double norm = 1.0;
  double truncation = 0.0;  // accumulated discarded weight
  std::optional<double> fidelity;
  std::vector<double> occupations;
  std::optional<double> rho;
  std::optional<double> eta;
};

struct PropagateOptions {
  const Mps* target = nullptr;       // records fidelity when set
  bool record_occupations = false;
  /// Extra observables filled by the caller (rho, eta).
  std::function<void(const Mps&, StepRecord&)> hook;
  double truncation_alarm = 1e-6;
  std::ostream* jsonl = nullptr;     // streamed per-step records
};

struct Trajectory {
  Mps final_state;
  std::vector<StepRecord> records;  // one per grid point, including t = 0
  bool truncation_alarm = false;
  std::string warning;
};

Trajectory propagate(Mps mps, const ControlGrid& controls, const GateSet& gates,
                     const PropagateOptions& options = {});

void write_step_record(std::ostream& os, const StepRecord& record);

/// Energy <H(u)> with H = sum_bonds h + u sum_i n_i(n_i-1)/2.
double energy(const Mps& mps, double u);

struct ImaginaryTimeOptions {
  std::vector<double> tau_schedule{0.2, 0.05, 0.01, 0.002};
  double tolerance = 1e-10;  // relative energy change per sweep
  int max_sweeps_per_stage = 20000;
  TruncationCaps caps{};
};

struct ImaginaryTimeResult {
  Mps state;
  double energy = 0.0;
  std::vector<double> energy_trace;  // after every sweep
  int sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), energy_trace(std::move(trace)) {}
  std::vector<double> energy_trace;
};

/// Imaginary-time projection from a product seed. Each sweep is a step
/// followed by its mirrored step, so the pair is symmetric in tau.
ImaginaryTimeResult ground_state_imaginary(std::span<const int> seed, double u, int local_dim,
                                           const ImaginaryTimeOptions& options = {});

}  // namespace bhc
