#pragma once

// Figures of merit for the superfluid to Mott transfer: fidelity, density of
// defects rho = (1/N) sum_i |<n_i> - 1| and rescaled variance
// eta = (1/N) sum_i var(n_i) / var_0(n_i).

#include <iosfwd>
#include <span>
#include <vector>

#include "bhc/controls.hpp"
#include "bhc/fock.hpp"
#include "bhc/mps.hpp"

namespace bhc {

inline constexpr double kFidelityClip = 1e-12;

/// Clips roundoff into [0, 1]; throws std::domain_error beyond the clip tolerance.
double clip_fidelity(double f);

double fidelity(const Mps& state, const Mps& target);
double fidelity(const DenseState& state, const DenseState& target);

struct SiteStatistics {
  std::vector<double> occupations;
  std::vector<double> variances;
};

SiteStatistics site_statistics(const Mps& state);
SiteStatistics site_statistics(const DenseState& state);

double density_of_defects(std::span<const double> occupations);
double density_of_defects(const Mps& state);
double density_of_defects(const DenseState& state);

/// Throws std::invalid_argument if any reference variance is not positive.
double rescaled_variance(std::span<const double> variances, std::span<const double> reference_variances);
double rescaled_variance(const Mps& state, std::span<const double> reference_variances);

struct PhaseImprintResult {
  double max_deviation = 0.0;     // over components occupied in the input
  double leakage = 0.0;           // largest amplitude outside the input
  std::vector<cplx> predicted;    // on the input support
  std::vector<cplx> evolved;
};

/// Evolves a Fock product state with `steps` split-step steps at constant u
/// and compares it with the pure interaction phase
/// exp(-i u dt/2 sum_i n_i (n_i - 1)) per step.
PhaseImprintResult phase_imprint_check(std::span<const int> occupations, double u, double dt, int steps,
                                       int local_dim = 5);

struct MeritSeries {
  std::vector<double> times;
  std::vector<double> fidelity;
  std::vector<double> rho;
  std::vector<double> eta;
  std::vector<std::vector<double>> occupations;  // [time][site]
  std::vector<std::vector<double>> variances;
  std::vector<double> reference_variances;       // from the initial state
};

/// Propagates `initial` along the controls and samples all figures of merit
/// at every grid point.
MeritSeries merit_series(const Mps& initial, const Mps& target, const ControlGrid& controls,
                         TruncationCaps caps = {});

/// "t,F,rho,eta" rows after a schema comment.
void write_merit_csv(std::ostream& os, const MeritSeries& series);
/// "t,n_1,...,n_N" rows after a schema comment.
void write_occupations_csv(std::ostream& os, const MeritSeries& series);

}  // namespace bhc
