#include "bhc/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bhc/tebd.hpp"

namespace bhc {

double clip_fidelity(double f) {
  if (!(f >= -kFidelityClip && f <= 1.0 + kFidelityClip))
    throw std::domain_error("fidelity " + std::to_string(f) + " outside [0, 1] beyond roundoff");
  return std::clamp(f, 0.0, 1.0);
}

double fidelity(const Mps& state, const Mps& target) { return clip_fidelity(std::norm(overlap(target, state))); }

double fidelity(const DenseState& state, const DenseState& target) {
  return clip_fidelity(std::norm(inner(target, state)));
}

SiteStatistics site_statistics(const Mps& state) {
  const int d = state.local_dim();
  const Eigen::MatrixXcd n = number_operator(d);
  const Eigen::MatrixXcd n2 = n * n;
  const auto mean = local_expectations(state, n);
  const auto square = local_expectations(state, n2);
  const double norm2 = overlap(state, state).real();
  SiteStatistics s;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double m = mean[i].real() / norm2;
    s.occupations.push_back(m);
    s.variances.push_back(std::max(0.0, square[i].real() / norm2 - m * m));
  }
  return s;
}

SiteStatistics site_statistics(const DenseState& state) {
  const FockBasis& b = *state.basis;
  const Eigen::VectorXd p = state.amplitudes.cwiseAbs2();
  const double norm2 = p.sum();
  SiteStatistics s;
  for (int i = 0; i < b.n_sites(); ++i) {
    const Eigen::VectorXd n = b.site_occupations(i);
    const double m = p.dot(n) / norm2;
    s.occupations.push_back(m);
    s.variances.push_back(std::max(0.0, p.dot(n.cwiseProduct(n)) / norm2 - m * m));
  }
  return s;
}

double density_of_defects(std::span<const double> occupations) {
  if (occupations.empty()) throw std::invalid_argument("no sites");
  double s = 0.0;
  for (double n : occupations) s += std::abs(n - 1.0);
  return s / static_cast<double>(occupations.size());
}

double density_of_defects(const Mps& state) { return density_of_defects(site_statistics(state).occupations); }
double density_of_defects(const DenseState& state) { return density_of_defects(site_statistics(state).occupations); }

double rescaled_variance(std::span<const double> variances, std::span<const double> reference) {
  if (variances.size() != reference.size() || variances.empty())
    throw std::invalid_argument("variance and reference lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < variances.size(); ++i) {
    if (!(reference[i] > 0.0))
      throw std::invalid_argument("reference variance at site " + std::to_string(i) +
                                  " is not positive (degenerate initial state)");
    s += variances[i] / reference[i];
  }
  return s / static_cast<double>(variances.size());
}

double rescaled_variance(const Mps& state, std::span<const double> reference) {
  return rescaled_variance(site_statistics(state).variances, reference);
}

PhaseImprintResult phase_imprint_check(std::span<const int> occupations, double u, double dt, int steps,
                                       int local_dim) {
  if (steps < 1) throw std::invalid_argument("phase imprint check needs at least one step");
  const int n_sites = static_cast<int>(occupations.size());
  const int n_particles = std::accumulate(occupations.begin(), occupations.end(), 0);
  auto basis = std::make_shared<const FockBasis>(n_sites, n_particles, std::min(n_particles, local_dim - 1));
  Mps mps = Mps::product_state(occupations, local_dim, TruncationCaps::unlimited());
  const GateSet gates = GateSet::real_time(dt, local_dim);
  for (int k = 0; k < steps; ++k) step(mps, u, u, gates);
  const DenseState evolved = mps.to_dense(basis);
  double interaction = 0.0;
  for (int n : occupations) interaction += 0.5 * n * (n - 1);
  const cplx predicted = std::polar(1.0, -u * dt * interaction * steps);
  const std::size_t idx = *basis->index_of(occupations);
  PhaseImprintResult res;
  res.predicted.push_back(predicted);
  res.evolved.push_back(evolved.amplitudes(idx));
  res.max_deviation = std::abs(evolved.amplitudes(idx) - predicted);
  for (std::size_t k = 0; k < basis->size(); ++k)
    if (k != idx) res.leakage = std::max(res.leakage, std::abs(evolved.amplitudes(k)));
  return res;
}

MeritSeries merit_series(const Mps& initial, const Mps& target, const ControlGrid& controls, TruncationCaps caps) {
  Mps start = initial;
  start.set_caps(caps);
  start.move_center(0);
  MeritSeries series;
  series.reference_variances = site_statistics(start).variances;
  PropagateOptions opt;
  opt.target = &target;
  opt.hook = [&](const Mps& psi, StepRecord& r) {
    const SiteStatistics s = site_statistics(psi);
    r.rho = density_of_defects(s.occupations);
    r.eta = rescaled_variance(s.variances, series.reference_variances);
    r.occupations = s.occupations;
    series.variances.push_back(s.variances);
  };
  const Trajectory traj = propagate(start, controls, GateSet::real_time(controls.dt, start.local_dim()), opt);
  for (const auto& r : traj.records) {
    series.times.push_back(r.time);
    series.fidelity.push_back(clip_fidelity(*r.fidelity));
    series.rho.push_back(*r.rho);
    series.eta.push_back(*r.eta);
    series.occupations.push_back(r.occupations);
  }
  return series;
}

void write_merit_csv(std::ostream& os, const MeritSeries& s) {
  os << "# schema: bhcontrol.merit v1\n";
  os << "t,F,rho,eta\n";
  char buf[128];
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12g,%.17g,%.17g,%.17g\n", s.times[k], s.fidelity[k], s.rho[k], s.eta[k]);
    os << buf;
  }
}

void write_occupations_csv(std::ostream& os, const MeritSeries& s) {
  os << "# schema: bhcontrol.occupations v1\n";
  os << "t";
  const std::size_t n = s.occupations.empty() ? 0 : s.occupations.front().size();
  for (std::size_t i = 0; i < n; ++i) os << ",n_" << i + 1;
  os << "\n";
  char buf[64];
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12g", s.times[k]);
    os << buf;
    for (double v : s.occupations[k]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace bhc
