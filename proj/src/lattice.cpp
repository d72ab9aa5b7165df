#include "bhc/lattice.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/fpclassify.hpp>  // pchip.hpp in Boost 1.74 needs isnan in scope
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace bhc {

using std::numbers::pi;

OutOfRangeDepth::OutOfRangeDepth(double depth)
    : std::out_of_range("longitudinal depth " + std::to_string(depth) +
                        " E_R outside the modelled range [2, 13.5] E_R (maximally allowed v_x = 13.5 E_R)"),
      depth_(depth) {}

double LatticeParams::wavenumber() const { return pi / lattice_spacing(); }

double LatticeParams::recoil_energy() const {
  const double a = lattice_spacing();
  return si::hbar * si::hbar * pi * pi / (2.0 * atom_mass * a * a);
}

double LatticeParams::coupling_3d() const {
  return 4.0 * pi * si::hbar * si::hbar * scattering_length / atom_mass;
}

void LatticeParams::validate() const {
  if (!(laser_wavelength > 0.0)) throw std::invalid_argument("laser wavelength must be positive");
  if (!(atom_mass > 0.0)) throw std::invalid_argument("atom mass must be positive");
  if (!(scattering_length > 0.0))
    throw std::invalid_argument("scattering length must be positive (repulsive interactions)");
  if (!(transverse_depth_y >= kMinDepth) || !(transverse_depth_z >= kMinDepth))
    throw std::invalid_argument("transverse depths must be at least 2 E_R");
}

std::string LatticeParams::canonical() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "wavelength_m=%.17g;mass_kg=%.17g;scattering_length_m=%.17g;vy_ER=%.17g;vz_ER=%.17g",
                laser_wavelength, atom_mass, scattering_length, transverse_depth_y,
                transverse_depth_z);
  return buf;
}

int BandSolution::cutoff() const {
  if (bloch_coefficients.empty() || bloch_coefficients[0].empty()) return 0;
  return static_cast<int>(bloch_coefficients[0][0].size() / 2);
}

BandSolution solve_bands(const LatticeParams& params, double depth, int n_plane_waves, int n_k) {
  (void)params;  // band structure in E_R units depends only on the depth
  if (!(depth >= 0.0)) throw std::invalid_argument("lattice depth must be non-negative");
  if (n_plane_waves < 7 || n_plane_waves % 2 == 0)
    throw std::invalid_argument("number of plane waves must be odd and at least 7");
  if (n_k < 2) throw std::invalid_argument("need at least two quasimomenta");

  const int m_max = n_plane_waves / 2;
  const int n_bands = 3;
  BandSolution out;
  out.depth = depth;
  out.quasimomenta.resize(n_k);
  out.band_energies.resize(n_k);
  out.bloch_coefficients.resize(n_k);

  Eigen::MatrixXd h(n_plane_waves, n_plane_waves);
  for (int kk = 0; kk < n_k; ++kk) {
    const double q = -1.0 + (2.0 * kk + 1.0) / n_k;
    out.quasimomenta[kk] = q;
    h.setZero();
    for (int a = 0; a < n_plane_waves; ++a) {
      const double kinetic = q + 2.0 * (a - m_max);
      h(a, a) = kinetic * kinetic + depth / 2.0;
      if (a + 1 < n_plane_waves) h(a, a + 1) = h(a + 1, a) = -depth / 4.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) {
      throw std::runtime_error("central-equation eigensolve failed at depth " +
                               std::to_string(depth) + " E_R, q = " + std::to_string(q));
    }
    out.band_energies[kk].resize(n_bands);
    out.bloch_coefficients[kk].resize(n_bands);
    for (int n = 0; n < n_bands; ++n) {
      out.band_energies[kk][n] = es.eigenvalues()(n);
      Eigen::VectorXd c = es.eigenvectors().col(n);
      // Bloch function real and positive at the site center x = 0.
      const double at_center = c.sum();
      if (at_center < 0.0) c = -c;
      out.bloch_coefficients[kk][n].assign(c.data(), c.data() + c.size());
    }
  }
  return out;
}

std::vector<double> RealSpaceGrid::points() const {
  const int n = sites_wide * points_per_site + 1;
  std::vector<double> x(n);
  const double start = center - sites_wide / 2.0;
  for (int j = 0; j < n; ++j) x[j] = start + static_cast<double>(j) / points_per_site;
  return x;
}

double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t j = 1; j + 1 < f.size(); ++j) s += f[j];
  return s * h;
}

namespace {

// Unnormalized sum_q exp(-i q pi s) weight_q phi_q(x) on the grid, where
// phi_q is the lowest-band Bloch function. Returns real and imaginary parts.
void bloch_sum(const BandSolution& band, int site_index, const std::vector<double>& x,
               bool energy_weighted, std::vector<double>& re, std::vector<double>& im) {
  using cplx = std::complex<double>;
  const int m_max = band.cutoff();
  re.assign(x.size(), 0.0);
  im.assign(x.size(), 0.0);
  for (std::size_t kk = 0; kk < band.quasimomenta.size(); ++kk) {
    const double q = band.quasimomenta[kk];
    const auto& c = band.bloch_coefficients[kk][0];
    const double weight = energy_weighted ? band.band_energies[kk][0] : 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double xi = pi * x[j];
      const cplx step = std::polar(1.0, 2.0 * xi);
      cplx phase = std::polar(1.0, q * xi - q * pi * site_index - 2.0 * m_max * xi);
      cplx acc = 0.0;
      for (double cm : c) {
        acc += cm * phase;
        phase *= step;
      }
      re[j] += weight * acc.real();
      im[j] += weight * acc.imag();
    }
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct WannierPair {
  WannierFunction w;
  double normalization = 1.0;  // multiply the raw Bloch sum by this
};

WannierPair wannier_on_grid(const BandSolution& band, int site_index, const RealSpaceGrid& grid) {
  if (band.quasimomenta.empty() || band.n_bands() < 1)
    throw std::invalid_argument("band solution has no populated lowest band");
  WannierPair out;
  out.w.depth = band.depth;
  out.w.site_index = site_index;
  out.w.grid = grid.points();
  std::vector<double> re, im;
  bloch_sum(band, site_index, out.w.grid, false, re, im);
  std::vector<double> sq(re.size());
  for (std::size_t j = 0; j < re.size(); ++j) sq[j] = re[j] * re[j] + im[j] * im[j];
  const double norm2 = trapezoid(sq, grid.step());
  if (!(norm2 > 0.0)) throw std::runtime_error("Wannier function vanishes on the sampling grid");
  out.normalization = 1.0 / std::sqrt(norm2);
  for (auto& v : re) v *= out.normalization;
  for (auto& v : im) v *= out.normalization;
  out.w.max_imaginary = max_abs(im);
  if (out.w.max_imaginary > 1e-6) {
    throw std::runtime_error("Wannier phase fixing left an imaginary part of " +
                             std::to_string(out.w.max_imaginary) + " at depth " +
                             std::to_string(band.depth) + " E_R");
  }
  out.w.values = std::move(re);
  return out;
}

}  // namespace

WannierFunction build_wannier(const BandSolution& band, int site_index,
                              std::optional<RealSpaceGrid> grid) {
  RealSpaceGrid g = grid.value_or(RealSpaceGrid{});
  if (!grid) g.center = site_index;
  return wannier_on_grid(band, site_index, g).w;
}

std::vector<double> apply_single_particle(const BandSolution& band, int site_index,
                                          const RealSpaceGrid& grid, double normalization) {
  std::vector<double> re, im;
  bloch_sum(band, site_index, grid.points(), true, re, im);
  for (auto& v : re) v *= normalization;
  return re;
}

double quartic_integral(const WannierFunction& w) {
  if (w.grid.size() < 2) return 0.0;
  std::vector<double> f(w.values.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double s = w.values[j] * w.values[j];
    f[j] = s * s;
  }
  return trapezoid(f, w.grid[1] - w.grid[0]);
}

namespace {

double quartic_factor(double depth, const BandSettings& s) {
  const BandSolution band = solve_bands(LatticeParams{}, depth, s.n_plane_waves, s.n_k);
  RealSpaceGrid grid{0.0, s.sites_wide, s.points_per_site};
  return quartic_integral(build_wannier(band, 0, grid));
}

}  // namespace

HubbardModel::HubbardModel(LatticeParams params, BandSettings settings)
    : params_(params), settings_(settings) {
  params_.validate();
  factor_y_ = quartic_factor(params_.transverse_depth_y, settings_);
  factor_z_ = params_.transverse_depth_z == params_.transverse_depth_y
                  ? factor_y_
                  : quartic_factor(params_.transverse_depth_z, settings_);
}

HubbardEnergies HubbardModel::evaluate(double depth) const {
  const BandSolution band =
      solve_bands(params_, depth, settings_.n_plane_waves, settings_.n_k);
  // Common window centered between sites 0 and 1 for the hopping integral.
  const RealSpaceGrid pair_grid{0.5, settings_.sites_wide, settings_.points_per_site};
  const WannierPair w0 = wannier_on_grid(band, 0, pair_grid);
  const std::vector<double> hw1 = apply_single_particle(band, 1, pair_grid, w0.normalization);
  std::vector<double> integrand(hw1.size());
  for (std::size_t j = 0; j < hw1.size(); ++j) integrand[j] = w0.w.values[j] * hw1[j];

  const RealSpaceGrid site_grid{0.0, settings_.sites_wide, settings_.points_per_site};
  const double factor_x = quartic_integral(build_wannier(band, 0, site_grid));

  HubbardEnergies e;
  e.depth = depth;
  e.tunneling = -trapezoid(integrand, pair_grid.step());
  const double a = params_.lattice_spacing();
  e.onsite = 8.0 * (params_.scattering_length / a) * factor_x * factor_y_ * factor_z_ / pi;
  return e;
}

namespace {

void check_depth(double v_x) {
  if (!(v_x >= kMinDepth - 1e-12 && v_x <= kMaxDepth + 1e-12)) throw OutOfRangeDepth(v_x);
}

}  // namespace

double tunneling_energy(const LatticeParams& params, double v_x, const BandSettings& settings) {
  check_depth(v_x);
  return HubbardModel(params, settings).evaluate(v_x).tunneling;
}

double onsite_energy(const LatticeParams& params, double v_x, const BandSettings& settings) {
  check_depth(v_x);
  return HubbardModel(params, settings).evaluate(v_x).onsite;
}

// ---------------------------------------------------------------------------

struct ConstitutiveTable::Interp {
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  Pchip log_j, log_u, log_ratio, depth_of_log_ratio;

  static Pchip make(std::vector<double> x, std::vector<double> y) {
    return Pchip(std::move(x), std::move(y));
  }
};

namespace {

std::vector<double> logs(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::log(v[j]);
  return out;
}

}  // namespace

ConstitutiveTable::ConstitutiveTable(std::vector<double> vx, std::vector<double> jx,
                                     std::vector<double> u, double recoil_energy)
    : vx_(std::move(vx)), jx_(std::move(jx)), u_(std::move(u)), recoil_energy_(recoil_energy) {
  const std::size_t n = vx_.size();
  if (n < 4 || jx_.size() != n || u_.size() != n)
    throw std::invalid_argument("constitutive table needs at least four aligned samples");
  ratio_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(jx_[j] > 0.0) || !(u_[j] > 0.0))
      throw std::runtime_error("non-positive Hubbard energy at v_x = " + std::to_string(vx_[j]));
    ratio_[j] = u_[j] / jx_[j];
  }
  for (std::size_t j = 1; j < n; ++j) {
    if (!(vx_[j] > vx_[j - 1])) throw std::invalid_argument("depth grid must be increasing");
    if (!(ratio_[j] > ratio_[j - 1]))
      throw std::runtime_error("U/J_x not strictly increasing near v_x = " +
                               std::to_string(vx_[j]) + " E_R; band solver failure?");
    if (!(jx_[j] < jx_[j - 1]))
      throw std::runtime_error("J_x not strictly decreasing near v_x = " + std::to_string(vx_[j]));
    if (!(u_[j] >= u_[j - 1]))
      throw std::runtime_error("U decreasing near v_x = " + std::to_string(vx_[j]));
  }
  const auto log_ratio = logs(ratio_);
  interp_ = std::make_shared<Interp>(Interp{
      Interp::make(vx_, logs(jx_)), Interp::make(vx_, logs(u_)), Interp::make(vx_, log_ratio),
      Interp::make(log_ratio, vx_)});
}

namespace {

void check_table_depth(const std::vector<double>& vx, double v) {
  const double tol = 1e-9 * (vx.back() - vx.front());
  if (!(v >= vx.front() - tol && v <= vx.back() + tol)) throw OutOfRangeDepth(v);
}

}  // namespace

double ConstitutiveTable::ratio_at(double vx) const {
  check_table_depth(vx_, vx);
  return std::exp(interp_->log_ratio(std::clamp(vx, vx_.front(), vx_.back())));
}

double ConstitutiveTable::tunneling_at(double vx) const {
  check_table_depth(vx_, vx);
  return std::exp(interp_->log_j(std::clamp(vx, vx_.front(), vx_.back())));
}

double ConstitutiveTable::onsite_at(double vx) const {
  check_table_depth(vx_, vx);
  return std::exp(interp_->log_u(std::clamp(vx, vx_.front(), vx_.back())));
}

double ConstitutiveTable::depth_for_ratio(double u) const {
  const double tol = 1e-9 * u_max();
  if (!(u >= u_min() - tol && u <= u_max() + tol)) {
    throw std::out_of_range("control value u = " + std::to_string(u) + " outside [" +
                            std::to_string(u_min()) + ", " + std::to_string(u_max()) + "]");
  }
  const double lr = std::clamp(std::log(u), std::log(u_min()), std::log(u_max()));
  return interp_->depth_of_log_ratio(lr);
}

double ConstitutiveTable::tunneling_for_ratio(double u) const {
  return tunneling_at(depth_for_ratio(u));
}

void ConstitutiveTable::write(std::ostream& os, const std::string& key) const {
  os << "# schema: bhcontrol.lattice-table v1";
  if (!key.empty()) os << " key=" << key;
  os << "\n# vx_ER, Jx_ER, U_ER\n";
  char buf[128];
  for (std::size_t j = 0; j < vx_.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.12g, %.12g, %.12g\n", vx_[j], jx_[j], u_[j]);
    os << buf;
  }
}

ConstitutiveTable ConstitutiveTable::read(std::istream& is, double recoil_energy) {
  std::vector<double> vx, jx, u;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("vx_ER, Jx_ER, U_ER") != std::string::npos) header = true;
      continue;
    }
    double a = 0, b = 0, c = 0;
    if (std::sscanf(line.c_str(), "%lf , %lf , %lf", &a, &b, &c) != 3)
      throw std::runtime_error("malformed constitutive table row: " + line);
    vx.push_back(a);
    jx.push_back(b);
    u.push_back(c);
  }
  if (!header) throw std::runtime_error("constitutive table header missing");
  return ConstitutiveTable(std::move(vx), std::move(jx), std::move(u), recoil_energy);
}

ConstitutiveTable build_table(const LatticeParams& params, int n_samples,
                              const BandSettings& settings) {
  if (n_samples < 50) throw std::invalid_argument("constitutive table needs at least 50 samples");
  const HubbardModel model(params, settings);
  std::vector<double> vx(n_samples), jx(n_samples), u(n_samples);
  for (int j = 0; j < n_samples; ++j) {
    vx[j] = kMinDepth + (kMaxDepth - kMinDepth) * j / (n_samples - 1);
    const HubbardEnergies e = model.evaluate(vx[j]);
    jx[j] = e.tunneling;
    u[j] = e.onsite;
  }
  return ConstitutiveTable(std::move(vx), std::move(jx), std::move(u), params.recoil_energy());
}

std::string table_cache_key(const LatticeParams& params, int n_samples,
                            const BandSettings& settings) {
  std::ostringstream text;
  text << params.canonical() << ";samples=" << n_samples << ";pw=" << settings.n_plane_waves
       << ";nk=" << settings.n_k << ";sites=" << settings.sites_wide
       << ";pps=" << settings.points_per_site;
  // FNV-1a, 64 bit
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ConstitutiveTable load_or_build_table(const LatticeParams& params, int n_samples,
                                      const std::filesystem::path& cache_dir,
                                      const BandSettings& settings) {
  namespace fs = std::filesystem;
  const std::string key = table_cache_key(params, n_samples, settings);
  const fs::path file = cache_dir / ("lattice-table-" + key + ".txt");
  if (fs::exists(file)) {
    std::ifstream in(file);
    try {
      return ConstitutiveTable::read(in, params.recoil_energy());
    } catch (const std::exception&) {
      // fall through and rebuild a corrupt entry
    }
  }
  ConstitutiveTable table = build_table(params, n_samples, settings);
  fs::create_directories(cache_dir);
  const fs::path tmp = file.string() + ".tmp" + std::to_string(std::hash<std::string>{}(key + std::to_string(reinterpret_cast<std::uintptr_t>(&table))));
  {
    std::ofstream out(tmp);
    table.write(out, key);
    if (!out) throw std::runtime_error("cannot write constitutive table cache " + tmp.string());
  }
  fs::rename(tmp, file);
  // Re-read so that cached and freshly built tables are numerically identical.
  std::ifstream in(file);
  return ConstitutiveTable::read(in, params.recoil_energy());
}

double si_duration(const ConstitutiveTable& table, double dt, const std::vector<double>& controls) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  double inverse_sum = 0.0;
  for (double u : controls) inverse_sum += 1.0 / table.tunneling_for_ratio(u);
  const double joules_inverse = inverse_sum / table.recoil_energy();
  return si::hbar * dt * joules_inverse;
}

}  // namespace bhc
