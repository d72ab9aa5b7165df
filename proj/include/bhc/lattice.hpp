#pragma once

// Optical-lattice constitutive relations: Bloch bands of the sin^2 lattice,
// lowest-band Wannier functions, and the Hubbard energies J_x(v_x), U(v_x)
// they define. Depths are in units of the recoil energy E_R, lengths in units
// of the lattice spacing a unless a name says otherwise.

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bhc {

namespace si {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double planck = 6.62607015e-34;     // J s
inline constexpr double amu = 1.66053906660e-27;     // kg
inline constexpr double bohr_radius = 5.29177210903e-11;  // m
}  // namespace si

/// Lowest and highest longitudinal depth (E_R) for which the single-band
/// description is used.
inline constexpr double kMinDepth = 2.0;
inline constexpr double kMaxDepth = 13.5;

class OutOfRangeDepth : public std::out_of_range {
 public:
  explicit OutOfRangeDepth(double depth);
  double depth() const { return depth_; }

 private:
  double depth_;
};

struct LatticeParams {
  double laser_wavelength = 1064e-9;             // m
  double atom_mass = 87.0 * si::amu;             // kg
  double scattering_length = 101.0 * si::bohr_radius;  // m
  double transverse_depth_y = 20.0;              // E_R
  double transverse_depth_z = 20.0;              // E_R

  static LatticeParams rubidium87() { return {}; }

  double lattice_spacing() const { return laser_wavelength / 2.0; }
  double wavenumber() const;      // k_l = pi / a, 1/m
  double recoil_energy() const;   // hbar^2 pi^2 / (2 m a^2), J
  double coupling_3d() const;     // 4 pi hbar^2 a_s / m, J m^3

  void validate() const;
  /// Canonical text used for cache keys and config echo.
  std::string canonical() const;
};

struct BandSettings {
  int n_plane_waves = 21;
  int n_k = 64;
  int sites_wide = 8;
  int points_per_site = 512;
};

/// Bloch bands of -d^2/dxi^2 + v sin^2(xi) with xi = k_l x and quasimomentum
/// q = k / k_l in (-1, 1). The periodic part of each Bloch function is
/// sum_m c_m exp(2 i m xi), m = -M..M, with real coefficients.
struct BandSolution {
  double depth = 0.0;
  std::vector<double> quasimomenta;               // q, midpoint grid
  std::vector<std::vector<double>> band_energies; // [k][band], E_R
  std::vector<std::vector<std::vector<double>>> bloch_coefficients;  // [k][band][m]
  int n_bands() const { return band_energies.empty() ? 0 : static_cast<int>(band_energies[0].size()); }
  int cutoff() const;  // M
};

BandSolution solve_bands(const LatticeParams& params, double depth, int n_plane_waves = 21,
                         int n_k = 64);

struct RealSpaceGrid {
  double center = 0.0;  // in lattice spacings
  int sites_wide = 8;
  int points_per_site = 512;

  std::vector<double> points() const;  // in lattice spacings
  double step() const { return 1.0 / points_per_site; }
};

struct WannierFunction {
  double depth = 0.0;
  int site_index = 0;
  std::vector<double> grid;    // x / a
  std::vector<double> values;  // normalized so that sum over grid of w^2 dx = 1, x in units of a
  double max_imaginary = 0.0;  // before discarding the imaginary part
};

/// Lowest-band Wannier function centered on `site_index`. The grid defaults to
/// a window centered on that site.
WannierFunction build_wannier(const BandSolution& band, int site_index,
                              std::optional<RealSpaceGrid> grid = std::nullopt);

/// The one-particle Hamiltonian applied to a Wannier function, evaluated on the
/// same grid (E_R units).
std::vector<double> apply_single_particle(const BandSolution& band, int site_index,
                                          const RealSpaceGrid& grid, double normalization);

double trapezoid(const std::vector<double>& f, double h);

/// Quartic overlap integral of a normalized Wannier function, in units of 1/a.
double quartic_integral(const WannierFunction& w);

struct HubbardEnergies {
  double depth = 0.0;
  double tunneling = 0.0;  // J_x, E_R
  double onsite = 0.0;     // U, E_R
  double ratio() const { return onsite / tunneling; }
};

/// Precomputed transverse factors and settings for repeated J/U evaluation.
class HubbardModel {
 public:
  explicit HubbardModel(LatticeParams params, BandSettings settings = {});

  const LatticeParams& params() const { return params_; }
  const BandSettings& settings() const { return settings_; }

  /// No range check; any depth >= 0.
  HubbardEnergies evaluate(double depth) const;

  double transverse_factor_y() const { return factor_y_; }
  double transverse_factor_z() const { return factor_z_; }

 private:
  LatticeParams params_;
  BandSettings settings_;
  double factor_y_ = 0.0;
  double factor_z_ = 0.0;
};

/// J_x(v_x) in E_R; throws OutOfRangeDepth outside [2, 13.5].
double tunneling_energy(const LatticeParams& params, double v_x, const BandSettings& settings = {});
/// U(v_x, v_y, v_z) in E_R; throws OutOfRangeDepth outside [2, 13.5].
double onsite_energy(const LatticeParams& params, double v_x, const BandSettings& settings = {});

/// Sampled constitutive relations with monotone cubic interpolation of
/// log J, log U and log(U/J) against v_x, and of v_x against log(U/J).
class ConstitutiveTable {
 public:
  ConstitutiveTable(std::vector<double> vx, std::vector<double> jx, std::vector<double> u,
                    double recoil_energy);

  const std::vector<double>& vx_grid() const { return vx_; }
  const std::vector<double>& jx_values() const { return jx_; }
  const std::vector<double>& u_values() const { return u_; }
  const std::vector<double>& ratio() const { return ratio_; }
  double recoil_energy() const { return recoil_energy_; }

  double u_min() const { return ratio_.front(); }
  double u_max() const { return ratio_.back(); }

  double ratio_at(double vx) const;
  double tunneling_at(double vx) const;  // E_R
  double onsite_at(double vx) const;     // E_R
  double depth_for_ratio(double u) const;
  double tunneling_for_ratio(double u) const;  // E_R

  void write(std::ostream& os, const std::string& key = {}) const;
  static ConstitutiveTable read(std::istream& is, double recoil_energy);

 private:
  struct Interp;
  std::vector<double> vx_, jx_, u_, ratio_;
  double recoil_energy_;
  std::shared_ptr<const Interp> interp_;
};

ConstitutiveTable build_table(const LatticeParams& params, int n_samples,
                              const BandSettings& settings = {});

/// Cache key: content hash of the parameters, settings and sample count.
std::string table_cache_key(const LatticeParams& params, int n_samples, const BandSettings& settings);

/// Loads the table from `cache_dir` when present, builds and stores it
/// otherwise (write to a temporary file, then rename).
ConstitutiveTable load_or_build_table(const LatticeParams& params, int n_samples,
                                      const std::filesystem::path& cache_dir,
                                      const BandSettings& settings = {});

/// SI duration hbar * dt * sum_n 1 / J_x(u_n), in seconds.
double si_duration(const ConstitutiveTable& table, double dt, const std::vector<double>& controls);

}  // namespace bhc
