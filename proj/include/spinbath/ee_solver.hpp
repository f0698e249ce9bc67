// ee_solver.hpp: electron-electron limited bath correlation time from a molecular
// lattice, with the delta-function and no-hyperfine bounds.

#pragma once

#include "spinbath/bath_spectrum.hpp"
#include "spinbath/constants.hpp"
#include "spinbath/spin_model.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace spinbath {

struct LatticeModel {
    std::array<Eigen::Vector3d, 3> cell;      ///< lattice vectors a, b, c in m
    std::vector<Eigen::Vector3d> sites;       ///< fractional coordinates
    std::vector<Eigen::Vector3d> axes;        ///< molecular axis per site, crystal frame
    double cutoff = 0.0;                      ///< m
    Eigen::Vector3d field_direction{0, 0, 1};  ///< crystal frame, normalized on use

    [[nodiscard]] double nearest_neighbour_distance() const;
    void validate() const;

    /// Copy with every length multiplied by `factor`.
    [[nodiscard]] LatticeModel dilated(double factor) const;
    [[nodiscard]] LatticeModel with_cutoff(double cutoff_m) const;
};

/// Simple cubic lattice, one site, axis along z.
LatticeModel cubic_lattice(double a, double cutoff, const Eigen::Vector3d& field = {0, 0, 1});

/// Field direction at polar angle theta_e from `axis` and azimuth phi, measured
/// from the component of `reference` perpendicular to the axis.
Eigen::Vector3d field_direction_from_axis(const Eigen::Vector3d& axis, const Eigen::Vector3d& reference,
                                          double theta_e, double phi);

struct PairGeometry {
    double r = 0.0;      ///< m
    double theta = 0.0;  ///< angle between the pair vector and the field
    std::size_t site = 0;
};

std::vector<PairGeometry> pair_geometry(const LatticeModel& lattice);

/// Quasi-static and flip-flop angular factors.
double quasi_static_factor(double theta) noexcept;  // (9/2) sin^2 2 theta
double flip_flop_factor(double theta) noexcept;     // (5 - 6 cos 2t + 9 cos^2 2t) / 4

/// Site-averaged sums over pairs of factor / r^6, in m^-6.
struct LatticeSums {
    double quasi_static = 0.0;
    double flip_flop = 0.0;
    double inverse_r6 = 0.0;
    std::size_t pairs = 0;
};

LatticeSums lattice_sums(const LatticeModel& lattice);

/// S_nm at frequency omega for one pair, tesla^2 s.
double pair_spectral_density(const PairGeometry& pair, double tau_e, const TransitionSpectrum& spectrum,
                             double omega, const PhysicalConstants& pc = {});

/// Flip-flop overlap sum_{ab} W_a W_b [L(w_a - w_b) + L(w_a + w_b)] and quasi-static
/// sum_a W_a L(w_a) over abundance-weighted folded lines, as functions of tau.
/// Large spectra use a gridded pair-difference histogram built once by FFT.
class SpectralOverlap {
public:
    SpectralOverlap(const TransitionSpectrum& spectrum, double grid_hz = 10e3, std::size_t direct_limit = 2000);

    [[nodiscard]] double quasi_static(double tau) const;
    [[nodiscard]] double flip_flop(double tau) const;
    [[nodiscard]] bool gridded() const noexcept { return gridded_; }
    [[nodiscard]] double total_weight() const noexcept;

private:
    std::vector<double> omega_;
    std::vector<double> weight_;
    bool gridded_ = false;
    double step_ = 0.0;
    std::vector<double> diff_;  // diff_[k]: weight at |difference| k * step (k = 0 once, k > 0 both signs)
    std::vector<double> sum_;   // sum_[k]: weight at sum k * step
};

struct EeOptions {
    double damping = 0.5;
    double tolerance = 1e-3;
    int max_iterations = 200;
    int aitken_after = 40;  ///< damped steps before Aitken extrapolation is tried
    double overlap_grid_hz = 10e3;
    std::size_t direct_limit = 2000;
    double delta_bin_hz = 10e3;

    void validate() const;
};

struct TauSolveReport {
    double tau_e = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    double tau_doubled_cutoff = 0.0;
    double cutoff_convergence = 0.0;  ///< |tau(2 r_c) - tau| / tau
    std::size_t pairs = 0;
    std::vector<double> trajectory;
};

/// 1/tau = gamma_e^2 sum_k rho_k sum_ij eta_ij sum_m S_nm(w_ij; tau), solved by damped
/// log-space iteration. Never throws on non-convergence; check `converged`.
TauSolveReport solve_tau_self_consistent(const LatticeModel& lattice, const TransitionSpectrum& spectrum,
                                         double initial_tau, const EeOptions& opts = {},
                                         const PhysicalConstants& pc = {});

/// The self-consistent map tau -> 1 / rate(tau) for given lattice sums.
double ee_rate(const LatticeSums& sums, const SpectralOverlap& overlap, double tau, const PhysicalConstants& pc);

struct DeltaApprox {
    double tau = 0.0;  ///< +inf when nothing matches
    double matched_weight = 0.0;
    bool infinite = false;
};

/// Delta-function overlap with normalized folded weights matched within `delta_bin_hz`.
DeltaApprox delta_approx(const LatticeModel& lattice, const TransitionSpectrum& spectrum, const EeOptions& opts = {},
                         const PhysicalConstants& pc = {});
double delta_approx_tau(const LatticeModel& lattice, const TransitionSpectrum& spectrum, const EeOptions& opts = {},
                        const PhysicalConstants& pc = {});

double no_hyperfine_tau(const LatticeModel& lattice, const PhysicalConstants& pc = {});

/// R_sl + R_en + R_ee, all >= 0.
double total_correlation_rate(double r_sl, double r_en, double r_ee);

}  // namespace spinbath
