// spin_model.hpp: CuPc electron-nuclear spin Hamiltonian and its transition spectrum.
//
// Frames: the molecular frame has z along the molecular axis (plane normal) and
// x along the first Cu-N bond. The lab frame has z along the static field, which
// is also the NV axis. The molecular axis sits at angle theta_e from lab z,
// tilted about lab y.

#pragma once

#include "spinbath/constants.hpp"

#include <Eigen/Dense>

#include <array>
#include <utility>

#include <cstddef>
#include <string>
#include <vector>

namespace spinbath {

/// Diagonal hyperfine tensor in its principal frame, angular frequency (rad/s).
struct HyperfineTensor {
    double axx = 0.0;
    double ayy = 0.0;
    double azz = 0.0;

    [[nodiscard]] HyperfineTensor scaled(double factor) const noexcept {
        return {axx * factor, ayy * factor, azz * factor};
    }
    [[nodiscard]] Eigen::Matrix3d matrix() const { return Eigen::Vector3d(axx, ayy, azz).asDiagonal(); }

    bool operator==(const HyperfineTensor&) const = default;
};

struct Isotope {
    std::string label;
    double abundance = 1.0;        ///< natural abundance rho_kappa in [0, 1]
    double hyperfine_scale = 1.0;  ///< hyperfine tensor scale relative to the reference isotope
    double nuclear_spin = 1.5;

    bool operator==(const Isotope&) const = default;
};

struct IsotopeTable {
    std::vector<Isotope> entries;

    /// 63Cu / 65Cu with natural abundances.
    static IsotopeTable natural_copper();

    void validate() const;
    bool operator==(const IsotopeTable&) const = default;
};

struct SpinSystemSpec {
    Isotope isotope = IsotopeTable::natural_copper().entries.front();
    HyperfineTensor cu_tensor;  ///< reference-isotope tensor; scaled by isotope.hyperfine_scale
    HyperfineTensor n_tensor;   ///< principal x along the Cu-N bond
    double nitrogen_spin = 1.0;
    double g_parallel = 2.0023;
    double g_perp = 2.0023;
    double b_field = 0.0;  ///< tesla
    double theta_e = 0.0;  ///< molecular axis vs field, radians
    int n_nitrogens = 4;
    std::size_t max_dimension = 4096;

    /// Literature hyperfine constants with CuPc g-values supplied by the caller.
    static SpinSystemSpec cupc(double g_parallel, double g_perp, double b_field, double theta_e);

    [[nodiscard]] std::size_t hilbert_dimension() const;
    void validate() const;
};

/// One nucleus with its hyperfine tensor already expressed in the lab frame.
struct LabNucleus {
    double spin = 0.5;
    Eigen::Matrix3d tensor = Eigen::Matrix3d::Zero();
};

/// Frame-resolved system: everything needed to write the Hamiltonian.
struct LabSpinSystem {
    Eigen::Matrix3d g_tensor = Eigen::Matrix3d::Identity() * 2.0023;
    double b_field = 0.0;
    std::vector<LabNucleus> nuclei;

    [[nodiscard]] std::size_t dimension() const;
};

/// R(theta) diag(axx, ayy, azz) R(theta)^T with R the rotation about lab y by theta.
Eigen::Matrix3d rotate_tensor(const HyperfineTensor& t, double theta_e);

/// Rotation about z, used to place the nitrogen bond directions in the molecular plane.
Eigen::Matrix3d rotation_z(double phi);
Eigen::Matrix3d rotation_y(double theta);

LabSpinSystem to_lab_frame(const SpinSystemSpec& spec);

/// Spin matrices (Sx, Sy, Sz) for spin quantum number s, basis ordered m = s ... -s.
std::array<Eigen::MatrixXcd, 3> spin_matrices(double s);

/// Dense Hamiltonian in rad/s on the product basis electron (x) nuclei in input order.
Eigen::MatrixXcd build_hamiltonian(const LabSpinSystem& sys, const PhysicalConstants& pc,
                                   std::size_t max_dimension = 4096);
Eigen::MatrixXcd build_hamiltonian(const SpinSystemSpec& spec, const PhysicalConstants& pc);

/// Lab-frame S_x of the electron embedded in the product space of `sys`.
Eigen::MatrixXcd electron_sx(const LabSpinSystem& sys);

struct Transition {
    double omega = 0.0;  ///< omega_i - omega_j, rad/s
    double eta = 0.0;    ///< |<i|S_x|j>|^2 / M

    bool operator==(const Transition&) const = default;
};

/// Transition list of one isotope. Ordered pairs (i, j), i != j.
struct IsotopeLines {
    std::string label;
    double abundance = 1.0;
    std::size_t state_count_half = 0;  ///< M
    std::vector<Transition> transitions;

    // Bookkeeping for the weight trace identity:
    // sum(eta kept) + diagonal + degenerate + pruned == trace_sx2_over_m.
    double trace_sx2_over_m = 0.0;
    double diagonal_weight = 0.0;
    double degenerate_weight = 0.0;
    double pruned_weight = 0.0;

    [[nodiscard]] double kept_weight() const;
};

/// Isotope-resolved spectrum of one molecule.
struct TransitionSpectrum {
    std::vector<IsotopeLines> isotopes;

    [[nodiscard]] std::size_t transition_count() const;
};

enum class SpectrumMethod {
    dense,             ///< diagonalize the full product space
    symmetry_reduced,  ///< split groups of equivalent nuclei into total-spin blocks
};

struct SpectrumOptions {
    double eta_floor = 1e-12;
    double degenerate_hz = 1.0;
    SpectrumMethod method = SpectrumMethod::symmetry_reduced;
};

IsotopeLines transition_spectrum(const LabSpinSystem& sys, const PhysicalConstants& pc,
                                 const SpectrumOptions& opts = {},
                                 std::size_t max_dimension = 4096);
IsotopeLines transition_spectrum(const SpinSystemSpec& spec, const PhysicalConstants& pc,
                                 const SpectrumOptions& opts = {});

/// One IsotopeLines per table entry, each with the isotope's scaled Cu tensor.
TransitionSpectrum isotope_resolved_spectrum(const SpinSystemSpec& base, const IsotopeTable& table,
                                             const PhysicalConstants& pc,
                                             const SpectrumOptions& opts = {});

/// Bare S = 1/2 electron at field b with isotropic g.
TransitionSpectrum electron_only_spectrum(double b_field, double g, const PhysicalConstants& pc);

/// Multiplicities of total spin J for k spins of spin s: result[i] pairs (J, count).
std::vector<std::pair<double, int>> total_spin_multiplicities(double s, int k);

}  // namespace spinbath
