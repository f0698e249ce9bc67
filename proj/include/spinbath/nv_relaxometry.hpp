// nv_relaxometry.hpp: NV transition frequency, golden-rule rate, Delta Gamma_1,
// stretched-exponential decay fits and the spin-lattice temperature model.

#pragma once

#include "spinbath/bath_spectrum.hpp"
#include "spinbath/constants.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace spinbath {

enum class NvBranch { minus, plus };

struct NvConfig {
    double d_zfs = kTwoPi * 2.870e9;  ///< rad/s
    double gamma_e = PhysicalConstants{}.gamma_e;
    NvBranch branch = NvBranch::minus;

    void validate() const;
    bool operator==(const NvConfig&) const = default;
};

/// |0> -> |-1> or |0> -> |+1> frequency for a field along the NV axis, rad/s.
double nv_frequency(const NvConfig& cfg, double b_field);

/// gamma_e^2 S_e(omega_NV), 1/s.
double relaxation_rate(const BathSpectrumModel& m, const NvConfig& cfg, double b_field);

struct MeasurementRecord {
    std::string nv_id;
    double b_gauss = 0.0;
    double t1_cupc = 0.0;  ///< s
    double t1_cupc_sigma = 0.0;
    double t1_free = 0.0;
    double t1_free_sigma = 0.0;

    void validate() const;
    bool operator==(const MeasurementRecord&) const = default;
};

struct MeasurementSet {
    std::vector<MeasurementRecord> records;

    void validate() const;
};

struct ValueWithError {
    double value = 0.0;
    double sigma = 0.0;
};

/// 1/T1_cupc - 1/T1_free with first-order propagated sigma.
ValueWithError delta_gamma(const MeasurementRecord& rec);

struct DecaySample {
    double t = 0.0;  ///< s
    double y = 0.0;
    double sigma = 1.0;
};

struct DecayCurve {
    std::vector<DecaySample> samples;

    void validate() const;
};

struct DecayFitOptions {
    double iota_min = 0.3;
    double iota_max = 2.0;
    int max_evaluations = 4000;
};

struct DecayFit {
    // Parameter order A, T1, iota, C.
    std::array<double, 4> params{};
    std::array<double, 4> sigma{};
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
    double chi2 = 0.0;
    double chi2_reduced = 0.0;
    int starts = 0;

    [[nodiscard]] double amplitude() const noexcept { return params[0]; }
    [[nodiscard]] double t1() const noexcept { return params[1]; }
    [[nodiscard]] double iota() const noexcept { return params[2]; }
    [[nodiscard]] double offset() const noexcept { return params[3]; }
};

double stretched_exponential(double t, double a, double t1, double iota, double c);

/// Weighted multi-start least squares for y = A exp(-(t/T1)^iota) + C.
/// Throws UnidentifiableError when A is consistent with zero, ConvergenceError if no start converges.
DecayFit fit_decay(const DecayCurve& curve, const DecayFitOptions& opts = {});

struct SpinLatticeParams {
    double a = 0.0;
    double omega_a = 0.0;  ///< phonon energy as angular frequency, rad/s
    double b = 0.0;
    double omega_b = 0.0;
    double c = 0.0;

    bool operator==(const SpinLatticeParams&) const = default;
};

/// A/(e^x_A - 1) + B e^x_B/(e^x_B - 1)^2 + C with x = hbar omega / k_B T.
double spin_lattice_rate(double temperature, const SpinLatticeParams& p, const PhysicalConstants& pc = {});

struct RateSample {
    double temperature = 0.0;
    double rate = 0.0;
    double sigma = 1.0;
};

/// Least-squares fit of all five parameters starting from `guess` (energies and
/// prefactors must be positive in the guess).
SpinLatticeParams fit_spin_lattice(const std::vector<RateSample>& data, const SpinLatticeParams& guess,
                                   const PhysicalConstants& pc = {});

}  // namespace spinbath
