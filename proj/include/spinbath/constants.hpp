// constants.hpp: physical constants and unit conversions.
//
// Internal frequencies are angular (rad/s). I/O uses MHz (linear) and gauss.

#pragma once

#include <numbers>

namespace spinbath {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PhysicalConstants {
    double gamma_e = kTwoPi * 28.0249514e9;  ///< electron gyromagnetic ratio, rad/s/T
    double mu0 = 1.25663706212e-6;           ///< vacuum permeability, T m / A
    double hbar = 1.054571817e-34;           ///< J s
    double k_B = 1.380649e-23;               ///< J / K
    double g_free = 2.00231930436;           ///< free-electron g-factor

    /// mu_B / hbar in rad/s/T, i.e. gamma for g = 1.
    [[nodiscard]] double bohr_angular() const noexcept { return gamma_e / g_free; }

    /// Dipolar field prefactor mu0 hbar gamma_e / 4 pi, in T m^3.
    [[nodiscard]] double dipolar_field_prefactor() const noexcept {
        return mu0 / (4.0 * kPi) * hbar * gamma_e;
    }

    void validate() const;

    bool operator==(const PhysicalConstants&) const = default;
};

namespace units {

inline constexpr double kGaussToTesla = 1e-4;
inline constexpr double kNanometer = 1e-9;
inline constexpr double kNanosecond = 1e-9;
inline constexpr double kMicrosecond = 1e-6;

inline constexpr double mhz_to_angular(double mhz) noexcept { return kTwoPi * 1e6 * mhz; }
inline constexpr double angular_to_mhz(double omega) noexcept { return omega / (kTwoPi * 1e6); }
inline constexpr double gauss_to_tesla(double g) noexcept { return g * kGaussToTesla; }
inline constexpr double tesla_to_gauss(double t) noexcept { return t / kGaussToTesla; }
inline constexpr double deg_to_rad(double d) noexcept { return d * kPi / 180.0; }
inline constexpr double rad_to_deg(double r) noexcept { return r * 180.0 / kPi; }

}  // namespace units

}  // namespace spinbath
