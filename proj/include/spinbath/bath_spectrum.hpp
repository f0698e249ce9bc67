// bath_spectrum.hpp: film coupling, bath autocorrelation and spectral density.

#pragma once

#include "spinbath/constants.hpp"
#include "spinbath/spin_model.hpp"

#include <vector>

namespace spinbath {

struct FilmGeometry {
    double d_nv = 10e-9;  ///< NV depth, m
    double h = 27e-9;     ///< film thickness, m
    double n_e = 1.0e27;  ///< spin density, m^-3

    void validate() const;
    bool operator==(const FilmGeometry&) const = default;
};

/// Mean-square dipolar field of the film at the NV, tesla^2.
double coupling_b0_sq(const FilmGeometry& g, const PhysicalConstants& pc = {});

struct GeometryFactors {
    double longitudinal = 5.0 / 16.0;
    double transverse = 11.0 / 16.0;
};

GeometryFactors geometry_factors() noexcept;

/// Lines of one isotope folded onto |omega| and merged where frequencies coincide.
struct FoldedLines {
    double abundance = 1.0;
    std::vector<double> omega;   ///< sorted ascending, >= 0
    std::vector<double> weight;  ///< summed eta of every ordered pair at that |omega|
};

/// Fold an isotope's ordered-pair list. Lines closer than `merge_tolerance` (rad/s)
/// are combined at their weighted mean frequency; 0 merges only exact ties.
FoldedLines fold_lines(const IsotopeLines& lines, double merge_tolerance = 0.0);

class BathSpectrumModel {
public:
    BathSpectrumModel(TransitionSpectrum spectrum, double tau_e, FilmGeometry geometry,
                      const PhysicalConstants& pc = {});

    [[nodiscard]] const TransitionSpectrum& spectrum() const noexcept { return spectrum_; }
    [[nodiscard]] double tau_e() const noexcept { return tau_e_; }
    [[nodiscard]] double b0_sq() const noexcept { return b0_sq_; }
    [[nodiscard]] const FilmGeometry& geometry() const noexcept { return geometry_; }

    /// G_e(t), tesla^2.
    [[nodiscard]] double autocorrelation(double t) const;
    /// S_e(omega), tesla^2 s.
    [[nodiscard]] double spectral_density(double omega) const;
    /// Bracketed term of isotope k alone, without the abundance.
    [[nodiscard]] double isotope_spectral_density(std::size_t k, double omega) const;

private:
    TransitionSpectrum spectrum_;
    double tau_e_;
    FilmGeometry geometry_;
    double b0_sq_;
    std::vector<FoldedLines> folded_;
};

/// Lorentzian tau / (x^2 tau^2 + 1).
inline double lorentzian(double x, double tau) noexcept { return tau / (x * x * tau * tau + 1.0); }

/// Spectral density of a pure free-electron bath (g = g_free) at the same geometry.
double free_electron_spectrum(const FilmGeometry& g, double tau_e, double omega, double b_field,
                              const PhysicalConstants& pc = {});

/// Unit-coupling spectral density: S_e / b0^2 from folded lines, seconds.
double unit_spectral_density(const std::vector<FoldedLines>& lines, double tau_e, double omega);

}  // namespace spinbath
