#include "spinbath/bath_spectrum.hpp"

#include "spinbath/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spinbath {

namespace {

double folded_term(const FoldedLines& f, double tau, double omega) {
    double flip = 0.0;
    for (std::size_t i = 0; i < f.omega.size(); ++i) {
        flip += f.weight[i] * (lorentzian(f.omega[i] - omega, tau) + lorentzian(f.omega[i] + omega, tau));
    }
    return 0.625 * lorentzian(omega, tau) + 0.6875 * flip;
}

}  // namespace

void FilmGeometry::validate() const {
    if (!(std::isfinite(d_nv) && d_nv > 0.0)) {
        throw ConfigError("geometry.d_nv: must be finite and > 0");
    }
    if (!(h > 0.0)) {
        throw ConfigError("geometry.h: must be > 0");
    }
    if (!(std::isfinite(n_e) && n_e >= 0.0)) {
        throw ConfigError("geometry.n_e: must be finite and >= 0");
    }
}

double coupling_b0_sq(const FilmGeometry& g, const PhysicalConstants& pc) {
    g.validate();
    const double k = pc.dipolar_field_prefactor();
    const double s_s1 = 0.75;
    const double far = std::isinf(g.h) ? 0.0 : 1.0 / std::pow(g.d_nv + g.h, 3);
    return k * k * (kTwoPi * s_s1 / 9.0) * g.n_e * (1.0 / std::pow(g.d_nv, 3) - far);
}

GeometryFactors geometry_factors() noexcept { return {}; }

FoldedLines fold_lines(const IsotopeLines& lines, double merge_tolerance) {
    std::vector<std::pair<double, double>> raw;
    raw.reserve(lines.transitions.size());
    for (const auto& t : lines.transitions) {
        raw.emplace_back(std::abs(t.omega), t.eta);
    }
    std::sort(raw.begin(), raw.end());

    FoldedLines out;
    out.abundance = lines.abundance;
    std::size_t i = 0;
    while (i < raw.size()) {
        double w = 0.0;
        double wx = 0.0;
        const double start = raw[i].first;
        std::size_t j = i;
        while (j < raw.size() && raw[j].first - start <= merge_tolerance) {
            w += raw[j].second;
            wx += raw[j].second * raw[j].first;
            ++j;
        }
        out.omega.push_back(j == i + 1 || merge_tolerance == 0.0 ? start : wx / w);
        out.weight.push_back(w);
        i = j;
    }
    return out;
}

BathSpectrumModel::BathSpectrumModel(TransitionSpectrum spectrum, double tau_e, FilmGeometry geometry,
                                     const PhysicalConstants& pc)
    : spectrum_(std::move(spectrum)), tau_e_(tau_e), geometry_(geometry) {
    if (!(std::isfinite(tau_e) && tau_e > 0.0)) {
        throw ConfigError("bath.tau_e: must be finite and > 0");
    }
    b0_sq_ = coupling_b0_sq(geometry_, pc);
    folded_.reserve(spectrum_.isotopes.size());
    for (const auto& iso : spectrum_.isotopes) {
        folded_.push_back(fold_lines(iso));
    }
}

double BathSpectrumModel::autocorrelation(double t) const {
    if (t < 0.0) {
        t = -t;
    }
    double total = 0.0;
    // cos is even, so the folded lines carry the full oscillating part.
    for (const auto& f : folded_) {
        double osc = 0.0;
        for (std::size_t i = 0; i < f.omega.size(); ++i) {
            osc += f.weight[i] * std::cos(f.omega[i] * t);
        }
        total += f.abundance * (0.3125 + 0.6875 * osc);
    }
    return b0_sq_ * std::exp(-t / tau_e_) * total;
}

double BathSpectrumModel::isotope_spectral_density(std::size_t k, double omega) const {
    return b0_sq_ * folded_term(folded_.at(k), tau_e_, omega);
}

double BathSpectrumModel::spectral_density(double omega) const {
    double total = 0.0;
    for (std::size_t k = 0; k < folded_.size(); ++k) {
        total += spectrum_.isotopes[k].abundance * isotope_spectral_density(k, omega);
    }
    return total;
}

double unit_spectral_density(const std::vector<FoldedLines>& lines, double tau_e, double omega) {
    double total = 0.0;
    for (const auto& f : lines) {
        total += f.abundance * folded_term(f, tau_e, omega);
    }
    return total;
}

double free_electron_spectrum(const FilmGeometry& g, double tau_e, double omega, double b_field,
                              const PhysicalConstants& pc) {
    BathSpectrumModel model(electron_only_spectrum(b_field, pc.g_free, pc), tau_e, g, pc);
    return model.spectral_density(omega);
}

}  // namespace spinbath
