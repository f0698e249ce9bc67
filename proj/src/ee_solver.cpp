#include "spinbath/ee_solver.hpp"

#include "spinbath/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace spinbath {

namespace {

// Combined abundance-weighted folded lines of every isotope, sorted by frequency.
void combined_lines(const TransitionSpectrum& spectrum, std::vector<double>& omega, std::vector<double>& weight) {
    std::vector<std::pair<double, double>> all;
    for (const auto& iso : spectrum.isotopes) {
        const FoldedLines f = fold_lines(iso);
        for (std::size_t i = 0; i < f.omega.size(); ++i) {
            all.emplace_back(f.omega[i], iso.abundance * f.weight[i]);
        }
    }
    std::sort(all.begin(), all.end());
    omega.clear();
    weight.clear();
    for (const auto& [w, v] : all) {
        if (!omega.empty() && omega.back() == w) {
            weight.back() += v;
        } else {
            omega.push_back(w);
            weight.push_back(v);
        }
    }
}

Eigen::Matrix3d cell_matrix(const LatticeModel& l) {
    Eigen::Matrix3d m;
    m.col(0) = l.cell[0];
    m.col(1) = l.cell[1];
    m.col(2) = l.cell[2];
    return m;
}

// Coupling constant of S_nm: (mu0 hbar gamma / 4 pi)^2 S(S+1) / 3 with S = 1/2.
double pair_prefactor(const PhysicalConstants& pc) {
    const double k = pc.dipolar_field_prefactor();
    return k * k * 0.75 / 3.0;
}

}  // namespace

double LatticeModel::nearest_neighbour_distance() const {
    const Eigen::Matrix3d m = cell_matrix(*this);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : sites) {
        for (const auto& b : sites) {
            for (int i = -1; i <= 1; ++i) {
                for (int j = -1; j <= 1; ++j) {
                    for (int k = -1; k <= 1; ++k) {
                        const Eigen::Vector3d d = m * (b - a + Eigen::Vector3d(i, j, k));
                        const double r = d.norm();
                        if (r > 1e-15) {
                            best = std::min(best, r);
                        }
                    }
                }
            }
        }
    }
    return best;
}

void LatticeModel::validate() const {
    const Eigen::Matrix3d m = cell_matrix(*this);
    if (!m.allFinite() || std::abs(m.determinant()) <= 0.0) {
        throw ConfigError("lattice.cell: vectors must be finite and linearly independent");
    }
    if (sites.empty()) {
        throw ConfigError("lattice.sites: at least one site required");
    }
    if (!axes.empty() && axes.size() != sites.size()) {
        throw ConfigError("lattice.axes: one axis per site required");
    }
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (!(axes[i].norm() > 0.0)) {
            throw ConfigError("lattice.axes[" + std::to_string(i) + "]: must be nonzero");
        }
    }
    if (!(field_direction.norm() > 0.0) || !field_direction.allFinite()) {
        throw ConfigError("lattice.field_direction: must be a nonzero vector");
    }
    const double nn = nearest_neighbour_distance();
    if (!(cutoff >= 2.0 * nn * (1.0 - 1e-12))) {
        throw ConfigError("lattice.cutoff: must be >= 2x the nearest-neighbour distance (" + std::to_string(2.0 * nn) +
                          " m)");
    }
}

LatticeModel LatticeModel::dilated(double factor) const {
    LatticeModel out = *this;
    for (auto& v : out.cell) {
        v *= factor;
    }
    out.cutoff *= factor;
    return out;
}

LatticeModel LatticeModel::with_cutoff(double cutoff_m) const {
    LatticeModel out = *this;
    out.cutoff = cutoff_m;
    return out;
}

LatticeModel cubic_lattice(double a, double cutoff, const Eigen::Vector3d& field) {
    LatticeModel l;
    l.cell = {Eigen::Vector3d(a, 0, 0), Eigen::Vector3d(0, a, 0), Eigen::Vector3d(0, 0, a)};
    l.sites = {Eigen::Vector3d::Zero()};
    l.axes = {Eigen::Vector3d::UnitZ()};
    l.cutoff = cutoff;
    l.field_direction = field;
    return l;
}

Eigen::Vector3d field_direction_from_axis(const Eigen::Vector3d& axis, const Eigen::Vector3d& reference,
                                          double theta_e, double phi) {
    const Eigen::Vector3d z = axis.normalized();
    Eigen::Vector3d x = reference - reference.dot(z) * z;
    if (x.norm() < 1e-12 * reference.norm()) {
        x = z.unitOrthogonal();
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    return std::cos(theta_e) * z + std::sin(theta_e) * (std::cos(phi) * x + std::sin(phi) * y);
}

std::vector<PairGeometry> pair_geometry(const LatticeModel& lattice) {
    lattice.validate();
    const Eigen::Matrix3d m = cell_matrix(lattice);
    const Eigen::Vector3d field = lattice.field_direction.normalized();
    // Translations needed per axis: cutoff over the spacing of the opposite lattice planes.
    const Eigen::Matrix3d recip = m.inverse();
    std::array<int, 3> reach{};
    for (int k = 0; k < 3; ++k) {
        reach[static_cast<std::size_t>(k)] = static_cast<int>(std::ceil(lattice.cutoff * recip.row(k).norm())) + 1;
    }

    std::vector<PairGeometry> out;
    for (std::size_t n = 0; n < lattice.sites.size(); ++n) {
        std::vector<PairGeometry> mine;
        for (int i = -reach[0]; i <= reach[0]; ++i) {
            for (int j = -reach[1]; j <= reach[1]; ++j) {
                for (int k = -reach[2]; k <= reach[2]; ++k) {
                    for (const auto& site : lattice.sites) {
                        const Eigen::Vector3d d = m * (site - lattice.sites[n] + Eigen::Vector3d(i, j, k));
                        const double r = d.norm();
                        if (r <= 1e-15 || r > lattice.cutoff) {
                            continue;
                        }
                        const double c = std::clamp(d.dot(field) / r, -1.0, 1.0);
                        mine.push_back({r, std::acos(c), n});
                    }
                }
            }
        }
        std::sort(mine.begin(), mine.end(), [](const PairGeometry& a, const PairGeometry& b) {
            return a.r != b.r ? a.r < b.r : a.theta < b.theta;
        });
        out.insert(out.end(), mine.begin(), mine.end());
    }
    if (out.empty()) {
        throw ConfigError("lattice.cutoff: no pairs within cutoff");
    }
    return out;
}

double quasi_static_factor(double theta) noexcept {
    const double s = std::sin(2.0 * theta);
    return 4.5 * s * s;
}

double flip_flop_factor(double theta) noexcept {
    const double c = std::cos(2.0 * theta);
    return (5.0 - 6.0 * c + 9.0 * c * c) / 4.0;
}

LatticeSums lattice_sums(const LatticeModel& lattice) {
    const auto pairs = pair_geometry(lattice);
    LatticeSums s;
    s.pairs = pairs.size();
    for (const auto& p : pairs) {
        const double inv6 = 1.0 / std::pow(p.r, 6);
        s.quasi_static += quasi_static_factor(p.theta) * inv6;
        s.flip_flop += flip_flop_factor(p.theta) * inv6;
        s.inverse_r6 += inv6;
    }
    const auto sites = static_cast<double>(lattice.sites.size());
    s.quasi_static /= sites;
    s.flip_flop /= sites;
    s.inverse_r6 /= sites;
    return s;
}

double pair_spectral_density(const PairGeometry& pair, double tau_e, const TransitionSpectrum& spectrum,
                             double omega, const PhysicalConstants& pc) {
    if (!(pair.r > 0.0)) {
        throw ConfigError("pair_spectral_density: r must be > 0");
    }
    if (!(tau_e > 0.0)) {
        throw ConfigError("pair_spectral_density: tau_e must be > 0");
    }
    double flip = 0.0;
    for (const auto& iso : spectrum.isotopes) {
        double s = 0.0;
        for (const auto& t : iso.transitions) {
            s += t.eta * (lorentzian(t.omega - omega, tau_e) + lorentzian(t.omega + omega, tau_e));
        }
        flip += iso.abundance * s;
    }
    const double angular =
        quasi_static_factor(pair.theta) * lorentzian(omega, tau_e) + flip_flop_factor(pair.theta) * flip;
    return pair_prefactor(pc) / std::pow(pair.r, 6) * angular;
}

SpectralOverlap::SpectralOverlap(const TransitionSpectrum& spectrum, double grid_hz, std::size_t direct_limit) {
    combined_lines(spectrum, omega_, weight_);
    if (omega_.size() <= direct_limit || omega_.empty()) {
        return;
    }
    if (!(grid_hz > 0.0)) {
        throw ConfigError("ee.overlap_grid_hz: must be > 0");
    }
    gridded_ = true;
    step_ = kTwoPi * grid_hz;
    const auto n = static_cast<std::size_t>(std::floor(omega_.back() / step_)) + 2;
    std::size_t len = 1;
    while (len < 2 * n) {
        len <<= 1;
    }
    // Cloud-in-cell assignment onto the frequency grid.
    std::vector<double> g(len, 0.0);
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        const double s = omega_[i] / step_;
        const auto j = static_cast<std::size_t>(std::floor(s));
        const double f = s - static_cast<double>(j);
        g[j] += weight_[i] * (1.0 - f);
        g[j + 1] += weight_[i] * f;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, g);
    std::vector<std::complex<double>> power(spec.size());
    std::vector<std::complex<double>> square(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        power[k] = std::norm(spec[k]);
        square[k] = spec[k] * spec[k];
    }
    std::vector<std::complex<double>> auto_c;
    std::vector<std::complex<double>> conv_c;
    fft.inv(auto_c, power);
    fft.inv(conv_c, square);
    diff_.resize(n);
    sum_.resize(std::min(len, 2 * n));
    for (std::size_t k = 0; k < n; ++k) {
        diff_[k] = (k == 0 ? 1.0 : 2.0) * auto_c[k].real();
    }
    for (std::size_t k = 0; k < sum_.size(); ++k) {
        sum_[k] = conv_c[k].real();
    }
}

double SpectralOverlap::total_weight() const noexcept {
    return std::accumulate(weight_.begin(), weight_.end(), 0.0);
}

double SpectralOverlap::quasi_static(double tau) const {
    double s = 0.0;
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        s += weight_[i] * lorentzian(omega_[i], tau);
    }
    return s;
}

double SpectralOverlap::flip_flop(double tau) const {
    double s = 0.0;
    if (!gridded_) {
        for (std::size_t a = 0; a < omega_.size(); ++a) {
            double inner = 0.0;
            for (std::size_t b = 0; b < omega_.size(); ++b) {
                inner += weight_[b] * (lorentzian(omega_[a] - omega_[b], tau) + lorentzian(omega_[a] + omega_[b], tau));
            }
            s += weight_[a] * inner;
        }
        return s;
    }
    for (std::size_t k = 0; k < diff_.size(); ++k) {
        s += diff_[k] * lorentzian(static_cast<double>(k) * step_, tau);
    }
    for (std::size_t k = 0; k < sum_.size(); ++k) {
        s += sum_[k] * lorentzian(static_cast<double>(k) * step_, tau);
    }
    return s;
}

void EeOptions::validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) {
        throw ConfigError("ee.damping: must lie in (0, 1]");
    }
    if (!(tolerance > 0.0)) {
        throw ConfigError("ee.tolerance: must be > 0");
    }
    if (max_iterations < 1) {
        throw ConfigError("ee.max_iterations: must be >= 1");
    }
    if (!(delta_bin_hz >= 0.0)) {
        throw ConfigError("ee.delta_bin_hz: must be >= 0");
    }
    if (!(overlap_grid_hz > 0.0)) {
        throw ConfigError("ee.overlap_grid_hz: must be > 0");
    }
}

double ee_rate(const LatticeSums& sums, const SpectralOverlap& overlap, double tau, const PhysicalConstants& pc) {
    const double g2 = pc.gamma_e * pc.gamma_e;
    return g2 * pair_prefactor(pc) *
           (sums.quasi_static * overlap.quasi_static(tau) + sums.flip_flop * overlap.flip_flop(tau));
}

namespace {

struct FixedPoint {
    double tau = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> trajectory;
};

FixedPoint iterate(const LatticeSums& sums, const SpectralOverlap& overlap, double initial_tau, const EeOptions& opts,
                   const PhysicalConstants& pc) {
    FixedPoint fp;
    // Work on x = log tau; map x -> log(1 / rate(e^x)).
    auto map = [&](double x) { return -std::log(ee_rate(sums, overlap, std::exp(x), pc)); };
    double x = std::log(initial_tau);
    std::vector<double> history;
    for (int it = 0; it < opts.max_iterations; ++it) {
        fp.trajectory.push_back(std::exp(x));
        const double gx = map(x);
        if (!std::isfinite(gx)) {
            break;
        }
        fp.iterations = it + 1;
        fp.residual = std::abs(std::expm1(gx - x));
        if (fp.residual < opts.tolerance) {
            fp.converged = true;
            fp.tau = std::exp(x);
            return fp;
        }
        double next = x + opts.damping * (gx - x);
        history.push_back(next);
        if (it >= opts.aitken_after && history.size() >= 3) {
            const double x0 = history[history.size() - 3];
            const double x1 = history[history.size() - 2];
            const double x2 = history.back();
            const double denom = x2 - 2.0 * x1 + x0;
            if (std::abs(denom) > 1e-300) {
                const double accel = x2 - (x2 - x1) * (x2 - x1) / denom;
                if (std::isfinite(accel)) {
                    next = accel;
                    history.clear();
                }
            }
        }
        x = next;
    }
    fp.tau = std::exp(x);
    return fp;
}

}  // namespace

TauSolveReport solve_tau_self_consistent(const LatticeModel& lattice, const TransitionSpectrum& spectrum,
                                         double initial_tau, const EeOptions& opts, const PhysicalConstants& pc) {
    if (!(initial_tau > 0.0 && std::isfinite(initial_tau))) {
        throw ConfigError("ee.initial_tau: must be finite and > 0");
    }
    opts.validate();
    const SpectralOverlap overlap(spectrum, opts.overlap_grid_hz, opts.direct_limit);
    const LatticeSums sums = lattice_sums(lattice);
    const FixedPoint fp = iterate(sums, overlap, initial_tau, opts, pc);

    TauSolveReport rep;
    rep.tau_e = fp.tau;
    rep.iterations = fp.iterations;
    rep.residual = fp.residual;
    rep.converged = fp.converged;
    rep.trajectory = fp.trajectory;
    rep.pairs = sums.pairs;
    if (fp.converged) {
        const LatticeSums wide = lattice_sums(lattice.with_cutoff(2.0 * lattice.cutoff));
        // A tight tolerance, or the restart at fp.tau stops at once and hides the shift.
        EeOptions tight = opts;
        tight.tolerance = opts.tolerance * 1e-3;
        tight.max_iterations = 4 * opts.max_iterations;
        const FixedPoint fp2 = iterate(wide, overlap, fp.tau, tight, pc);
        rep.tau_doubled_cutoff = fp2.tau;
        rep.cutoff_convergence = std::abs(fp2.tau - fp.tau) / fp.tau;
    }
    return rep;
}

DeltaApprox delta_approx(const LatticeModel& lattice, const TransitionSpectrum& spectrum, const EeOptions& opts,
                         const PhysicalConstants& pc) {
    opts.validate();
    std::vector<double> omega;
    std::vector<double> weight;
    combined_lines(spectrum, omega, weight);
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    DeltaApprox out;
    if (!(total > 0.0)) {
        out.infinite = true;
        out.tau = std::numeric_limits<double>::infinity();
        return out;
    }
    std::vector<double> prefix(weight.size() + 1, 0.0);
    for (std::size_t i = 0; i < weight.size(); ++i) {
        prefix[i + 1] = prefix[i] + weight[i] / total;
    }
    const double bin = kTwoPi * opts.delta_bin_hz;
    double matched = 0.0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    // Window of b with |w_b - w_a| < bin (strict, so bin = 0 matches nothing).
    for (std::size_t a = 0; a < omega.size() && bin > 0.0; ++a) {
        while (omega[a] - omega[lo] >= bin && lo < a) {
            ++lo;
        }
        hi = std::max(hi, a);
        while (hi + 1 < omega.size() && omega[hi + 1] - omega[a] < bin) {
            ++hi;
        }
        matched += weight[a] / total * (prefix[hi + 1] - prefix[lo]);
    }
    out.matched_weight = matched;
    const LatticeSums sums = lattice_sums(lattice);
    const double rate = pc.gamma_e * pc.dipolar_field_prefactor() * std::sqrt(sums.flip_flop * matched);
    if (!(rate > 0.0)) {
        out.infinite = true;
        out.tau = std::numeric_limits<double>::infinity();
    } else {
        out.tau = 1.0 / rate;
    }
    return out;
}

double delta_approx_tau(const LatticeModel& lattice, const TransitionSpectrum& spectrum, const EeOptions& opts,
                        const PhysicalConstants& pc) {
    return delta_approx(lattice, spectrum, opts, pc).tau;
}

double no_hyperfine_tau(const LatticeModel& lattice, const PhysicalConstants& pc) {
    const LatticeSums sums = lattice_sums(lattice);
    return 1.0 / (pc.gamma_e * pc.dipolar_field_prefactor() * std::sqrt(sums.flip_flop));
}

double total_correlation_rate(double r_sl, double r_en, double r_ee) {
    if (!(r_sl >= 0.0 && r_en >= 0.0 && r_ee >= 0.0)) {
        throw ConfigError("total_correlation_rate: rates must be >= 0");
    }
    return r_sl + r_en + r_ee;
}

}  // namespace spinbath
