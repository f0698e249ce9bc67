#include "spinbath/nv_relaxometry.hpp"

#include "spinbath/errors.hpp"
#include "spinbath/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spinbath {

void NvConfig::validate() const {
    if (!(std::isfinite(d_zfs) && d_zfs > 0.0)) {
        throw ConfigError("nv.d_zfs: must be finite and > 0");
    }
    if (!(std::isfinite(gamma_e) && gamma_e > 0.0)) {
        throw ConfigError("nv.gamma_e: must be finite and > 0");
    }
}

double nv_frequency(const NvConfig& cfg, double b_field) {
    const double zeeman = cfg.gamma_e * b_field;
    return cfg.branch == NvBranch::minus ? std::abs(cfg.d_zfs - zeeman) : cfg.d_zfs + zeeman;
}

double relaxation_rate(const BathSpectrumModel& m, const NvConfig& cfg, double b_field) {
    return cfg.gamma_e * cfg.gamma_e * m.spectral_density(nv_frequency(cfg, b_field));
}

void MeasurementRecord::validate() const {
    auto positive = [&](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) {
            throw DataError("record '" + nv_id + "' at " + std::to_string(b_gauss) + " G: " + name + " must be > 0");
        }
    };
    positive(t1_cupc, "t1_cupc");
    positive(t1_cupc_sigma, "t1_cupc_sigma");
    positive(t1_free, "t1_free");
    positive(t1_free_sigma, "t1_free_sigma");
    if (!(std::isfinite(b_gauss) && b_gauss >= 0.0)) {
        throw DataError("record '" + nv_id + "': b_gauss must be finite and >= 0");
    }
}

void MeasurementSet::validate() const {
    for (const auto& r : records) {
        r.validate();
    }
}

ValueWithError delta_gamma(const MeasurementRecord& rec) {
    rec.validate();
    const double value = 1.0 / rec.t1_cupc - 1.0 / rec.t1_free;
    const double sc = rec.t1_cupc_sigma / (rec.t1_cupc * rec.t1_cupc);
    const double sf = rec.t1_free_sigma / (rec.t1_free * rec.t1_free);
    return {value, std::hypot(sc, sf)};
}

void DecayCurve::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!(std::isfinite(s.t) && std::isfinite(s.y))) {
            throw DataError("decay sample " + std::to_string(i) + ": non-finite value");
        }
        if (!(s.sigma > 0.0 && std::isfinite(s.sigma))) {
            throw DataError("decay sample " + std::to_string(i) + ": sigma must be > 0");
        }
        if (i > 0 && !(s.t > samples[i - 1].t)) {
            throw DataError("decay sample " + std::to_string(i) + ": times must be strictly increasing");
        }
    }
}

double stretched_exponential(double t, double a, double t1, double iota, double c) {
    return a * std::exp(-std::pow(t / t1, iota)) + c;
}

namespace {

// Internal coordinates: (A, log T1, s, C) with iota = lo + (hi - lo) (1 + sin s) / 2.
struct DecayParam {
    double lo;
    double hi;

    [[nodiscard]] double iota(double s) const { return lo + (hi - lo) * 0.5 * (1.0 + std::sin(s)); }
    [[nodiscard]] double diota(double s) const { return (hi - lo) * 0.5 * std::cos(s); }
    [[nodiscard]] double s_of(double iota) const {
        const double u = std::clamp(2.0 * (iota - lo) / (hi - lo) - 1.0, -1.0, 1.0);
        return std::asin(u);
    }
};

// Model derivatives with respect to (A, T1, iota, C).
Eigen::Vector4d natural_gradient(double t, double a, double t1, double iota) {
    const double x = t / t1;
    const double u = x > 0.0 ? std::pow(x, iota) : 0.0;
    const double e = std::exp(-u);
    const double log_x = x > 0.0 ? std::log(x) : 0.0;
    return {e, a * e * u * iota / t1, -a * e * u * log_x, 1.0};
}

}  // namespace

DecayFit fit_decay(const DecayCurve& curve, const DecayFitOptions& opts) {
    curve.validate();
    const auto& s = curve.samples;
    const auto n = static_cast<int>(s.size());
    if (n < 6) {
        throw DataError("fit_decay: need at least 6 samples, got " + std::to_string(n));
    }
    double t_min = 0.0;
    for (const auto& p : s) {
        if (p.t > 0.0) {
            t_min = p.t;
            break;
        }
    }
    const double t_max = s.back().t;
    if (!(t_min > 0.0) || t_max < 10.0 * t_min) {
        throw DataError("fit_decay: sample times must span at least one decade");
    }
    if (!(opts.iota_min > 0.0 && opts.iota_max > opts.iota_min)) {
        throw ConfigError("decay_fit.iota bounds: need 0 < iota_min < iota_max");
    }
    const DecayParam map{opts.iota_min, opts.iota_max};

    ResidualFunction residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double a = p(0);
        const double t1 = std::exp(p(1));
        const double iota = map.iota(p(2));
        const double c = p(3);
        for (int i = 0; i < n; ++i) {
            r(i) = (s[i].y - stretched_exponential(s[i].t, a, t1, iota, c)) / s[i].sigma;
            if (jac != nullptr) {
                const Eigen::Vector4d g = natural_gradient(s[i].t, a, t1, iota);
                const double w = -1.0 / s[i].sigma;
                (*jac)(i, 0) = w * g(0);
                (*jac)(i, 1) = w * g(1) * t1;
                (*jac)(i, 2) = w * g(2) * map.diota(p(2));
                (*jac)(i, 3) = w * g(3);
            }
        }
    };

    LeastSquaresOptions lso;
    lso.max_evaluations = opts.max_evaluations;
    LeastSquaresResult best;
    best.cost = std::numeric_limits<double>::infinity();
    int starts = 0;
    const double a0 = s.front().y - s.back().y;
    const double c0 = s.back().y;
    for (int k = 0; k < 5; ++k) {
        const double t1_0 = t_min * std::pow(t_max / t_min, (k + 0.5) / 5.0);
        for (double iota0 : {0.5, 1.0, 1.5}) {
            Eigen::VectorXd x0(4);
            x0 << a0, std::log(t1_0), map.s_of(std::clamp(iota0, opts.iota_min, opts.iota_max)), c0;
            ++starts;
            const LeastSquaresResult r = least_squares(residuals, n, x0, lso);
            if (std::isfinite(r.cost) && r.cost < best.cost) {
                best = r;
            }
        }
    }
    if (!std::isfinite(best.cost)) {
        throw ConvergenceError("fit_decay: no start converged");
    }

    DecayFit fit;
    fit.starts = starts;
    fit.params = {best.x(0), std::exp(best.x(1)), map.iota(best.x(2)), best.x(3)};
    fit.chi2 = best.cost;
    fit.chi2_reduced = n > 4 ? best.cost / (n - 4) : 0.0;

    Eigen::MatrixXd j(n, 4);
    for (int i = 0; i < n; ++i) {
        j.row(i) = natural_gradient(s[i].t, fit.params[0], fit.params[1], fit.params[2]).transpose() / s[i].sigma;
    }
    const Eigen::Matrix4d info = j.transpose() * j;
    const Eigen::JacobiSVD<Eigen::Matrix4d> svd(info);
    const auto sv = svd.singularValues();
    // Column scaling keeps the rank test independent of parameter units.
    const Eigen::Vector4d scale = info.diagonal().cwiseSqrt().cwiseMax(1e-300);
    const Eigen::Matrix4d scaled = scale.cwiseInverse().asDiagonal() * info * scale.cwiseInverse().asDiagonal();
    const Eigen::JacobiSVD<Eigen::Matrix4d> ssvd(scaled);
    const auto ssv = ssvd.singularValues();
    if (!(sv(0) > 0.0) || ssv(3) < 1e-12 * ssv(0)) {
        throw UnidentifiableError("fit_decay: T1 unidentifiable (amplitude consistent with zero or flat curve)");
    }
    fit.covariance = info.inverse();
    for (int k = 0; k < 4; ++k) {
        fit.sigma[static_cast<std::size_t>(k)] = std::sqrt(std::max(fit.covariance(k, k), 0.0));
    }
    if (std::abs(fit.params[0]) < 3.0 * fit.sigma[0]) {
        throw UnidentifiableError("fit_decay: T1 unidentifiable (|A| below 3 sigma)");
    }
    return fit;
}

double spin_lattice_rate(double temperature, const SpinLatticeParams& p, const PhysicalConstants& pc) {
    if (!(temperature > 0.0)) {
        throw ConfigError("spin_lattice_rate: temperature must be > 0");
    }
    const double kt = pc.k_B * temperature / pc.hbar;  // thermal energy as angular frequency
    double rate = p.c;
    const double xa = p.omega_a / kt;
    if (xa < 700.0) {
        rate += p.a / std::expm1(xa);
    }
    const double xb = p.omega_b / kt;
    if (xb < 700.0) {
        const double sh = std::sinh(0.5 * xb);
        rate += p.b / (4.0 * sh * sh);
    }
    return rate;
}

SpinLatticeParams fit_spin_lattice(const std::vector<RateSample>& data, const SpinLatticeParams& guess,
                                   const PhysicalConstants& pc) {
    if (data.size() < 5) {
        throw DataError("fit_spin_lattice: need at least 5 samples");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!(data[i].temperature > 0.0 && data[i].sigma > 0.0)) {
            throw DataError("fit_spin_lattice: sample " + std::to_string(i) + " needs T > 0 and sigma > 0");
        }
    }
    if (!(guess.a > 0.0 && guess.omega_a > 0.0 && guess.b > 0.0 && guess.omega_b > 0.0)) {
        throw ConfigError("fit_spin_lattice: guess prefactors and energies must be > 0");
    }
    auto unpack = [](const Eigen::VectorXd& x) {
        return SpinLatticeParams{std::exp(x(0)), std::exp(x(1)), std::exp(x(2)), std::exp(x(3)), x(4)};
    };
    ResidualFunction residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd*) {
        const SpinLatticeParams p = unpack(x);
        for (std::size_t i = 0; i < data.size(); ++i) {
            r(static_cast<Eigen::Index>(i)) =
                (data[i].rate - spin_lattice_rate(data[i].temperature, p, pc)) / data[i].sigma;
        }
    };
    Eigen::VectorXd x0(5);
    x0 << std::log(guess.a), std::log(guess.omega_a), std::log(guess.b), std::log(guess.omega_b), guess.c;
    LeastSquaresOptions lso;
    lso.analytic_jacobian = false;
    lso.max_evaluations = 20000;
    const LeastSquaresResult r = least_squares(residuals, static_cast<int>(data.size()), x0, lso);
    if (!std::isfinite(r.cost)) {
        throw ConvergenceError("fit_spin_lattice: least squares diverged");
    }
    return unpack(r.x);
}

}  // namespace spinbath
