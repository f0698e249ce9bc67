#include "spinbath/estimator.hpp"

#include "spinbath/errors.hpp"
#include "spinbath/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace spinbath {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::array<double, 4> catmull_rom(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2)};
}

double fold_theta(double theta) {
    theta = std::fmod(std::abs(theta), kPi);
    return theta > kPi / 2.0 ? kPi - theta : theta;
}

}  // namespace

void ForwardModelConfig::validate() const {
    base.validate();
    isotopes.validate();
    constants.validate();
    nv.validate();
    if (theta_points < 4) {
        throw ConfigError("forward_model.theta_points: must be >= 4");
    }
    if (tau_points < 4) {
        throw ConfigError("forward_model.tau_points: must be >= 4");
    }
    if (!(tau_min > 0.0 && tau_max > tau_min)) {
        throw ConfigError("forward_model.tau range: need 0 < tau_min < tau_max");
    }
    if (!(line_merge_hz >= 0.0)) {
        throw ConfigError("forward_model.line_merge_hz: must be >= 0");
    }
}

ForwardModel::ForwardModel(ForwardModelConfig cfg, std::vector<double> fields_gauss)
    : cfg_(std::move(cfg)), fields_(std::move(fields_gauss)) {
    cfg_.validate();
    for (double b : fields_) {
        if (!(std::isfinite(b) && b >= 0.0)) {
            throw ConfigError("forward_model.fields: must be finite and >= 0 G");
        }
    }
    const auto nt = static_cast<std::size_t>(cfg_.theta_points);
    const auto nl = static_cast<std::size_t>(cfg_.tau_points);
    log_tau_min_ = std::log(cfg_.tau_min);
    log_tau_step_ = (std::log(cfg_.tau_max) - log_tau_min_) / static_cast<double>(nl - 1);
    theta_step_ = (kPi / 2.0) / static_cast<double>(nt - 1);

    table_.assign(fields_.size(), std::vector<double>(nt * nl, 0.0));
    const double gamma2 = cfg_.nv.gamma_e * cfg_.nv.gamma_e;
    const double merge = kTwoPi * cfg_.line_merge_hz;
    parallel_for(fields_.size() * nt, [&](std::size_t job) {
        const std::size_t f = job / nt;
        const std::size_t it = job % nt;
        SpinSystemSpec spec = cfg_.base;
        spec.b_field = units::gauss_to_tesla(fields_[f]);
        spec.theta_e = std::min(static_cast<double>(it) * theta_step_, kPi / 2.0);
        const TransitionSpectrum ts = isotope_resolved_spectrum(spec, cfg_.isotopes, cfg_.constants, cfg_.spectrum);
        std::vector<FoldedLines> folded;
        for (const auto& iso : ts.isotopes) {
            folded.push_back(fold_lines(iso, merge));
        }
        const double w = nv_frequency(cfg_.nv, spec.b_field);
        for (std::size_t il = 0; il < nl; ++il) {
            const double tau = std::exp(log_tau_min_ + static_cast<double>(il) * log_tau_step_);
            table_[f][it * nl + il] = std::log(gamma2 * unit_spectral_density(folded, tau, w));
        }
    });
}

std::size_t ForwardModel::field_index(double b_gauss) const {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        if (std::abs(fields_[i] - b_gauss) <= 1e-9) {
            return i;
        }
    }
    throw ConfigError("forward model has no cached field at " + std::to_string(b_gauss) + " G");
}

double ForwardModel::unit_rate(std::size_t field, double tau, double theta) const {
    const auto& tab = table_.at(field);
    const int nt = cfg_.theta_points;
    const int nl = cfg_.tau_points;

    const double st = fold_theta(theta) / theta_step_;
    const int it = std::clamp(static_cast<int>(std::floor(st)), 0, nt - 2);
    const double sl = (std::log(tau) - log_tau_min_) / log_tau_step_;
    const int il = std::clamp(static_cast<int>(std::floor(sl)), 0, nl - 2);
    const auto wt = catmull_rom(st - it);
    const auto wl = catmull_rom(sl - il);

    auto at = [&](int i, int l) {
        if (i < 0) {
            i = -i;
        } else if (i > nt - 1) {
            i = 2 * (nt - 1) - i;
        }
        const auto row = static_cast<std::size_t>(i) * static_cast<std::size_t>(nl);
        if (l < 0) {
            return 2.0 * tab[row] - tab[row + 1];
        }
        if (l > nl - 1) {
            const auto last = row + static_cast<std::size_t>(nl - 1);
            return 2.0 * tab[last] - tab[last - 1];
        }
        return tab[row + static_cast<std::size_t>(l)];
    };

    double v = 0.0;
    for (int a = 0; a < 4; ++a) {
        double inner = 0.0;
        for (int b = 0; b < 4; ++b) {
            inner += wl[static_cast<std::size_t>(b)] * at(it - 1 + a, il - 1 + b);
        }
        v += wt[static_cast<std::size_t>(a)] * inner;
    }
    return std::exp(v);
}

double ForwardModel::exact_unit_rate(double b_gauss, double tau, double theta) const {
    SpinSystemSpec spec = cfg_.base;
    spec.b_field = units::gauss_to_tesla(b_gauss);
    spec.theta_e = fold_theta(theta);
    const TransitionSpectrum ts = isotope_resolved_spectrum(spec, cfg_.isotopes, cfg_.constants, cfg_.spectrum);
    std::vector<FoldedLines> folded;
    for (const auto& iso : ts.isotopes) {
        folded.push_back(fold_lines(iso));
    }
    const double gamma2 = cfg_.nv.gamma_e * cfg_.nv.gamma_e;
    return gamma2 * unit_spectral_density(folded, tau, nv_frequency(cfg_.nv, spec.b_field));
}

double ForwardModel::delta_gamma(std::size_t field, double tau, double theta, const FilmGeometry& g) const {
    return coupling_b0_sq(g, cfg_.constants) * unit_rate(field, tau, theta);
}

const char* to_string(FitParam p) {
    switch (p) {
        case FitParam::tau_e:
            return "tau_e";
        case FitParam::theta_e:
            return "theta_e";
        case FitParam::d_nv:
            return "d_nv";
    }
    return "?";
}

FitParam fit_param_from_string(const std::string& s) {
    if (s == "tau_e") {
        return FitParam::tau_e;
    }
    if (s == "theta_e") {
        return FitParam::theta_e;
    }
    if (s == "d_nv") {
        return FitParam::d_nv;
    }
    throw ConfigError("unknown fit parameter '" + s + "' (expected tau_e, theta_e or d_nv)");
}

const char* to_string(FitStatus s) {
    switch (s) {
        case FitStatus::converged:
            return "converged";
        case FitStatus::multi_minimum:
            return "multi-minimum";
        case FitStatus::unidentifiable:
            return "unidentifiable";
    }
    return "?";
}

void FitProblem::validate() const {
    if (model == nullptr) {
        throw ConfigError("fit: no forward model attached");
    }
    if (free.empty()) {
        throw ConfigError("fit.free: at least one free parameter required");
    }
    std::set<FitParam> seen;
    for (auto p : free) {
        if (!seen.insert(p).second) {
            throw ConfigError(std::string("fit.free: duplicate parameter ") + to_string(p));
        }
    }
    auto check_box = [](const ParamBox& b, const char* name, bool positive) {
        if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.hi > b.lo) || (positive && !(b.lo > 0.0))) {
            throw ConfigError(std::string("fit.box.") + name + ": need finite lo < hi" + (positive ? " with lo > 0" : ""));
        }
    };
    check_box(tau_box, "tau_e", true);
    check_box(theta_box, "theta_e", false);
    check_box(d_box, "d_nv", true);
    if (theta_box.lo < 0.0 || theta_box.hi > kPi / 2.0 + 1e-12) {
        throw ConfigError("fit.box.theta_e: must lie within [0, 90] degrees");
    }
    const auto& fm = model->config();
    const double tl = tau_box.lo * options.tau_unit;
    const double th = tau_box.hi * options.tau_unit;
    if (tl < fm.tau_min * (1.0 - 1e-9) || th > fm.tau_max * (1.0 + 1e-9)) {
        throw ConfigError("fit.box.tau_e: outside the forward-model tau table range");
    }
    auto check_fixed = [](const FixedParam& f, const char* name, bool positive) {
        if (!(std::isfinite(f.value) && std::isfinite(f.lo) && std::isfinite(f.hi) && f.lo <= f.value &&
              f.value <= f.hi)) {
            throw ConfigError(std::string("fit.fixed.") + name + ": need finite lo <= value <= hi");
        }
        if (positive && !(f.lo > 0.0)) {
            throw ConfigError(std::string("fit.fixed.") + name + ": interval must be > 0");
        }
    };
    check_fixed(tau_e, "tau_e", true);
    check_fixed(theta_e, "theta_e", false);
    check_fixed(d_nv, "d_nv", true);
    check_fixed(h, "h", true);
    check_fixed(n_e, "n_e", true);
    if (options.grid_points < 3 || options.region_points < 2) {
        throw ConfigError("fit.grid_points must be >= 3 and fit.region_points >= 2");
    }
    if (!(options.epsilon_scale > 0.0)) {
        throw ConfigError("fit.epsilon_scale: must be > 0");
    }
    if (!(options.tau_unit > 0.0)) {
        throw ConfigError("fit.tau_unit: must be > 0");
    }
    for (const auto& r : data) {
        r.validate();
        (void)model->field_index(r.b_gauss);
    }
}

namespace {

struct Point {
    double tau;  // seconds
    double theta;
    double d;
};

struct Prepared {
    const FitProblem* p;
    std::vector<std::size_t> field;
    std::vector<double> y;
    std::vector<double> sigma;
    std::vector<double> weight;  // residual divisor

    explicit Prepared(const FitProblem& problem) : p(&problem) {
        for (const auto& r : problem.data) {
            const auto dg = delta_gamma(r);
            field.push_back(problem.model->field_index(r.b_gauss));
            y.push_back(dg.value);
            sigma.push_back(dg.sigma);
            if (problem.options.weighting == Weighting::relative) {
                if (dg.value == 0.0) {
                    throw DataError("record '" + r.nv_id + "': relative weighting needs a nonzero Delta Gamma_1");
                }
                weight.push_back(std::abs(dg.value));
            } else {
                weight.push_back(dg.sigma);
            }
        }
    }

    [[nodiscard]] std::size_t dims() const { return p->free.size(); }

    [[nodiscard]] const ParamBox& box(FitParam f) const {
        switch (f) {
            case FitParam::tau_e:
                return p->tau_box;
            case FitParam::theta_e:
                return p->theta_box;
            case FitParam::d_nv:
                return p->d_box;
        }
        return p->tau_box;
    }

    // Normalized coordinate -> user value.
    [[nodiscard]] double to_user(FitParam f, double u) const {
        const ParamBox& b = box(f);
        if (f == FitParam::tau_e) {
            const double ll = std::log(b.lo);
            return std::exp(ll + u * (std::log(b.hi) - ll));
        }
        return b.lo + u * (b.hi - b.lo);
    }

    [[nodiscard]] double to_unit(FitParam f, double x) const {
        const ParamBox& b = box(f);
        if (f == FitParam::tau_e) {
            return (std::log(x) - std::log(b.lo)) / (std::log(b.hi) - std::log(b.lo));
        }
        return (x - b.lo) / (b.hi - b.lo);
    }

    // d(user value)/du
    [[nodiscard]] double jacobian(FitParam f, double u) const {
        const ParamBox& b = box(f);
        if (f == FitParam::tau_e) {
            return to_user(f, u) * (std::log(b.hi) - std::log(b.lo));
        }
        return b.hi - b.lo;
    }

    [[nodiscard]] Point point_from_user(const std::vector<double>& x) const {
        Point pt{p->tau_e.value * p->options.tau_unit, p->theta_e.value, p->d_nv.value};
        for (std::size_t k = 0; k < p->free.size(); ++k) {
            switch (p->free[k]) {
                case FitParam::tau_e:
                    pt.tau = x[k] * p->options.tau_unit;
                    break;
                case FitParam::theta_e:
                    pt.theta = x[k];
                    break;
                case FitParam::d_nv:
                    pt.d = x[k];
                    break;
            }
        }
        return pt;
    }

    [[nodiscard]] std::vector<double> user_from_unit(const Eigen::VectorXd& u) const {
        std::vector<double> x(dims());
        for (std::size_t k = 0; k < dims(); ++k) {
            x[k] = to_user(p->free[k], u(static_cast<Eigen::Index>(k)));
        }
        return x;
    }

    [[nodiscard]] double b0_sq(double d) const {
        return coupling_b0_sq(FilmGeometry{d, p->h.value, p->n_e.value}, p->model->config().constants);
    }

    [[nodiscard]] double objective_at(const Point& pt) const {
        const double b = b0_sq(pt.d);
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = (y[i] - b * p->model->unit_rate(field[i], pt.tau, pt.theta)) / weight[i];
            total += r * r;
        }
        return total;
    }

    [[nodiscard]] double objective_unit(const Eigen::VectorXd& u) const {
        return objective_at(point_from_user(user_from_unit(u)));
    }

    [[nodiscard]] std::size_t informative_points() const {
        std::set<std::size_t> distinct(field.begin(), field.end());
        return distinct.size();
    }
};

bool is_free(const FitProblem& p, FitParam f) {
    return std::find(p.free.begin(), p.free.end(), f) != p.free.end();
}

std::vector<double> probe_values(const FixedParam& f) {
    if (f.degenerate()) {
        return {f.value};
    }
    return {f.lo, f.value, f.hi};
}

// Acceptance of one free-parameter point: nuisance b0^2 range from corner probes,
// then exact existence of an admissible b0^2 for each tau probe.
bool accepted_at(const Prepared& prep, const std::vector<double>& x) {
    const FitProblem& p = *prep.p;
    const Point base = prep.point_from_user(x);
    const auto& pc = p.model->config().constants;

    const std::vector<double> ds = is_free(p, FitParam::d_nv) ? std::vector<double>{base.d} : probe_values(p.d_nv);
    double bmin = std::numeric_limits<double>::infinity();
    double bmax = -bmin;
    for (double d : ds) {
        for (double h : probe_values(p.h)) {
            for (double n : probe_values(p.n_e)) {
                const double b = coupling_b0_sq(FilmGeometry{d, h, n}, pc);
                bmin = std::min(bmin, b);
                bmax = std::max(bmax, b);
            }
        }
    }

    std::vector<double> taus{base.tau};
    if (!is_free(p, FitParam::tau_e) && !p.tau_e.degenerate()) {
        taus.clear();
        for (double t : probe_values(p.tau_e)) {
            taus.push_back(t * p.options.tau_unit);
        }
    }
    std::vector<double> thetas{base.theta};
    if (!is_free(p, FitParam::theta_e) && !p.theta_e.degenerate()) {
        thetas = probe_values(p.theta_e);
    }

    const double scale = p.options.epsilon_scale;
    for (double tau : taus) {
        for (double theta : thetas) {
            if (p.options.acceptance == AcceptanceMode::every_point) {
                double lo = -std::numeric_limits<double>::infinity();
                double hi = std::numeric_limits<double>::infinity();
                bool ok = true;
                for (std::size_t i = 0; i < prep.y.size() && ok; ++i) {
                    const double u = p.model->unit_rate(prep.field[i], tau, theta);
                    const double eps = scale * prep.sigma[i];
                    lo = std::max(lo, (prep.y[i] - eps) / u);
                    hi = std::min(hi, (prep.y[i] + eps) / u);
                    ok = lo < hi;
                }
                if (ok && lo < bmax && hi > bmin) {
                    return true;
                }
            } else {
                double num = 0.0;
                double den = 0.0;
                std::vector<double> us(prep.y.size());
                for (std::size_t i = 0; i < prep.y.size(); ++i) {
                    us[i] = p.model->unit_rate(prep.field[i], tau, theta);
                    const double e2 = std::pow(scale * prep.sigma[i], 2);
                    num += prep.y[i] * us[i] / e2;
                    den += us[i] * us[i] / e2;
                }
                const double b = std::clamp(den > 0.0 ? num / den : bmin, bmin, bmax);
                double q = 0.0;
                for (std::size_t i = 0; i < prep.y.size(); ++i) {
                    q += std::pow((prep.y[i] - b * us[i]) / (scale * prep.sigma[i]), 2);
                }
                if (q < static_cast<double>(prep.y.size())) {
                    return true;
                }
            }
        }
    }
    return false;
}

// Enumerate an n-dimensional grid of `points` per axis; calls fn(index vector).
template <class Fn>
void for_each_grid(std::size_t dims, int points, Fn&& fn) {
    std::vector<int> idx(dims, 0);
    while (true) {
        fn(idx);
        std::size_t k = 0;
        while (k < dims) {
            if (++idx[k] < points) {
                break;
            }
            idx[k] = 0;
            ++k;
        }
        if (k == dims) {
            return;
        }
    }
}

std::vector<double> local_sigma(const Prepared& prep, const Eigen::VectorXd& u) {
    const auto n = static_cast<Eigen::Index>(prep.dims());
    const double h = 1e-3;
    Eigen::MatrixXd hess(n, n);
    const double f0 = prep.objective_unit(u);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            double v;
            if (i == j) {
                Eigen::VectorXd up = u;
                Eigen::VectorXd um = u;
                up(i) += h;
                um(i) -= h;
                v = (prep.objective_unit(up) - 2.0 * f0 + prep.objective_unit(um)) / (h * h);
            } else {
                Eigen::VectorXd pp = u, pm = u, mp = u, mm = u;
                pp(i) += h;
                pp(j) += h;
                pm(i) += h;
                pm(j) -= h;
                mp(i) -= h;
                mp(j) += h;
                mm(i) -= h;
                mm(j) -= h;
                v = (prep.objective_unit(pp) - prep.objective_unit(pm) - prep.objective_unit(mp) +
                     prep.objective_unit(mm)) /
                    (4.0 * h * h);
            }
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(n), kNaN);
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) {
        return out;
    }
    const Eigen::MatrixXd cov = 2.0 * llt.solve(Eigen::MatrixXd::Identity(n, n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        out[kk] = std::sqrt(std::max(cov(k, k), 0.0)) * std::abs(prep.jacobian(prep.p->free[kk], u(k)));
    }
    return out;
}

}  // namespace

std::vector<double> predicted_delta_gamma(const FitProblem& problem, double tau, double theta,
                                          const FilmGeometry& g) {
    std::vector<double> out;
    for (const auto& r : problem.data) {
        out.push_back(problem.model->delta_gamma(problem.model->field_index(r.b_gauss), tau, theta, g));
    }
    return out;
}

double objective(const std::vector<double>& x, const FitProblem& problem) {
    problem.validate();
    if (x.size() != problem.free.size()) {
        throw ConfigError("objective: parameter vector size does not match free parameters");
    }
    const Prepared prep(problem);
    return prep.objective_at(prep.point_from_user(x));
}

FitResult fit(const FitProblem& problem) {
    problem.validate();
    const Prepared prep(problem);
    const std::size_t dims = prep.dims();
    const int n = problem.options.grid_points;

    FitResult result;
    result.free = problem.free;

    if (prep.informative_points() < dims) {
        result.status = FitStatus::unidentifiable;
        result.diagnostic = std::to_string(prep.informative_points()) + " informative field point(s) for " +
                            std::to_string(dims) + " free parameter(s)";
        return result;
    }

    // Grid scan.
    std::size_t total = 1;
    for (std::size_t k = 0; k < dims; ++k) {
        total *= static_cast<std::size_t>(n);
    }
    std::vector<double> values(total);
    std::vector<std::vector<int>> indices;
    indices.reserve(total);
    for_each_grid(dims, n, [&](const std::vector<int>& idx) { indices.push_back(idx); });
    auto unit_of = [&](const std::vector<int>& idx) {
        Eigen::VectorXd u(static_cast<Eigen::Index>(dims));
        for (std::size_t k = 0; k < dims; ++k) {
            u(static_cast<Eigen::Index>(k)) = static_cast<double>(idx[k]) / (n - 1);
        }
        return u;
    };
    parallel_for(total, [&](std::size_t i) { values[i] = prep.objective_unit(unit_of(indices[i])); });

    result.landscape.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        result.landscape.push_back({prep.user_from_unit(unit_of(indices[i])), values[i]});
    }

    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (!(std::isfinite(*mn)) || *mx - *mn <= 1e-12 * (1.0 + std::abs(*mn))) {
        result.status = FitStatus::unidentifiable;
        result.diagnostic = "objective is flat over the search box";
        return result;
    }

    // Local minima of the grid (<= every neighbour).
    auto flat = [&](const std::vector<int>& idx) {
        std::size_t f = 0;
        for (std::size_t k = dims; k-- > 0;) {
            f = f * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx[k]);
        }
        return f;
    };
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < total; ++i) {
        const auto& idx = indices[i];
        bool lowest = true;
        for_each_grid(dims, 3, [&](const std::vector<int>& off) {
            if (!lowest) {
                return;
            }
            std::vector<int> nb = idx;
            bool centre = true;
            for (std::size_t k = 0; k < dims; ++k) {
                nb[k] += off[k] - 1;
                centre = centre && off[k] == 1;
                if (nb[k] < 0 || nb[k] >= n) {
                    return;
                }
            }
            if (!centre && values[flat(nb)] < values[i]) {
                lowest = false;
            }
        });
        if (lowest) {
            candidates.push_back(i);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (candidates.size() > static_cast<std::size_t>(problem.options.max_refinements)) {
        candidates.resize(static_cast<std::size_t>(problem.options.max_refinements));
    }

    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims));
    const Eigen::VectorXd hi = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dims));
    struct Refined {
        Eigen::VectorXd u;
        double f;
        bool converged;
    };
    std::vector<Refined> refined(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t c) {
        const auto r = nelder_mead_box([&](const Eigen::VectorXd& u) { return prep.objective_unit(u); },
                                       unit_of(indices[candidates[c]]), lo, hi, problem.options.simplex);
        refined[c] = {r.x, r.f, r.converged};
    });
    std::stable_sort(refined.begin(), refined.end(), [](const Refined& a, const Refined& b) { return a.f < b.f; });

    std::vector<Refined> kept;
    for (const auto& r : refined) {
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Refined& k) {
            return (k.u - r.u).cwiseAbs().maxCoeff() < problem.options.dedup_tolerance;
        });
        if (!dup) {
            kept.push_back(r);
        }
    }

    const double edge = 0.5 / (n - 1);
    for (const auto& r : kept) {
        Minimum m;
        m.x = prep.user_from_unit(r.u);
        m.objective = r.f;
        m.converged = r.converged;
        m.at_boundary = (r.u.array() < edge).any() || (r.u.array() > 1.0 - edge).any();
        m.sigma = local_sigma(prep, r.u);
        result.minima.push_back(std::move(m));
    }
    if (result.minima.empty()) {
        result.status = FitStatus::unidentifiable;
        result.diagnostic = "no local minimum found";
        return result;
    }

    const double best = result.minima.front().objective;
    const auto competing = std::count_if(result.minima.begin(), result.minima.end(), [&](const Minimum& m) {
        return m.objective <= best + problem.options.multi_minimum_delta;
    });
    result.status = competing > 1 ? FitStatus::multi_minimum : FitStatus::converged;
    for (const auto& m : result.minima) {
        if (m.at_boundary && m.objective <= best + problem.options.multi_minimum_delta) {
            result.warnings.push_back("minimum at search-box boundary");
            break;
        }
    }
    result.confidence = confidence_region(problem, result);
    if (result.confidence.empty()) {
        result.warnings.push_back("confidence region is empty: model and data are inconsistent at epsilon_exp");
    }
    return result;
}

ConfidenceRegion confidence_region(const FitProblem& problem, const FitResult& result) {
    problem.validate();
    const Prepared prep(problem);
    const std::size_t dims = prep.dims();
    const int n = problem.options.region_points;

    std::vector<std::vector<int>> indices;
    for_each_grid(dims, n, [&](const std::vector<int>& idx) { indices.push_back(idx); });
    std::vector<char> ok(indices.size(), 0);
    parallel_for(indices.size(), [&](std::size_t i) {
        std::vector<double> x(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            x[k] = prep.to_user(problem.free[k], static_cast<double>(indices[i][k]) / (n - 1));
        }
        ok[i] = accepted_at(prep, x) ? 1 : 0;
    });

    ConfidenceRegion region;
    region.evaluated = indices.size();
    std::vector<std::vector<char>> axis_hit(dims, std::vector<char>(static_cast<std::size_t>(n), 0));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (ok[i]) {
            ++region.accepted;
            for (std::size_t k = 0; k < dims; ++k) {
                axis_hit[k][static_cast<std::size_t>(indices[i][k])] = 1;
            }
        }
    }

    const bool have_min = !result.minima.empty();
    const bool min_ok = have_min && accepted_at(prep, result.minima.front().x);
    if (have_min) {
        ++region.evaluated;
    }
    if (min_ok) {
        ++region.accepted;
    }

    region.intervals.resize(dims);
    region.bounds.resize(dims);
    for (std::size_t k = 0; k < dims; ++k) {
        auto& iv = region.intervals[k];
        const FitParam f = problem.free[k];
        int i = 0;
        while (i < n) {
            if (!axis_hit[k][static_cast<std::size_t>(i)]) {
                ++i;
                continue;
            }
            int j = i;
            while (j + 1 < n && axis_hit[k][static_cast<std::size_t>(j + 1)]) {
                ++j;
            }
            iv.push_back({prep.to_user(f, static_cast<double>(i) / (n - 1)),
                          prep.to_user(f, static_cast<double>(j) / (n - 1))});
            i = j + 1;
        }
        if (min_ok) {
            const double x = result.minima.front().x[k];
            const bool inside = std::any_of(iv.begin(), iv.end(), [&](const Interval& v) { return v.lo <= x && x <= v.hi; });
            if (!inside) {
                // Attach to an interval whose grid neighbour brackets x, else stand alone.
                const double step = 1.0 / (n - 1);
                bool merged = false;
                for (auto& v : iv) {
                    if (std::abs(prep.to_unit(f, x) - prep.to_unit(f, v.lo)) <= step + 1e-12 && x < v.lo) {
                        v.lo = x;
                        merged = true;
                        break;
                    }
                    if (std::abs(prep.to_unit(f, x) - prep.to_unit(f, v.hi)) <= step + 1e-12 && x > v.hi) {
                        v.hi = x;
                        merged = true;
                        break;
                    }
                }
                if (!merged) {
                    iv.push_back({x, x});
                    std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
                }
            }
        }
        if (!iv.empty()) {
            region.bounds[k] = {iv.front().lo, iv.back().hi};
        } else {
            region.bounds[k] = {kNaN, kNaN};
        }
    }
    region.contains_global_minimum = min_ok;
    return region;
}

double theta_sensitivity(const ForwardModel& model, std::size_t field, double tau) {
    const int nt = model.config().theta_points;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double sum = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double v = model.unit_rate(field, tau, (kPi / 2.0) * i / (nt - 1));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    return (hi - lo) / (sum / nt);
}

FitResult estimate_depth(FitProblem problem) {
    problem.free = {FitParam::d_nv, FitParam::theta_e};
    problem.validate();
    FitResult result = fit(problem);
    std::set<std::size_t> fields;
    for (const auto& r : problem.data) {
        fields.insert(problem.model->field_index(r.b_gauss));
    }
    const double tau = problem.tau_e.value * problem.options.tau_unit;
    for (std::size_t f : fields) {
        const double s = theta_sensitivity(*problem.model, f, tau);
        if (s > kDepthSensitivityLimit) {
            result.warnings.push_back("field " + std::to_string(problem.model->fields_gauss()[f]) +
                                      " G: theta_e sensitivity " + std::to_string(s) +
                                      " exceeds the detuned-field precondition");
        }
    }
    return result;
}

}  // namespace spinbath
