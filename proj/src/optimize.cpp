#include "spinbath/optimize.hpp"

#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace spinbath {

NelderMeadResult nelder_mead_box(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 const NelderMeadOptions& opts) {
    const Eigen::Index n = x0.size();
    auto project = [&](Eigen::VectorXd x) { return x.cwiseMax(lo).cwiseMin(hi); };
    NelderMeadResult res;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++res.evaluations;
        return f(x);
    };

    std::vector<Eigen::VectorXd> pts;
    std::vector<double> vals;
    pts.push_back(project(x0));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd p = pts[0];
        // Step inward when the start sits on the upper face.
        const double step = (p(i) + opts.initial_step <= hi(i)) ? opts.initial_step : -opts.initial_step;
        p(i) += step;
        pts.push_back(project(p));
    }
    for (const auto& p : pts) {
        vals.push_back(eval(p));
    }

    std::vector<std::size_t> order(pts.size());
    while (res.evaluations < opts.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        double spread = 0.0;
        for (const auto& p : pts) {
            spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
        }
        if (std::abs(vals[worst] - vals[best]) <= opts.f_tol * (std::abs(vals[best]) + opts.f_tol) &&
            spread <= opts.x_tol) {
            res.converged = true;
            break;
        }
        if (spread <= opts.x_tol * 1e-3) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (k != worst) {
                centroid += pts[k];
            }
        }
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = project(centroid + (centroid - pts[worst]));
        const double fr = eval(xr);
        if (fr < vals[best]) {
            const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - pts[worst]));
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Eigen::VectorXd xc =
            outside ? project(centroid + 0.5 * (xr - centroid)) : project(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (k != best) {
                pts[k] = project(pts[best] + 0.5 * (pts[k] - pts[best]));
                vals[k] = eval(pts[k]);
            }
        }
    }

    const auto it = std::min_element(vals.begin(), vals.end());
    res.x = pts[static_cast<std::size_t>(it - vals.begin())];
    res.f = *it;
    return res;
}

namespace {

struct Adapter {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const ResidualFunction* fn;
    int n_in;
    int n_out;
    bool analytic;
    int* counter;

    int inputs() const { return n_in; }
    int values() const { return n_out; }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        ++*counter;
        r.resize(n_out);
        (*fn)(x, r, nullptr);
        return r.allFinite() ? 0 : -1;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
        jac.resize(n_out, n_in);
        Eigen::VectorXd r(n_out);
        if (analytic) {
            (*fn)(x, r, &jac);
            return jac.allFinite() ? 0 : -1;
        }
        Eigen::VectorXd rp(n_out);
        Eigen::VectorXd rm(n_out);
        for (int j = 0; j < n_in; ++j) {
            const double h = 1e-6 * std::max(std::abs(x(j)), 1.0);
            Eigen::VectorXd xp = x;
            Eigen::VectorXd xm = x;
            xp(j) += h;
            xm(j) -= h;
            (*fn)(xp, rp, nullptr);
            (*fn)(xm, rm, nullptr);
            jac.col(j) = (rp - rm) / (2.0 * h);
        }
        return jac.allFinite() ? 0 : -1;
    }
};

}  // namespace

LeastSquaresResult least_squares(const ResidualFunction& f, int n_residuals, Eigen::VectorXd x0,
                                 const LeastSquaresOptions& opts) {
    LeastSquaresResult res;
    Adapter adapter{&f, static_cast<int>(x0.size()), n_residuals, opts.analytic_jacobian, &res.evaluations};
    Eigen::LevenbergMarquardt<Adapter> lm(adapter);
    lm.parameters.maxfev = opts.max_evaluations;
    lm.parameters.xtol = opts.x_tol;
    lm.parameters.ftol = opts.f_tol;
    const auto status = lm.minimize(x0);
    res.status = static_cast<int>(status);
    res.x = x0;
    Eigen::VectorXd r(n_residuals);
    f(res.x, r, nullptr);
    res.cost = r.squaredNorm();
    using namespace Eigen::LevenbergMarquardtSpace;
    res.converged = std::isfinite(res.cost) &&
                    (status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
                     status == RelativeErrorAndReductionTooSmall || status == CosinusTooSmall ||
                     status == FtolTooSmall || status == XtolTooSmall || status == GtolTooSmall);
    return res;
}

}  // namespace spinbath
