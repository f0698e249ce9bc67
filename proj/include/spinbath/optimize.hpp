// optimize.hpp: box-constrained simplex descent and a Levenberg-Marquardt wrapper.

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace spinbath {

struct NelderMeadOptions {
    double initial_step = 0.05;  ///< simplex edge, in the same units as x
    int max_evaluations = 2000;
    double f_tol = 1e-12;
    double x_tol = 1e-9;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Minimize f over the box [lo, hi]. Trial points are projected onto the box, so
/// the returned point always lies inside it. Deterministic.
NelderMeadResult nelder_mead_box(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 const NelderMeadOptions& opts = {});

/// Residual callback: fill r (size m); fill jac (m x n) when non-null.
using ResidualFunction = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LeastSquaresOptions {
    int max_evaluations = 4000;
    double x_tol = 1e-14;
    double f_tol = 1e-14;
    bool analytic_jacobian = true;  ///< false: central differences
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    double cost = 0.0;  ///< sum of squared residuals
    int status = 0;
    int evaluations = 0;
    bool converged = false;
};

LeastSquaresResult least_squares(const ResidualFunction& f, int n_residuals, Eigen::VectorXd x0,
                                 const LeastSquaresOptions& opts = {});

}  // namespace spinbath
