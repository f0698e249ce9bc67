// estimator.hpp: least-squares estimation of (tau_e, theta_e, d_nv) from Delta Gamma_1
// data, the acceptance-set confidence region and the depth pipeline.

#pragma once

#include "spinbath/bath_spectrum.hpp"
#include "spinbath/nv_relaxometry.hpp"
#include "spinbath/optimize.hpp"
#include "spinbath/spin_model.hpp"

#include <array>
#include <string>
#include <vector>

namespace spinbath {

struct ForwardModelConfig {
    SpinSystemSpec base;  ///< b_field and theta_e are overwritten per grid point
    IsotopeTable isotopes = IsotopeTable::natural_copper();
    PhysicalConstants constants;
    NvConfig nv;
    SpectrumOptions spectrum;
    int theta_points = 91;     ///< uniform over [0, pi/2]
    int tau_points = 97;       ///< log-uniform over [tau_min, tau_max]
    double tau_min = 0.1e-9;
    double tau_max = 100e-9;
    double line_merge_hz = 1e3;  ///< lines closer than this are merged in the cache

    void validate() const;
};

/// Cached unit-coupling rates U(B, tau, theta) = gamma_e^2 S_e(omega_NV) / b0^2.
/// Tabulated per field on a (theta, log tau) grid and interpolated with
/// bicubic Catmull-Rom on log U. theta is reflected at 0 and pi/2.
class ForwardModel {
public:
    ForwardModel(ForwardModelConfig cfg, std::vector<double> fields_gauss);

    [[nodiscard]] const ForwardModelConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const std::vector<double>& fields_gauss() const noexcept { return fields_; }
    /// Index of the cached field equal to b_gauss (to 1e-9 G); throws ConfigError otherwise.
    [[nodiscard]] std::size_t field_index(double b_gauss) const;

    [[nodiscard]] double unit_rate(std::size_t field, double tau, double theta) const;
    /// Same quantity from a fresh diagonalization, bypassing the cache.
    [[nodiscard]] double exact_unit_rate(double b_gauss, double tau, double theta) const;

    [[nodiscard]] double delta_gamma(std::size_t field, double tau, double theta, const FilmGeometry& g) const;

private:
    ForwardModelConfig cfg_;
    std::vector<double> fields_;
    double log_tau_min_ = 0.0;
    double log_tau_step_ = 0.0;
    double theta_step_ = 0.0;
    // table_[field][theta_index * tau_points + tau_index] = log U
    std::vector<std::vector<double>> table_;
};

enum class FitParam { tau_e, theta_e, d_nv };

const char* to_string(FitParam p);
FitParam fit_param_from_string(const std::string& s);

struct ParamBox {
    double lo = 0.0;
    double hi = 0.0;
};

/// Fixed value with its 95% interval I_ind (possibly degenerate).
struct FixedParam {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    static FixedParam exact(double v) { return {v, v, v}; }
    [[nodiscard]] bool degenerate() const noexcept { return lo == hi; }
};

enum class Weighting { sigma, relative };
enum class AcceptanceMode { every_point, aggregate };

struct FitOptions {
    int grid_points = 64;
    int max_refinements = 16;
    double dedup_tolerance = 0.02;     ///< normalized-coordinate distance
    double multi_minimum_delta = 1.0;  ///< objective gap for a competing minimum
    NelderMeadOptions simplex{0.02, 2000, 1e-12, 1e-9};
    Weighting weighting = Weighting::sigma;
    AcceptanceMode acceptance = AcceptanceMode::every_point;
    double epsilon_scale = 2.0;  ///< epsilon_exp = epsilon_scale * sigma per point
    int region_points = 64;
    double tau_unit = 1.0;  ///< seconds per user tau unit; boxes and results use user units
};

struct FitProblem {
    std::vector<MeasurementRecord> data;
    std::vector<FitParam> free;
    ParamBox tau_box{0.1e-9, 100e-9};
    ParamBox theta_box{0.0, kPi / 2.0};
    ParamBox d_box{2e-9, 50e-9};
    FixedParam tau_e = FixedParam::exact(2e-9);
    FixedParam theta_e = FixedParam::exact(0.0);
    FixedParam d_nv = FixedParam::exact(10e-9);
    FixedParam h = FixedParam::exact(27e-9);
    FixedParam n_e = FixedParam::exact(1e27);
    const ForwardModel* model = nullptr;
    FitOptions options;

    void validate() const;
};

enum class FitStatus { converged, multi_minimum, unidentifiable };

const char* to_string(FitStatus s);

struct Minimum {
    std::vector<double> x;      ///< free parameters in problem order (tau in user units)
    std::vector<double> sigma;  ///< local curvature 1-sigma; NaN where undefined
    double objective = 0.0;
    bool at_boundary = false;
    bool converged = false;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct ConfidenceRegion {
    std::vector<std::vector<Interval>> intervals;  ///< per free parameter, ascending, disjoint
    std::vector<Interval> bounds;                  ///< per free parameter hull
    std::size_t accepted = 0;
    std::size_t evaluated = 0;
    bool contains_global_minimum = false;

    [[nodiscard]] bool empty() const noexcept { return accepted == 0; }
};

struct LandscapeSample {
    std::vector<double> x;
    double objective = 0.0;
};

struct FitResult {
    FitStatus status = FitStatus::converged;
    std::vector<FitParam> free;
    std::vector<Minimum> minima;  ///< sorted by objective
    ConfidenceRegion confidence;
    std::vector<LandscapeSample> landscape;
    std::vector<std::string> warnings;
    std::string diagnostic;
};

/// Objective at free-parameter values x (user units), fixed parameters at their values.
double objective(const std::vector<double>& x, const FitProblem& problem);

/// Delta Gamma_1^th at each record for the full parameter set.
std::vector<double> predicted_delta_gamma(const FitProblem& problem, double tau, double theta,
                                          const FilmGeometry& g);

FitResult fit(const FitProblem& problem);

/// Accepted set of the free parameters per the per-point epsilon criterion. Nuisance
/// corners bound b0^2; existence of a b0^2 inside that range is solved exactly.
ConfidenceRegion confidence_region(const FitProblem& problem, const FitResult& result);

/// Free = {d_nv, theta_e} with tau_e fixed; fit plus confidence region and guards.
FitResult estimate_depth(FitProblem problem);

/// Relative spread (max - min) / mean of the unit rate over theta_e above which
/// estimate_depth warns that a field is not detuned.
inline constexpr double kDepthSensitivityLimit = 0.5;

/// Relative theta_e variation of the unit rate at fixed tau; large values mean the
/// field is not detuned from the hyperfine lines.
double theta_sensitivity(const ForwardModel& model, std::size_t field, double tau);

}  // namespace spinbath
