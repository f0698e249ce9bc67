#include "spinbath/errors.hpp"
#include "spinbath/estimator.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace spinbath;

namespace {

const ForwardModel& small_model() {
    static const ForwardModel model = [] {
        auto cfg = testing::shipped_config().forward_model_config();
        cfg.theta_points = 31;
        cfg.tau_points = 41;
        return ForwardModel(cfg, {231.0, 461.0, 721.0});
    }();
    return model;
}

const FilmGeometry kGeom{10e-9, 27e-9, 1.7174e27};

// Noiseless records at the truth with a 5% quoted sigma.
std::vector<MeasurementRecord> records(const ForwardModel& m, double tau, double theta, const FilmGeometry& g,
                                       const std::vector<double>& fields, double noise = 0.0,
                                       std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<MeasurementRecord> out;
    const double t1_free = 1e-3;
    for (double b : fields) {
        const double dg = m.delta_gamma(m.field_index(b), tau, theta, g);
        const double sigma = 0.05 * dg;
        const double rate = 1.0 / t1_free + dg + noise * sigma * n(rng);
        const double t1 = 1.0 / rate;
        out.push_back({"nv", b, t1, sigma * t1 * t1, t1_free, 1e-12});
    }
    return out;
}

FitProblem base_problem(const std::vector<MeasurementRecord>& data) {
    FitProblem p;
    p.data = data;
    p.free = {FitParam::tau_e, FitParam::theta_e};
    p.model = &small_model();
    p.d_nv = FixedParam::exact(kGeom.d_nv);
    p.h = FixedParam::exact(kGeom.h);
    p.n_e = FixedParam::exact(kGeom.n_e);
    p.tau_e = FixedParam::exact(2e-9);
    p.options.grid_points = 32;
    p.options.region_points = 24;
    return p;
}

}  // namespace

TEST_CASE("cached unit rate tracks a fresh diagonalization") {
    const auto& m = small_model();
    for (double theta : {0.13, 0.77, 1.31}) {
        for (double tau : {0.7e-9, 3.3e-9}) {
            for (double b : {231.0, 461.0}) {
                const double cached = m.unit_rate(m.field_index(b), tau, theta);
                CHECK(testing::rel_diff(cached, m.exact_unit_rate(b, tau, theta)) < 2e-2);
            }
        }
    }
    CHECK_THROWS_AS((void)m.field_index(300.0), ConfigError);
}

TEST_CASE("noiseless round trip stays within grid resolution") {
    const double tau = 2e-9;
    const double theta = units::deg_to_rad(35.0);
    const auto data = records(small_model(), tau, theta, kGeom, {231.0, 461.0, 721.0});
    const FitResult r = fit(base_problem(data));
    REQUIRE(!r.minima.empty());
    const auto& best = r.minima.front();
    CHECK(best.objective < 1e-6);
    CHECK(std::abs(std::log(best.x[0] / tau)) < std::log(1000.0) / 31.0);
    CHECK(std::abs(best.x[1] - theta) < (kPi / 2) / 31.0);
    for (const auto& s : r.landscape) {
        CHECK(best.objective <= s.objective + 1e-12);
    }
    CHECK(r.confidence.contains_global_minimum);
}

TEST_CASE("argmin is invariant under tau units") {
    const auto data = records(small_model(), 1.5e-9, 0.6, kGeom, {231.0, 461.0, 721.0}, 1.0, 4);
    FitProblem secs = base_problem(data);
    FitProblem ns = secs;
    ns.options.tau_unit = 1e-9;
    ns.tau_box = {secs.tau_box.lo * 1e9, secs.tau_box.hi * 1e9};
    ns.tau_e = FixedParam::exact(2.0);
    const auto a = fit(secs);
    const auto b = fit(ns);
    REQUIRE(!a.minima.empty());
    REQUIRE(!b.minima.empty());
    CHECK(a.minima.front().x[1] == doctest::Approx(b.minima.front().x[1]).epsilon(1e-6));
    CHECK(a.minima.front().x[0] * 1e9 == doctest::Approx(b.minima.front().x[0]).epsilon(1e-6));
}

TEST_CASE("confidence region limits") {
    const auto data = records(small_model(), 2e-9, 0.5, kGeom, {231.0, 461.0, 721.0}, 1.0, 8);
    FitProblem p = base_problem(data);
    p.options.epsilon_scale = 1e6;
    const auto wide = fit(p);
    CHECK(wide.confidence.accepted == wide.confidence.evaluated);

    // Widening I_ind for d_nv never shrinks the tau interval.
    FitProblem narrow = base_problem(data);
    narrow.d_nv = {kGeom.d_nv, kGeom.d_nv - 0.5e-9, kGeom.d_nv + 0.5e-9};
    FitProblem broad = narrow;
    broad.d_nv = {kGeom.d_nv, kGeom.d_nv - 1.5e-9, kGeom.d_nv + 1.5e-9};
    const auto rn = fit(narrow);
    const auto rb = fit(broad);
    REQUIRE(!rn.confidence.empty());
    CHECK(rb.confidence.accepted >= rn.confidence.accepted);
    CHECK(rb.confidence.bounds[0].lo <= rn.confidence.bounds[0].lo);
    CHECK(rb.confidence.bounds[0].hi >= rn.confidence.bounds[0].hi);
}

TEST_CASE("too few fields is unidentifiable") {
    const auto data = records(small_model(), 2e-9, 0.5, kGeom, {461.0});
    const auto r = fit(base_problem(data));
    CHECK(r.status == FitStatus::unidentifiable);
    CHECK(!r.diagnostic.empty());
}

TEST_CASE("depth at the box edge is flagged") {
    FilmGeometry deep = kGeom;
    deep.d_nv = 30e-9;
    const auto data = records(small_model(), 2e-9, 0.5, deep, {231.0, 721.0});
    FitProblem p = base_problem(data);
    p.d_box = {2e-9, 20e-9};
    const auto r = estimate_depth(p);
    REQUIRE(!r.minima.empty());
    CHECK(r.minima.front().at_boundary);
    CHECK(r.minima.front().x[0] == doctest::Approx(20e-9).epsilon(1e-3));
}

TEST_CASE("depth round trip on detuned fields") {
    FilmGeometry g = kGeom;
    g.d_nv = 12e-9;
    const auto data = records(small_model(), 2e-9, 0.9, g, {231.0, 721.0});
    const auto r = estimate_depth(base_problem(data));
    REQUIRE(!r.minima.empty());
    CHECK(std::abs(r.minima.front().x[0] - 12e-9) < 0.3e-9);
}

TEST_CASE("parameter names round trip") {
    for (auto p : {FitParam::tau_e, FitParam::theta_e, FitParam::d_nv}) {
        CHECK(fit_param_from_string(to_string(p)) == p);
    }
    CHECK_THROWS_AS(fit_param_from_string("h"), ConfigError);
}
