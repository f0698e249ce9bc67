// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when a
// blocking check fails; criterion 6's absolute bands are reported but not blocking
// when the shipped lattice misses them (ordering, dilation and the manifest note are).

#include "spinbath/bath_spectrum.hpp"
#include "spinbath/config.hpp"
#include "spinbath/csv.hpp"
#include "spinbath/ee_solver.hpp"
#include "spinbath/errors.hpp"
#include "spinbath/estimator.hpp"
#include "spinbath/nv_relaxometry.hpp"
#include "spinbath/pipeline.hpp"
#include "spinbath/spin_model.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace spinbath;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Tolerances.
constexpr double kGeometryTol = 1e-2;
constexpr double kTraceTol = 1e-10;
constexpr double kSpectralTol = 1e-2;
constexpr double kGoldenTol = 1e-2;
constexpr double kLindbladTol = 1e-8;
constexpr double kNoHfBand = 0.30;
constexpr double kDeltaBand = 0.50;
constexpr double kDilationTol = 1e-12;
constexpr int kSeeds = 100;
constexpr int kTauWithin3Sigma = 95;
constexpr double kEnsembleTau = 2.0;
constexpr double kEnsembleSpread = 1.1;
constexpr double kNoise = 0.05;
constexpr int kOrientationSeeds = 20;
constexpr double kDetunedSpanDeg = 60.0;
constexpr double kResonantSpanDeg = 20.0;
constexpr double kDepthTruthNm = 12.0;
constexpr double kDepthTolNm = 1.0;
constexpr int kDepthWithin = 90;
constexpr double kSpinLatticeTol = 1e-2;

// Runtime ceilings, seconds.
constexpr double kGeometrySeconds = 10.0;
constexpr double kDiagonalizationSeconds = 60.0;
constexpr double kSpectralSeconds = 30.0;
constexpr double kEeSeconds = 300.0;

const std::vector<double> kFields{231.0, 372.0, 461.0, 721.0};

struct Outcome {
    bool pass = true;
    bool blocking = false;  ///< a failed check that the criterion treats as mandatory
    std::string detail;
};

class Timer {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome require(bool ok, const std::string& detail) { return {ok, !ok, detail}; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("spinbath_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const ToolkitConfig& config() {
    static const ToolkitConfig cfg = testing::shipped_config();
    return cfg;
}

const ForwardModel& model() {
    static const ForwardModel m(config().forward_model_config(), kFields);
    return m;
}

TransitionSpectrum spectrum_at(double b_gauss, double theta) {
    const auto& cfg = config();
    return isotope_resolved_spectrum(cfg.spin_spec(units::gauss_to_tesla(b_gauss), theta), cfg.isotope_table(),
                                     cfg.physical_constants(), cfg.spectrum_options());
}

FitProblem synthetic_problem(const std::vector<double>& fields, double tau, double theta, const FilmGeometry& g,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FitProblem p = config().fit_problem();
    p.model = &model();
    for (double b : fields) {
        const double dg = model().delta_gamma(model().field_index(b), tau, theta, g);
        p.data.push_back(synthetic_record("NV-" + std::to_string(seed), b, dg, kNoise, 1e-3, rng));
    }
    return p;
}

double span_deg(const FitResult& r, std::size_t k) {
    if (r.confidence.bounds.size() <= k || !std::isfinite(r.confidence.bounds[k].lo)) {
        return 0.0;
    }
    return units::rad_to_deg(r.confidence.bounds[k].hi - r.confidence.bounds[k].lo);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion_geometry() {
    const Timer t;
    double worst = 0.0;
    double worst_b0 = 0.0;
    const PhysicalConstants pc = config().physical_constants();
    const double tilt = std::acos(1.0 / std::sqrt(3.0));
    for (const auto& g : {FilmGeometry{10e-9, 27e-9, 1.7174e27}, FilmGeometry{5e-9, 10e-9, 1e27},
                          FilmGeometry{20e-9, 60e-9, 2e27}}) {
        const auto parts = oracle::slab_dipolar_integrals(g.d_nv, g.h, tilt);
        const double total = parts[0] + parts[1];
        worst = std::max({worst, testing::rel_diff(parts[0] / total, 5.0 / 16.0),
                          testing::rel_diff(parts[1] / total, 11.0 / 16.0)});
        const double k = pc.dipolar_field_prefactor();
        worst_b0 = std::max(worst_b0, testing::rel_diff(coupling_b0_sq(g, pc), k * k * g.n_e * 0.25 * total));
    }
    const auto f = geometry_factors();
    const bool factors = f.longitudinal == 5.0 / 16.0 && f.transverse == 11.0 / 16.0;
    const double s = t.seconds();
    return require(worst < kGeometryTol && worst_b0 < kGeometryTol && factors && s < kGeometrySeconds,
                   fmt("quadrature 5/16, 11/16 worst rel %.2e, b0^2 rel %.2e, %.2f s", worst, worst_b0, s));
}

Outcome criterion_dimension() {
    const auto& cfg = config();
    const PhysicalConstants pc = cfg.physical_constants();
    const auto spec0 = cfg.spin_spec(units::gauss_to_tesla(372.0), units::deg_to_rad(30.0));
    const std::size_t dim = spec0.hilbert_dimension();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> b(0.0, 1000.0);
    std::uniform_real_distribution<double> th(0.0, kPi / 2.0);
    double worst = 0.0;
    double slowest = 0.0;
    bool halves = true;
    for (int k = 0; k < 10; ++k) {
        const auto spec = cfg.spin_spec(units::gauss_to_tesla(b(rng)), th(rng));
        const Timer t;
        const auto lines = transition_spectrum(spec, pc, cfg.spectrum_options());
        slowest = std::max(slowest, t.seconds());
        halves = halves && lines.state_count_half == 324;
        const double sum = lines.kept_weight() + lines.diagonal_weight + lines.degenerate_weight + lines.pruned_weight;
        worst = std::max({worst, std::abs(sum - lines.trace_sx2_over_m), std::abs(lines.trace_sx2_over_m - 0.5)});
    }
    return require(dim == 648 && halves && worst < kTraceTol && slowest < kDiagonalizationSeconds,
                   fmt("dimension %zu, M = 324 %s, trace identity worst %.2e over 10 specs, slowest %.2f s", dim,
                       halves ? "yes" : "no", worst, slowest));
}

Outcome criterion_spectral() {
    const Timer t;
    const auto& cfg = config();
    const PhysicalConstants pc = cfg.physical_constants();
    const NvConfig nv = cfg.nv_config();
    const double tau = cfg.bath.tau_e_ns * units::kNanosecond;
    const double theta = units::deg_to_rad(cfg.bath.theta_e_deg);
    double worst = 0.0;
    std::string per_field;
    for (double bg : kFields) {
        const BathSpectrumModel m(spectrum_at(bg, theta), tau, cfg.film_geometry(), pc);
        const double w = nv_frequency(nv, units::gauss_to_tesla(bg));
        // Trapezoid over [0, 20 tau], dt = tau / 200, even extension doubles the half-line integral.
        const int n = 4000;
        const double dt = tau / 200.0;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double ti = i * dt;
            s += ((i == 0 || i == n) ? 0.5 : 1.0) * m.autocorrelation(ti) * std::cos(w * ti);
        }
        s *= 2.0 * dt;
        const double d = testing::rel_diff(s, m.spectral_density(w));
        worst = std::max(worst, d);
        per_field += fmt(" %.0fG:%.1e", bg, d);
    }
    const double secs = t.seconds();
    return require(worst < kSpectralTol && secs < kSpectralSeconds,
                   fmt("transform of G_e vs S_e at w_NV, worst rel %.2e (%s ), %.1f s", worst, per_field.c_str() + 1,
                       secs));
}

Outcome criterion_golden_rule() {
    const PhysicalConstants pc;
    const NvConfig nv;
    const double tau = 0.5e-9;
    const FilmGeometry g{10e-9, 27e-9, 1.7e27};
    IsotopeLines empty;
    empty.abundance = 1.0;
    empty.state_count_half = 1;
    const BathSpectrumModel m(TransitionSpectrum{{empty}}, tau, g, pc);
    double worst = 0.0;
    for (double bg : kFields) {
        const double b = units::gauss_to_tesla(bg);
        const double w = nv_frequency(nv, b);
        const double b0 = m.b0_sq();
        const double rate = oracle::golden_rule_rate(
            [&](double t) { return 5.0 / 16.0 * b0 * std::exp(-t / tau); }, nv.gamma_e, w, 60.0 * tau, 4000);
        worst = std::max(worst, testing::rel_diff(relaxation_rate(m, nv, b), rate));
    }
    return require(worst < kGoldenTol, fmt("single-Lorentzian bath, 4 fields, worst rel %.2e", worst));
}

Outcome criterion_lindblad() {
    const double w0 = kTwoPi * 700e6;
    const double tau = 1.5e-9;
    IsotopeLines lines;
    lines.abundance = 1.0;
    lines.state_count_half = 1;
    lines.transitions = {{w0, 0.25}, {-w0, 0.25}};
    const BathSpectrumModel m(TransitionSpectrum{{lines}}, tau, FilmGeometry{});
    Eigen::Matrix2cd sx, sz;
    sx << 0, 0.5, 0.5, 0;
    sz << 0.5, 0, 0, -0.5;
    const double czz0 = oracle::lindblad_correlation(sz, sz, w0, tau, 0.0).real();
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double t = 0.1e-9 * k;
        const double cxx = oracle::lindblad_correlation(sx, sx, w0, tau, t).real();
        const double czz = oracle::lindblad_correlation(sz, sz, w0, tau, t).real();
        const double ref = m.b0_sq() * (5.0 / 16.0 * czz / czz0 + 11.0 / 16.0 * 2.0 * cxx);
        worst = std::max(worst, testing::rel_diff(m.autocorrelation(t), ref));
    }
    return require(worst < kLindbladTol, fmt("one-pair bath vs propagated master equation, 50 points, worst rel %.2e", worst));
}

Outcome criterion_bracketing() {
    const Timer t;
    const auto& cfg = config();
    const fs::path dir = scratch("tau_ee");
    CommandContext ctx;
    ctx.config = cfg;
    ctx.config_path = testing::source_path("configs/cupc_alpha.json");
    ctx.out_dir = dir.string();
    const int code = cmd_tau_ee(ctx);
    const json report = json::parse(slurp(dir / "tau_ee.json"));
    const json manifest = json::parse(slurp(dir / "tau-ee_manifest.json"));
    const double secs = t.seconds();

    int ordered = 0;
    int points = 0;
    std::map<double, bool> field_in_band;
    double lo = 1e300;
    double hi = 0.0;
    for (const auto& r : report["results"]) {
        ++points;
        ordered += r["ordering_ok"].get<bool>() ? 1 : 0;
        const double full = r["tau_full_ns"].get<double>();
        lo = std::min(lo, full);
        hi = std::max(hi, full);
        const double bg = r["field_gauss"].get<double>();
        const bool in = r["in_expected_band"].get<bool>();
        field_in_band[bg] = field_in_band.count(bg) ? (field_in_band[bg] && in) : in;
    }
    const double no_hf = report["summary"]["tau_no_hf_mean_ns"].get<double>();
    const double delta = report["summary"]["tau_delta_mean_ns"].get<double>();
    const bool no_hf_ok = std::abs(no_hf - cfg.ee.expected_no_hf_ns) <= kNoHfBand * cfg.ee.expected_no_hf_ns;
    const bool delta_ok = std::abs(delta - cfg.ee.expected_delta_ns) <= kDeltaBand * cfg.ee.expected_delta_ns;
    const bool band_ok = std::all_of(field_in_band.begin(), field_in_band.end(), [](const auto& kv) { return kv.second; });
    const bool bands = no_hf_ok && delta_ok && band_ok;

    // Dilation: every pair sum scales as s^-6, the no-hyperfine time as s^3.
    const auto lat = cfg.lattice_model(units::deg_to_rad(cfg.bath.theta_e_deg));
    const auto base = lattice_sums(lat);
    double dil = 0.0;
    for (double s : {0.8, 1.25, 2.0}) {
        const auto d = lattice_sums(lat.dilated(s));
        const double k = std::pow(s, -6);
        dil = std::max({dil, testing::rel_diff(d.flip_flop, base.flip_flop * k),
                        testing::rel_diff(d.quasi_static, base.quasi_static * k),
                        testing::rel_diff(no_hyperfine_tau(lat.dilated(s)), no_hyperfine_tau(lat) * s * s * s)});
    }
    const bool reported = bands || !manifest["notes"].empty();
    const bool mandatory = code == kExitOk && ordered == points && points == 16 && dil < kDilationTol && reported &&
                           secs < kEeSeconds;
    Outcome o;
    o.pass = mandatory && bands;
    o.blocking = !mandatory;
    o.detail = fmt("no-hf %.3f ns (band %.2f +-30%% %s), delta %.2f ns (band %.1f +-50%% %s), full %.3f..%.3f ns "
                   "(band [%.1f, %.1f] %s); ordering %d/%d, dilation rel %.1e, manifest notes %zu, %.1f s",
                   no_hf, cfg.ee.expected_no_hf_ns, no_hf_ok ? "in" : "MISS", delta, cfg.ee.expected_delta_ns,
                   delta_ok ? "in" : "MISS", lo, hi, cfg.ee.expected_band_ns[0], cfg.ee.expected_band_ns[1],
                   band_ok ? "in" : "MISS", ordered, points, dil, manifest["notes"].size(), secs);
    if (!bands && mandatory) {
        o.detail += "; absolute bands missed, mandatory parts hold";
    }
    return o;
}

Outcome criterion_tau_round_trip() {
    const FilmGeometry g = config().film_geometry();
    const double tau = 2e-9;
    const double theta = units::deg_to_rad(30.0);
    int within = 0;
    std::vector<double> est;
    for (int s = 1; s <= kSeeds; ++s) {
        FitProblem p = synthetic_problem(kFields, tau, theta, g, static_cast<std::uint64_t>(s));
        p.free = {FitParam::tau_e, FitParam::theta_e};
        const FitResult r = fit(p);
        if (r.minima.empty()) {
            continue;
        }
        const auto& m = r.minima.front();
        const double x = m.x[0] * p.options.tau_unit;
        const double sig = m.sigma[0] * p.options.tau_unit;
        est.push_back(x * 1e9);
        within += (std::isfinite(sig) && std::abs(x - tau) <= 3.0 * sig) ? 1 : 0;
    }
    double mean = 0.0;
    for (double v : est) {
        mean += v;
    }
    mean /= static_cast<double>(std::max<std::size_t>(est.size(), 1));
    double var = 0.0;
    for (double v : est) {
        var += (v - mean) * (v - mean);
    }
    const double sd = est.size() > 1 ? std::sqrt(var / static_cast<double>(est.size() - 1)) : 0.0;
    const bool ensemble = std::abs(mean - kEnsembleTau) <= kEnsembleSpread && sd <= kEnsembleSpread;
    return require(within >= kTauWithin3Sigma && ensemble,
                   fmt("tau within 3 sigma in %d/%d seeds; ensemble %.3f +- %.3f ns vs %.1f +- %.1f ns", within,
                       kSeeds, mean, sd, kEnsembleTau, kEnsembleSpread));
}

Outcome criterion_orientation() {
    const FilmGeometry g = config().film_geometry();
    const double tau = config().fit.tau_e_ns.value * units::kNanosecond;
    const double theta = units::deg_to_rad(30.0);
    std::vector<double> detuned;
    std::vector<double> resonant;
    std::vector<double> three;
    int multi = 0;
    for (int s = 1; s <= kOrientationSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        auto theta_fit = [&](const std::vector<double>& fields) {
            FitProblem p = synthetic_problem(fields, tau, theta, g, seed);
            p.free = {FitParam::theta_e};
            return fit(p);
        };
        detuned.push_back(span_deg(theta_fit({231.0, 721.0}), 0));
        resonant.push_back(span_deg(theta_fit(kFields), 0));
        three.push_back(span_deg(theta_fit({231.0, 461.0, 721.0}), 0));
        const FitResult r372 = theta_fit({372.0});
        int close = 0;
        for (const auto& m : r372.minima) {
            close += m.objective <= r372.minima.front().objective + config().fit.multi_minimum_delta ? 1 : 0;
        }
        multi += (r372.status == FitStatus::multi_minimum && close >= 2) ? 1 : 0;
    }
    const double md = median(detuned);
    const double mr = median(resonant);
    const auto [dlo, dhi] = std::minmax_element(detuned.begin(), detuned.end());
    const auto [rlo, rhi] = std::minmax_element(resonant.begin(), resonant.end());
    return require(md > kDetunedSpanDeg && mr < kResonantSpanDeg && multi >= 1,
                   fmt("median theta span {231,721} %.1f deg (%.1f..%.1f), all four fields %.1f deg (%.1f..%.1f), "
                       "{231,461,721} %.1f deg; 372 G alone two minima in %d/%d seeds",
                       md, *dlo, *dhi, mr, *rlo, *rhi, median(three), multi, kOrientationSeeds));
}


Outcome criterion_depth() {
    FilmGeometry g = config().film_geometry();
    g.d_nv = kDepthTruthNm * units::kNanometer;
    const double tau = config().fit.tau_e_ns.value * units::kNanosecond;
    int within = 0;
    double worst = 0.0;
    for (int s = 1; s <= kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        std::mt19937_64 pick(seed + 7919);
        const double theta = std::uniform_real_distribution<double>(0.0, kPi / 2.0)(pick);
        const FitResult r = estimate_depth(synthetic_problem({231.0, 721.0}, tau, theta, g, seed));
        if (r.minima.empty()) {
            continue;
        }
        const double err = std::abs(r.minima.front().x[0] / units::kNanometer - kDepthTruthNm);
        worst = std::max(worst, err);
        within += err <= kDepthTolNm ? 1 : 0;
    }
    return require(within >= kDepthWithin, fmt("d_NV = %.0f nm recovered within %.0f nm in %d/%d seeds, worst %.2f nm",
                                                kDepthTruthNm, kDepthTolNm, within, kSeeds, worst));
}

Outcome criterion_free_electron() {
    const auto& cfg = config();
    const PhysicalConstants pc = cfg.physical_constants();
    const NvConfig nv = cfg.nv_config();
    const FilmGeometry g = cfg.film_geometry();
    const double tau = cfg.bath.tau_e_ns * units::kNanosecond;
    bool below = true;
    std::string factors;
    for (double bg : {372.0, 461.0}) {
        const double b = units::gauss_to_tesla(bg);
        const double free_rate = nv.gamma_e * nv.gamma_e * free_electron_spectrum(g, tau, nv_frequency(nv, b), b, pc);
        double smallest = std::numeric_limits<double>::infinity();
        for (double td : {0.0, 30.0, 60.0, 90.0}) {
            const BathSpectrumModel m(spectrum_at(bg, units::deg_to_rad(td)), tau, g, pc);
            const double cupc = relaxation_rate(m, nv, b);
            below = below && free_rate < cupc;
            smallest = std::min(smallest, cupc / free_rate);
        }
        factors += fmt(" %.0f G: %.3g;", bg, smallest);
    }
    factors.pop_back();
    return require(below, fmt("free-electron Delta Gamma_1 below CuPc at every theta_e; smallest factor%s",
                              factors.c_str()));
}

Outcome criterion_temperature() {
    const PhysicalConstants pc = config().physical_constants();
    const SpinLatticeParams p{2e3, kTwoPi * 1e12, 5e4, kTwoPi * 5e12, 30.0};
    const double cold = testing::rel_diff(spin_lattice_rate(0.5, p, pc), p.c);
    const double t = 3e4;
    const double xa = pc.hbar * p.omega_a / (pc.k_B * t);
    const double xb = pc.hbar * p.omega_b / (pc.k_B * t);
    const double hot = testing::rel_diff(spin_lattice_rate(t, p, pc), p.a / xa + p.b / (xb * xb) + p.c);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<RateSample> data;
    for (double temp = 10.0; temp <= 400.0; temp += 10.0) {
        const double r = spin_lattice_rate(temp, p, pc);
        data.push_back({temp, r * (1.0 + 1e-3 * n(rng)), 1e-3 * r});
    }
    const auto f = fit_spin_lattice(data, {1e3, kTwoPi * 1.5e12, 1e5, kTwoPi * 4e12, 20.0}, pc);
    const double rec = std::max({testing::rel_diff(f.a, p.a), testing::rel_diff(f.omega_a, p.omega_a),
                                 testing::rel_diff(f.b, p.b), testing::rel_diff(f.omega_b, p.omega_b),
                                 testing::rel_diff(f.c, p.c)});

    // The room-temperature constant is an input; tau-ee combines it with the e-e rate.
    const double r_sl = config().ee.r_sl_en_per_ns;
    const double consumed = testing::rel_diff(1.0 / r_sl, 38.0);
    const double combined = testing::rel_diff(total_correlation_rate(r_sl, 0.0, 1.0 / 0.5), r_sl + 2.0);
    return require(cold < kSpinLatticeTol && hot < kSpinLatticeTol && rec < 5.0 * kSpinLatticeTol &&
                       consumed < 1e-12 && combined < 1e-12,
                   fmt("T->0 rel %.1e, high-T rel %.1e, recovery worst rel %.1e at 0.1%% noise, 1/R_sl = %.1f ns "
                       "consumed",
                       cold, hot, rec, 1.0 / r_sl));
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPINBATH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
        }
    }
    return out;
}

Outcome criterion_determinism() {
    ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    const fs::path root = scratch("determinism");
    const std::string cfg = testing::source_path("configs/cupc_alpha.json");
    const fs::path in = root / "inputs";
    fs::create_directories(in);
    {
        std::ofstream ref(in / "reference.csv");
        ref << "nv_id,d_ref_nm\nNV-sim,10\n";
        std::ofstream decay(in / "decay.csv");
        decay << "t_us,signal,sigma\n";
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int i = 0; i < 40; ++i) {
            const double t_us = std::pow(10.0, 3.5 * i / 39.0);
            decay << format_double(t_us) << ','
                  << format_double(stretched_exponential(t_us, 0.3, 800.0, 0.8, 0.05) + 0.003 * n(rng)) << ",0.003\n";
        }
    }
    bool inputs_ok = run_cli("t1 --config " + cfg + " --seed 9 --simulate --fields 231,372,461,721 --out " +
                             (in / "sim4").string()) == 0;
    inputs_ok = inputs_ok && run_cli("t1 --config " + cfg + " --seed 9 --simulate --fields 231,721 --out " +
                                     (in / "sim2").string()) == 0;
    const std::string sim4 = (in / "sim4" / "synthetic_measurements.csv").string();
    const std::string sim2 = (in / "sim2" / "synthetic_measurements.csv").string();
    const std::vector<std::pair<std::string, std::string>> commands{
        {"spectrum", "spectrum --field 372 --points 401 --sweep 200:800:7"},
        {"t1-simulate", "t1 --simulate --fields 231,372,461,721"},
        {"t1", "t1 --data " + sim4},
        {"fit", "fit --data " + sim4},
        {"tau-ee", "tau-ee"},
        {"depth", "depth --data " + sim2 + " --reference " + (in / "reference.csv").string()},
        {"decay-fit", "decay-fit --data " + (in / "decay.csv").string()},
    };
    std::vector<std::string> bad;
    for (const auto& [name, args] : commands) {
        std::vector<std::map<std::string, std::string>> runs;
        std::vector<int> codes;
        for (int k = 0; k < 2; ++k) {
            const fs::path out = root / (name + "_" + std::to_string(k));
            codes.push_back(run_cli(args + " --config " + cfg + " --seed 9 --out " + out.string()));
            runs.push_back(tree(out));
        }
        if (codes[0] != codes[1] || codes[0] != 0 || runs[0] != runs[1] || runs[0].empty()) {
            bad.push_back(name);
        }
    }
    ::unsetenv("SOURCE_DATE_EPOCH");

    // Config round trip.
    const auto loaded = config();
    const std::string text = dump_config(loaded);
    const auto again = parse_config(text);
    const bool round_trip = again == loaded && dump_config(again) == text;

    // Row-addressed CSV errors.
    const std::string head = "nv_id,b_gauss,t1_cupc_us,t1_cupc_sigma_us,t1_free_us,t1_free_sigma_us\n";
    bool row_addressed = true;
    for (const auto& [body, row] : std::vector<std::pair<std::string, std::string>>{
             {"a,231,100,1,200,2\nb,372,abc,1,200,2\n", "row 3"},
             {"a,231,100,1,200\n", "row 2"},
             {"a,231,-5,1,200,2\n", "row 2"}}) {
        try {
            (void)parse_measurements(head + body, "m.csv");
            row_addressed = false;
        } catch (const DataError& e) {
            row_addressed = row_addressed && std::string(e.what()).find("m.csv " + row) != std::string::npos;
        }
    }
    std::string failed;
    for (const auto& b : bad) {
        failed += " " + b;
    }
    return require(inputs_ok && bad.empty() && round_trip && row_addressed,
                   fmt("%zu commands byte-identical over two runs%s%s; config round trip %s; csv errors row-addressed %s",
                       commands.size() - bad.size(), bad.empty() ? "" : ", differing:", failed.c_str(),
                       round_trip ? "exact" : "DIFFERS", row_addressed ? "yes" : "no"));
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"geometry factors", criterion_geometry},
        {"hilbert dimension and weights", criterion_dimension},
        {"spectral density consistency", criterion_spectral},
        {"golden rule oracle", criterion_golden_rule},
        {"lindblad oracle", criterion_lindblad},
        {"approximation bracketing", criterion_bracketing},
        {"tau round trip", criterion_tau_round_trip},
        {"orientation identifiability", criterion_orientation},
        {"depth estimation", criterion_depth},
        {"free-electron discrimination", criterion_free_electron},
        {"temperature model", criterion_temperature},
        {"determinism and io", criterion_determinism},
    };
    int passed = 0;
    int blocking = 0;
    std::ofstream report("acceptance_report.txt");
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Timer t;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, true, std::string("exception: ") + e.what()};
        }
        passed += o.pass ? 1 : 0;
        blocking += o.blocking ? 1 : 0;
        const std::string line = fmt("criterion %2zu %s  %-30s %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL",
                                     criteria[i].first, o.detail.c_str(), t.seconds());
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        report << line << std::flush;
    }
    const std::string last = fmt("acceptance: %d/%zu pass, %d blocking failure(s)\n", passed, criteria.size(), blocking);
    std::fputs(last.c_str(), stdout);
    report << last;
    return blocking == 0 ? 0 : 1;
}
