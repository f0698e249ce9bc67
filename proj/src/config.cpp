#include "spinbath/config.hpp"

#include "spinbath/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace spinbath {

namespace {

using json = nlohmann::ordered_json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            fail("expected an object");
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items()) {
            if (!ok.count(k)) {
                throw ConfigError(join(path_, k) + ": unknown key");
            }
        }
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    [[nodiscard]] Reader child(const char* key) const {
        if (!has(key)) {
            throw ConfigError(join(path_, key) + ": missing block");
        }
        return Reader(j_.at(key), join(path_, key));
    }

    void num(const char* key, double& out, bool required = false) const {
        if (!has(key)) {
            if (required) {
                throw ConfigError(join(path_, key) + ": required field missing");
            }
            return;
        }
        const json& v = j_.at(key);
        if (!v.is_number()) {
            throw ConfigError(join(path_, key) + ": expected a number");
        }
        out = v.get<double>();
        if (!std::isfinite(out)) {
            throw ConfigError(join(path_, key) + ": must be finite");
        }
    }

    void integer(const char* key, int& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer()) {
            throw ConfigError(join(path_, key) + ": expected an integer");
        }
        out = v.get<int>();
    }

    void str(const char* key, std::string& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (!v.is_string()) {
            throw ConfigError(join(path_, key) + ": expected a string");
        }
        out = v.get<std::string>();
    }

    template <std::size_t N>
    void vec(const char* key, std::array<double, N>& out) const {
        if (!has(key)) {
            return;
        }
        out = to_array<N>(j_.at(key), join(path_, key));
    }

    void list(const char* key, std::vector<double>& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (!v.is_array()) {
            throw ConfigError(join(path_, key) + ": expected an array");
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]: expected a number");
            }
            out.push_back(v[i].get<double>());
        }
    }

    void strings(const char* key, std::vector<std::string>& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (!v.is_array()) {
            throw ConfigError(join(path_, key) + ": expected an array");
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) {
                throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]: expected a string");
            }
            out.push_back(v[i].get<std::string>());
        }
    }

    void range(const char* key, Range& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (v.is_number()) {
            out.value = out.lo = out.hi = v.get<double>();
            return;
        }
        Reader r(v, join(path_, key));
        r.allow({"value", "lo", "hi"});
        r.num("value", out.value, true);
        out.lo = out.hi = out.value;
        r.num("lo", out.lo);
        r.num("hi", out.hi);
        if (!(out.lo <= out.value && out.value <= out.hi)) {
            r.fail("need lo <= value <= hi");
        }
    }

    template <std::size_t N>
    static std::array<double, N> to_array(const json& v, const std::string& where) {
        if (!v.is_array() || v.size() != N) {
            throw ConfigError(where + ": expected an array of " + std::to_string(N) + " numbers");
        }
        std::array<double, N> out{};
        for (std::size_t i = 0; i < N; ++i) {
            if (!v[i].is_number()) {
                throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
            }
            out[i] = v[i].get<double>();
        }
        return out;
    }

    [[nodiscard]] const json& raw(const char* key) const { return j_.at(key); }
    [[nodiscard]] const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
};

json range_json(const Range& r) { return json{{"value", r.value}, {"lo", r.lo}, {"hi", r.hi}}; }

template <std::size_t N>
json array_json(const std::array<double, N>& a) {
    json out = json::array();
    for (double v : a) {
        out.push_back(v);
    }
    return out;
}

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) {
        throw ConfigError(path + ": " + what);
    }
}

void check_range(const Range& r, const std::string& path, bool positive) {
    require(std::isfinite(r.value) && std::isfinite(r.lo) && std::isfinite(r.hi), path, "must be finite");
    require(r.lo <= r.value && r.value <= r.hi, path, "need lo <= value <= hi");
    if (positive) {
        require(r.lo > 0.0, path, "must be > 0");
    }
}

void check_box(const std::array<double, 2>& b, const std::string& path, bool positive) {
    require(std::isfinite(b[0]) && std::isfinite(b[1]) && b[0] < b[1], path, "need finite lo < hi");
    if (positive) {
        require(b[0] > 0.0, path, "must be > 0");
    }
}

Weighting weighting_of(const std::string& s) { return s == "relative" ? Weighting::relative : Weighting::sigma; }
AcceptanceMode acceptance_of(const std::string& s) {
    return s == "aggregate" ? AcceptanceMode::aggregate : AcceptanceMode::every_point;
}

}  // namespace

void ToolkitConfig::validate() const {
    const auto& c = constants;
    for (auto [v, name] : {std::pair{c.gamma_e_hz_per_t, "constants.gamma_e_hz_per_t"}, std::pair{c.mu0, "constants.mu0"},
                           std::pair{c.hbar, "constants.hbar"}, std::pair{c.k_B, "constants.k_B"},
                           std::pair{c.g_free, "constants.g_free"}}) {
        require(std::isfinite(v) && v > 0.0, name, "must be finite and > 0");
    }

    const auto& h = hyperfine;
    require(h.g_parallel > 0.0, "hyperfine.g_parallel", "required, must be > 0");
    require(h.g_perp > 0.0, "hyperfine.g_perp", "required, must be > 0");
    require(h.n_nitrogens >= 0, "hyperfine.n_nitrogens", "must be >= 0");
    require(h.max_dimension >= 2, "hyperfine.max_dimension", "must be >= 2");
    require(h.eta_floor >= 0.0, "hyperfine.eta_floor", "must be >= 0");
    require(h.degenerate_hz >= 0.0, "hyperfine.degenerate_hz", "must be >= 0");
    require(std::abs(2.0 * h.nitrogen_spin - std::round(2.0 * h.nitrogen_spin)) < 1e-12 && h.nitrogen_spin >= 0.0,
            "hyperfine.nitrogen_spin", "must be a non-negative multiple of 1/2");
    for (std::size_t i = 0; i < 3; ++i) {
        require(std::isfinite(h.cu_mhz[i]) && std::isfinite(h.n_mhz[i]), "hyperfine.tensors", "must be finite");
    }
    require(!h.isotopes.empty(), "hyperfine.isotopes", "at least one isotope required");
    double total = 0.0;
    for (std::size_t i = 0; i < h.isotopes.size(); ++i) {
        const auto& iso = h.isotopes[i];
        const std::string p = "hyperfine.isotopes[" + std::to_string(i) + "]";
        require(iso.abundance >= 0.0 && iso.abundance <= 1.0, p + ".abundance", "must lie in [0, 1]");
        require(std::isfinite(iso.hyperfine_scale), p + ".hyperfine_scale", "must be finite");
        require(iso.nuclear_spin >= 0.0 && std::abs(2.0 * iso.nuclear_spin - std::round(2.0 * iso.nuclear_spin)) < 1e-12,
                p + ".nuclear_spin", "must be a non-negative multiple of 1/2");
        total += iso.abundance;
    }
    require(std::abs(total - 1.0) <= 1e-12, "hyperfine.isotopes", "abundances must sum to 1");
    for (const auto& iso : h.isotopes) {
        SpinSystemSpec s = spin_spec(0.0, 0.0);
        s.isotope = {iso.label, iso.abundance, iso.hyperfine_scale, iso.nuclear_spin};
        if (s.hilbert_dimension() > s.max_dimension) {
            throw ConfigError("hyperfine.max_dimension: Hilbert dimension " + std::to_string(s.hilbert_dimension()) +
                              " for isotope " + iso.label + " exceeds the cap");
        }
    }

    check_range(geometry.d_nv_nm, "geometry.d_nv_nm", true);
    check_range(geometry.h_nm, "geometry.h_nm", true);
    check_range(geometry.n_e_m3, "geometry.n_e_m3", true);

    require(std::isfinite(nv.d_zfs_mhz) && nv.d_zfs_mhz > 0.0, "nv.d_zfs_mhz", "must be finite and > 0");
    require(nv.branch == "minus" || nv.branch == "plus", "nv.branch", "must be \"minus\" or \"plus\"");

    require(bath.tau_e_ns > 0.0, "bath.tau_e_ns", "must be > 0");
    require(bath.theta_e_deg >= 0.0 && bath.theta_e_deg <= 90.0, "bath.theta_e_deg", "must lie in [0, 90]");

    if (lattice) {
        const auto& l = *lattice;
        require(!l.sites.empty(), "lattice.sites", "at least one site required");
        require(l.axes.size() == l.sites.size(), "lattice.axes", "one axis per site required");
        require(l.cutoff_nm > 0.0, "lattice.cutoff_nm", "must be > 0");
        try {
            lattice_model(0.0).validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()));
        }
    }

    const auto& e = ee;
    for (std::size_t i = 0; i < e.fields_gauss.size(); ++i) {
        require(e.fields_gauss[i] >= 0.0, "ee.fields_gauss[" + std::to_string(i) + "]", "must be >= 0");
    }
    for (std::size_t i = 0; i < e.theta_e_deg.size(); ++i) {
        require(e.theta_e_deg[i] >= 0.0 && e.theta_e_deg[i] <= 90.0, "ee.theta_e_deg[" + std::to_string(i) + "]",
                "must lie in [0, 90]");
    }
    require(e.initial_tau_ns > 0.0, "ee.initial_tau_ns", "must be > 0");
    require(e.damping > 0.0 && e.damping <= 1.0, "ee.damping", "must lie in (0, 1]");
    require(e.tolerance > 0.0, "ee.tolerance", "must be > 0");
    require(e.max_iterations >= 1, "ee.max_iterations", "must be >= 1");
    require(e.delta_bin_khz >= 0.0, "ee.delta_bin_khz", "must be >= 0");
    require(e.overlap_grid_khz > 0.0, "ee.overlap_grid_khz", "must be > 0");
    require(e.r_sl_en_per_ns >= 0.0, "ee.r_sl_en_per_ns", "must be >= 0");

    const auto& f = fit;
    require(!f.free.empty(), "fit.free", "at least one free parameter required");
    for (std::size_t i = 0; i < f.free.size(); ++i) {
        try {
            (void)fit_param_from_string(f.free[i]);
        } catch (const ConfigError&) {
            throw ConfigError("fit.free[" + std::to_string(i) + "]: unknown parameter '" + f.free[i] + "'");
        }
    }
    check_box(f.tau_box_ns, "fit.tau_box_ns", true);
    check_box(f.theta_box_deg, "fit.theta_box_deg", false);
    require(f.theta_box_deg[0] >= 0.0 && f.theta_box_deg[1] <= 90.0, "fit.theta_box_deg", "must lie within [0, 90]");
    check_box(f.d_box_nm, "fit.d_box_nm", true);
    check_range(f.tau_e_ns, "fit.tau_e_ns", true);
    check_range(f.theta_e_deg, "fit.theta_e_deg", false);
    require(f.grid_points >= 3, "fit.grid_points", "must be >= 3");
    require(f.region_points >= 2, "fit.region_points", "must be >= 2");
    require(f.max_refinements >= 1, "fit.max_refinements", "must be >= 1");
    require(f.dedup_tolerance > 0.0, "fit.dedup_tolerance", "must be > 0");
    require(f.multi_minimum_delta >= 0.0, "fit.multi_minimum_delta", "must be >= 0");
    require(f.weighting == "sigma" || f.weighting == "relative", "fit.weighting", "must be \"sigma\" or \"relative\"");
    require(f.acceptance == "every_point" || f.acceptance == "aggregate", "fit.acceptance",
            "must be \"every_point\" or \"aggregate\"");
    require(f.epsilon_scale > 0.0, "fit.epsilon_scale", "must be > 0");
    require(f.theta_points >= 4, "fit.theta_points", "must be >= 4");
    require(f.tau_points >= 4, "fit.tau_points", "must be >= 4");
    require(f.line_merge_hz >= 0.0, "fit.line_merge_hz", "must be >= 0");

    require(decay.iota_min > 0.0 && decay.iota_max > decay.iota_min, "decay", "need 0 < iota_min < iota_max");
}

PhysicalConstants ToolkitConfig::physical_constants() const {
    return {kTwoPi * constants.gamma_e_hz_per_t, constants.mu0, constants.hbar, constants.k_B, constants.g_free};
}

IsotopeTable ToolkitConfig::isotope_table() const {
    IsotopeTable t;
    for (const auto& iso : hyperfine.isotopes) {
        t.entries.push_back({iso.label, iso.abundance, iso.hyperfine_scale, iso.nuclear_spin});
    }
    return t;
}

SpinSystemSpec ToolkitConfig::spin_spec(double b_field_tesla, double theta_e) const {
    SpinSystemSpec s;
    const auto& h = hyperfine;
    s.cu_tensor = {units::mhz_to_angular(h.cu_mhz[0]), units::mhz_to_angular(h.cu_mhz[1]),
                   units::mhz_to_angular(h.cu_mhz[2])};
    s.n_tensor = {units::mhz_to_angular(h.n_mhz[0]), units::mhz_to_angular(h.n_mhz[1]),
                  units::mhz_to_angular(h.n_mhz[2])};
    if (!h.isotopes.empty()) {
        const auto& iso = h.isotopes.front();
        s.isotope = {iso.label, iso.abundance, iso.hyperfine_scale, iso.nuclear_spin};
    }
    s.nitrogen_spin = h.nitrogen_spin;
    s.g_parallel = h.g_parallel;
    s.g_perp = h.g_perp;
    s.b_field = b_field_tesla;
    s.theta_e = theta_e;
    s.n_nitrogens = h.n_nitrogens;
    s.max_dimension = static_cast<std::size_t>(h.max_dimension);
    return s;
}

SpectrumOptions ToolkitConfig::spectrum_options() const {
    SpectrumOptions o;
    o.eta_floor = hyperfine.eta_floor;
    o.degenerate_hz = hyperfine.degenerate_hz;
    return o;
}

FilmGeometry ToolkitConfig::film_geometry() const {
    return {geometry.d_nv_nm.value * units::kNanometer, geometry.h_nm.value * units::kNanometer,
            geometry.n_e_m3.value};
}

NvConfig ToolkitConfig::nv_config() const {
    NvConfig n;
    n.d_zfs = units::mhz_to_angular(nv.d_zfs_mhz);
    n.gamma_e = kTwoPi * constants.gamma_e_hz_per_t;
    n.branch = nv.branch == "plus" ? NvBranch::plus : NvBranch::minus;
    return n;
}

ForwardModelConfig ToolkitConfig::forward_model_config() const {
    ForwardModelConfig f;
    f.base = spin_spec(0.0, 0.0);
    f.isotopes = isotope_table();
    f.constants = physical_constants();
    f.nv = nv_config();
    f.spectrum = spectrum_options();
    f.theta_points = fit.theta_points;
    f.tau_points = fit.tau_points;
    f.tau_min = std::min(fit.tau_box_ns[0], fit.tau_e_ns.lo) * units::kNanosecond;
    f.tau_max = std::max(fit.tau_box_ns[1], fit.tau_e_ns.hi) * units::kNanosecond;
    f.line_merge_hz = fit.line_merge_hz;
    return f;
}

EeOptions ToolkitConfig::ee_options() const {
    EeOptions o;
    o.damping = ee.damping;
    o.tolerance = ee.tolerance;
    o.max_iterations = ee.max_iterations;
    o.delta_bin_hz = ee.delta_bin_khz * 1e3;
    o.overlap_grid_hz = ee.overlap_grid_khz * 1e3;
    return o;
}

DecayFitOptions ToolkitConfig::decay_options() const {
    DecayFitOptions o;
    o.iota_min = decay.iota_min;
    o.iota_max = decay.iota_max;
    return o;
}

LatticeModel ToolkitConfig::lattice_model(double theta_e) const {
    if (!lattice) {
        throw ConfigError("lattice: block missing from config");
    }
    const auto& l = *lattice;
    LatticeModel m;
    for (std::size_t i = 0; i < 3; ++i) {
        m.cell[i] = Eigen::Vector3d(l.cell_nm[i][0], l.cell_nm[i][1], l.cell_nm[i][2]) * units::kNanometer;
    }
    for (const auto& s : l.sites) {
        m.sites.emplace_back(s[0], s[1], s[2]);
    }
    for (const auto& a : l.axes) {
        m.axes.emplace_back(a[0], a[1], a[2]);
    }
    m.cutoff = l.cutoff_nm * units::kNanometer;
    if (!m.axes.empty()) {
        const Eigen::Vector3d ref(l.field_reference[0], l.field_reference[1], l.field_reference[2]);
        m.field_direction =
            field_direction_from_axis(m.axes.front(), ref, theta_e, units::deg_to_rad(l.field_azimuth_deg));
    }
    return m;
}

FitProblem ToolkitConfig::fit_problem() const {
    FitProblem p;
    for (const auto& s : fit.free) {
        p.free.push_back(fit_param_from_string(s));
    }
    p.options.tau_unit = units::kNanosecond;
    p.tau_box = {fit.tau_box_ns[0], fit.tau_box_ns[1]};
    p.theta_box = {units::deg_to_rad(fit.theta_box_deg[0]), units::deg_to_rad(fit.theta_box_deg[1])};
    p.d_box = {fit.d_box_nm[0] * units::kNanometer, fit.d_box_nm[1] * units::kNanometer};
    p.tau_e = {fit.tau_e_ns.value, fit.tau_e_ns.lo, fit.tau_e_ns.hi};
    p.theta_e = {units::deg_to_rad(fit.theta_e_deg.value), units::deg_to_rad(fit.theta_e_deg.lo),
                 units::deg_to_rad(fit.theta_e_deg.hi)};
    const auto nm = units::kNanometer;
    p.d_nv = {geometry.d_nv_nm.value * nm, geometry.d_nv_nm.lo * nm, geometry.d_nv_nm.hi * nm};
    p.h = {geometry.h_nm.value * nm, geometry.h_nm.lo * nm, geometry.h_nm.hi * nm};
    p.n_e = {geometry.n_e_m3.value, geometry.n_e_m3.lo, geometry.n_e_m3.hi};
    p.options.grid_points = fit.grid_points;
    p.options.region_points = fit.region_points;
    p.options.max_refinements = fit.max_refinements;
    p.options.dedup_tolerance = fit.dedup_tolerance;
    p.options.multi_minimum_delta = fit.multi_minimum_delta;
    p.options.weighting = weighting_of(fit.weighting);
    p.options.acceptance = acceptance_of(fit.acceptance);
    p.options.epsilon_scale = fit.epsilon_scale;
    return p;
}

ToolkitConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    const Reader top(root, "");
    top.allow({"constants", "hyperfine", "geometry", "nv", "bath", "lattice", "ee", "fit", "decay"});
    ToolkitConfig cfg;

    if (top.has("constants")) {
        const Reader r = top.child("constants");
        r.allow({"gamma_e_hz_per_t", "mu0", "hbar", "k_B", "g_free"});
        r.num("gamma_e_hz_per_t", cfg.constants.gamma_e_hz_per_t);
        r.num("mu0", cfg.constants.mu0);
        r.num("hbar", cfg.constants.hbar);
        r.num("k_B", cfg.constants.k_B);
        r.num("g_free", cfg.constants.g_free);
    }

    {
        const Reader r = top.child("hyperfine");
        r.allow({"cu_mhz", "n_mhz", "g_parallel", "g_perp", "g_source", "nitrogen_spin", "n_nitrogens",
                 "max_dimension", "eta_floor", "degenerate_hz", "isotopes"});
        auto& h = cfg.hyperfine;
        r.vec("cu_mhz", h.cu_mhz);
        r.vec("n_mhz", h.n_mhz);
        r.num("g_parallel", h.g_parallel, true);
        r.num("g_perp", h.g_perp, true);
        r.str("g_source", h.g_source);
        r.num("nitrogen_spin", h.nitrogen_spin);
        r.integer("n_nitrogens", h.n_nitrogens);
        r.integer("max_dimension", h.max_dimension);
        r.num("eta_floor", h.eta_floor);
        r.num("degenerate_hz", h.degenerate_hz);
        if (r.has("isotopes")) {
            const json& arr = r.raw("isotopes");
            if (!arr.is_array()) {
                r.fail("isotopes: expected an array");
            }
            h.isotopes.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const Reader ir(arr[i], "hyperfine.isotopes[" + std::to_string(i) + "]");
                ir.allow({"label", "abundance", "hyperfine_scale", "nuclear_spin"});
                IsotopeConfig iso;
                ir.str("label", iso.label);
                ir.num("abundance", iso.abundance, true);
                ir.num("hyperfine_scale", iso.hyperfine_scale);
                ir.num("nuclear_spin", iso.nuclear_spin);
                h.isotopes.push_back(iso);
            }
        }
    }

    if (top.has("geometry")) {
        const Reader r = top.child("geometry");
        r.allow({"d_nv_nm", "h_nm", "n_e_m3"});
        r.range("d_nv_nm", cfg.geometry.d_nv_nm);
        r.range("h_nm", cfg.geometry.h_nm);
        r.range("n_e_m3", cfg.geometry.n_e_m3);
    }

    if (top.has("nv")) {
        const Reader r = top.child("nv");
        r.allow({"d_zfs_mhz", "branch"});
        r.num("d_zfs_mhz", cfg.nv.d_zfs_mhz);
        r.str("branch", cfg.nv.branch);
    }

    if (top.has("bath")) {
        const Reader r = top.child("bath");
        r.allow({"tau_e_ns", "theta_e_deg"});
        r.num("tau_e_ns", cfg.bath.tau_e_ns);
        r.num("theta_e_deg", cfg.bath.theta_e_deg);
    }

    if (top.has("lattice")) {
        const Reader r = top.child("lattice");
        r.allow({"cell_nm", "sites", "axes", "cutoff_nm", "field_reference", "field_azimuth_deg", "source"});
        LatticeConfig l;
        const json& cell = r.raw("cell_nm");
        if (!cell.is_array() || cell.size() != 3) {
            throw ConfigError("lattice.cell_nm: expected three vectors");
        }
        for (std::size_t i = 0; i < 3; ++i) {
            l.cell_nm[i] = Reader::to_array<3>(cell[i], "lattice.cell_nm[" + std::to_string(i) + "]");
        }
        auto vectors = [&](const char* key, std::vector<std::array<double, 3>>& out) {
            if (!r.has(key)) {
                throw ConfigError(std::string("lattice.") + key + ": required field missing");
            }
            const json& v = r.raw(key);
            if (!v.is_array()) {
                throw ConfigError(std::string("lattice.") + key + ": expected an array of vectors");
            }
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(Reader::to_array<3>(v[i], std::string("lattice.") + key + "[" + std::to_string(i) + "]"));
            }
        };
        vectors("sites", l.sites);
        vectors("axes", l.axes);
        r.num("cutoff_nm", l.cutoff_nm, true);
        r.vec("field_reference", l.field_reference);
        r.num("field_azimuth_deg", l.field_azimuth_deg);
        r.str("source", l.source);
        cfg.lattice = l;
    }

    if (top.has("ee")) {
        const Reader r = top.child("ee");
        r.allow({"fields_gauss", "theta_e_deg", "initial_tau_ns", "damping", "tolerance", "max_iterations",
                 "delta_bin_khz", "overlap_grid_khz", "r_sl_en_per_ns", "expected_band_ns", "expected_no_hf_ns",
                 "expected_delta_ns"});
        auto& e = cfg.ee;
        r.list("fields_gauss", e.fields_gauss);
        r.list("theta_e_deg", e.theta_e_deg);
        r.num("initial_tau_ns", e.initial_tau_ns);
        r.num("damping", e.damping);
        r.num("tolerance", e.tolerance);
        r.integer("max_iterations", e.max_iterations);
        r.num("delta_bin_khz", e.delta_bin_khz);
        r.num("overlap_grid_khz", e.overlap_grid_khz);
        r.num("r_sl_en_per_ns", e.r_sl_en_per_ns);
        r.vec("expected_band_ns", e.expected_band_ns);
        r.num("expected_no_hf_ns", e.expected_no_hf_ns);
        r.num("expected_delta_ns", e.expected_delta_ns);
    }

    if (top.has("fit")) {
        const Reader r = top.child("fit");
        r.allow({"free", "tau_box_ns", "theta_box_deg", "d_box_nm", "tau_e_ns", "theta_e_deg", "grid_points",
                 "region_points", "max_refinements", "dedup_tolerance", "multi_minimum_delta", "weighting",
                 "acceptance", "epsilon_scale", "theta_points", "tau_points", "line_merge_hz"});
        auto& f = cfg.fit;
        r.strings("free", f.free);
        r.vec("tau_box_ns", f.tau_box_ns);
        r.vec("theta_box_deg", f.theta_box_deg);
        r.vec("d_box_nm", f.d_box_nm);
        r.range("tau_e_ns", f.tau_e_ns);
        r.range("theta_e_deg", f.theta_e_deg);
        r.integer("grid_points", f.grid_points);
        r.integer("region_points", f.region_points);
        r.integer("max_refinements", f.max_refinements);
        r.num("dedup_tolerance", f.dedup_tolerance);
        r.num("multi_minimum_delta", f.multi_minimum_delta);
        r.str("weighting", f.weighting);
        r.str("acceptance", f.acceptance);
        r.num("epsilon_scale", f.epsilon_scale);
        r.integer("theta_points", f.theta_points);
        r.integer("tau_points", f.tau_points);
        r.num("line_merge_hz", f.line_merge_hz);
    }

    if (top.has("decay")) {
        const Reader r = top.child("decay");
        r.allow({"iota_min", "iota_max"});
        r.num("iota_min", cfg.decay.iota_min);
        r.num("iota_max", cfg.decay.iota_max);
    }

    cfg.validate();
    return cfg;
}

ToolkitConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ToolkitConfig& cfg) {
    json root;
    const auto& c = cfg.constants;
    root["constants"] = {{"gamma_e_hz_per_t", c.gamma_e_hz_per_t}, {"mu0", c.mu0}, {"hbar", c.hbar}, {"k_B", c.k_B},
                         {"g_free", c.g_free}};

    const auto& h = cfg.hyperfine;
    json isotopes = json::array();
    for (const auto& iso : h.isotopes) {
        isotopes.push_back({{"label", iso.label},
                            {"abundance", iso.abundance},
                            {"hyperfine_scale", iso.hyperfine_scale},
                            {"nuclear_spin", iso.nuclear_spin}});
    }
    root["hyperfine"] = {{"cu_mhz", array_json(h.cu_mhz)},
                         {"n_mhz", array_json(h.n_mhz)},
                         {"g_parallel", h.g_parallel},
                         {"g_perp", h.g_perp},
                         {"g_source", h.g_source},
                         {"nitrogen_spin", h.nitrogen_spin},
                         {"n_nitrogens", h.n_nitrogens},
                         {"max_dimension", h.max_dimension},
                         {"eta_floor", h.eta_floor},
                         {"degenerate_hz", h.degenerate_hz},
                         {"isotopes", isotopes}};

    root["geometry"] = {{"d_nv_nm", range_json(cfg.geometry.d_nv_nm)},
                        {"h_nm", range_json(cfg.geometry.h_nm)},
                        {"n_e_m3", range_json(cfg.geometry.n_e_m3)}};
    root["nv"] = {{"d_zfs_mhz", cfg.nv.d_zfs_mhz}, {"branch", cfg.nv.branch}};
    root["bath"] = {{"tau_e_ns", cfg.bath.tau_e_ns}, {"theta_e_deg", cfg.bath.theta_e_deg}};

    if (cfg.lattice) {
        const auto& l = *cfg.lattice;
        json cell = json::array();
        for (const auto& v : l.cell_nm) {
            cell.push_back(array_json(v));
        }
        json sites = json::array();
        for (const auto& v : l.sites) {
            sites.push_back(array_json(v));
        }
        json axes = json::array();
        for (const auto& v : l.axes) {
            axes.push_back(array_json(v));
        }
        root["lattice"] = {{"cell_nm", cell},
                           {"sites", sites},
                           {"axes", axes},
                           {"cutoff_nm", l.cutoff_nm},
                           {"field_reference", array_json(l.field_reference)},
                           {"field_azimuth_deg", l.field_azimuth_deg},
                           {"source", l.source}};
    }

    const auto& e = cfg.ee;
    root["ee"] = {{"fields_gauss", e.fields_gauss},
                  {"theta_e_deg", e.theta_e_deg},
                  {"initial_tau_ns", e.initial_tau_ns},
                  {"damping", e.damping},
                  {"tolerance", e.tolerance},
                  {"max_iterations", e.max_iterations},
                  {"delta_bin_khz", e.delta_bin_khz},
                  {"overlap_grid_khz", e.overlap_grid_khz},
                  {"r_sl_en_per_ns", e.r_sl_en_per_ns},
                  {"expected_band_ns", array_json(e.expected_band_ns)},
                  {"expected_no_hf_ns", e.expected_no_hf_ns},
                  {"expected_delta_ns", e.expected_delta_ns}};

    const auto& f = cfg.fit;
    root["fit"] = {{"free", f.free},
                   {"tau_box_ns", array_json(f.tau_box_ns)},
                   {"theta_box_deg", array_json(f.theta_box_deg)},
                   {"d_box_nm", array_json(f.d_box_nm)},
                   {"tau_e_ns", range_json(f.tau_e_ns)},
                   {"theta_e_deg", range_json(f.theta_e_deg)},
                   {"grid_points", f.grid_points},
                   {"region_points", f.region_points},
                   {"max_refinements", f.max_refinements},
                   {"dedup_tolerance", f.dedup_tolerance},
                   {"multi_minimum_delta", f.multi_minimum_delta},
                   {"weighting", f.weighting},
                   {"acceptance", f.acceptance},
                   {"epsilon_scale", f.epsilon_scale},
                   {"theta_points", f.theta_points},
                   {"tau_points", f.tau_points},
                   {"line_merge_hz", f.line_merge_hz}};
    root["decay"] = {{"iota_min", cfg.decay.iota_min}, {"iota_max", cfg.decay.iota_max}};
    return root.dump(2) + "\n";
}

}  // namespace spinbath
