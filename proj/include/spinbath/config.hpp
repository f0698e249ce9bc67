// config.hpp: toolkit configuration. Values are stored in file units (MHz, gauss,
// nm, ns, degrees) so that load -> dump -> load is exact; accessors build the SI
// structures the numerical modules take.

#pragma once

#include "spinbath/bath_spectrum.hpp"
#include "spinbath/ee_solver.hpp"
#include "spinbath/estimator.hpp"
#include "spinbath/nv_relaxometry.hpp"
#include "spinbath/spin_model.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace spinbath {

struct Range {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Range&) const = default;
};

struct ConstantsConfig {
    double gamma_e_hz_per_t = 28.0249514e9;
    double mu0 = 1.25663706212e-6;
    double hbar = 1.054571817e-34;
    double k_B = 1.380649e-23;
    double g_free = 2.00231930436;

    bool operator==(const ConstantsConfig&) const = default;
};

struct IsotopeConfig {
    std::string label;
    double abundance = 0.0;
    double hyperfine_scale = 1.0;
    double nuclear_spin = 1.5;

    bool operator==(const IsotopeConfig&) const = default;
};

struct HyperfineConfig {
    std::array<double, 3> cu_mhz{-83.0, -83.0, -648.0};
    std::array<double, 3> n_mhz{57.0, 45.0, 45.0};
    double g_parallel = 0.0;
    double g_perp = 0.0;
    std::string g_source;
    double nitrogen_spin = 1.0;
    int n_nitrogens = 4;
    int max_dimension = 4096;
    double eta_floor = 1e-12;
    double degenerate_hz = 1.0;
    std::vector<IsotopeConfig> isotopes{{"63Cu", 0.6915, 1.0, 1.5}, {"65Cu", 0.3085, 1.07, 1.5}};

    bool operator==(const HyperfineConfig&) const = default;
};

struct GeometryConfig {
    Range d_nv_nm{10.0, 10.0, 10.0};
    Range h_nm{27.0, 27.0, 27.0};
    Range n_e_m3{1.7174e27, 1.7174e27, 1.7174e27};

    bool operator==(const GeometryConfig&) const = default;
};

struct NvBlock {
    double d_zfs_mhz = 2870.0;
    std::string branch = "minus";

    bool operator==(const NvBlock&) const = default;
};

struct BathConfig {
    double tau_e_ns = 2.0;
    double theta_e_deg = 30.0;

    bool operator==(const BathConfig&) const = default;
};

struct LatticeConfig {
    std::array<std::array<double, 3>, 3> cell_nm{};
    std::vector<std::array<double, 3>> sites;
    std::vector<std::array<double, 3>> axes;
    double cutoff_nm = 0.0;
    std::array<double, 3> field_reference{0.0, 1.0, 0.0};
    double field_azimuth_deg = 0.0;
    std::string source;

    bool operator==(const LatticeConfig&) const = default;
};

struct EeConfig {
    std::vector<double> fields_gauss{231.0, 372.0, 461.0, 721.0};
    std::vector<double> theta_e_deg{0.0, 30.0, 60.0, 90.0};
    double initial_tau_ns = 1.0;
    double damping = 0.5;
    double tolerance = 1e-3;
    int max_iterations = 200;
    double delta_bin_khz = 10.0;
    double overlap_grid_khz = 10.0;
    double r_sl_en_per_ns = 1.0 / 38.0;
    std::array<double, 2> expected_band_ns{1.3, 2.4};
    double expected_no_hf_ns = 0.24;
    double expected_delta_ns = 8.0;

    bool operator==(const EeConfig&) const = default;
};

struct FitConfig {
    std::vector<std::string> free{"tau_e", "theta_e"};
    std::array<double, 2> tau_box_ns{0.1, 100.0};
    std::array<double, 2> theta_box_deg{0.0, 90.0};
    std::array<double, 2> d_box_nm{2.0, 50.0};
    Range tau_e_ns{2.0, 2.0, 2.0};
    Range theta_e_deg{30.0, 30.0, 30.0};
    int grid_points = 64;
    int region_points = 64;
    int max_refinements = 16;
    double dedup_tolerance = 0.02;
    double multi_minimum_delta = 1.0;
    std::string weighting = "sigma";
    std::string acceptance = "every_point";
    double epsilon_scale = 2.0;
    int theta_points = 91;
    int tau_points = 97;
    double line_merge_hz = 1e3;

    bool operator==(const FitConfig&) const = default;
};

struct DecayConfig {
    double iota_min = 0.3;
    double iota_max = 2.0;

    bool operator==(const DecayConfig&) const = default;
};

struct ToolkitConfig {
    ConstantsConfig constants;
    HyperfineConfig hyperfine;
    GeometryConfig geometry;
    NvBlock nv;
    BathConfig bath;
    std::optional<LatticeConfig> lattice;
    EeConfig ee;
    FitConfig fit;
    DecayConfig decay;

    bool operator==(const ToolkitConfig&) const = default;

    void validate() const;

    [[nodiscard]] PhysicalConstants physical_constants() const;
    [[nodiscard]] IsotopeTable isotope_table() const;
    [[nodiscard]] SpinSystemSpec spin_spec(double b_field_tesla, double theta_e) const;
    [[nodiscard]] SpectrumOptions spectrum_options() const;
    [[nodiscard]] FilmGeometry film_geometry() const;
    [[nodiscard]] NvConfig nv_config() const;
    [[nodiscard]] ForwardModelConfig forward_model_config() const;
    [[nodiscard]] EeOptions ee_options() const;
    [[nodiscard]] DecayFitOptions decay_options() const;
    /// Lattice with the field at theta_e (radians) from the site-0 molecular axis.
    [[nodiscard]] LatticeModel lattice_model(double theta_e) const;
    /// Problem skeleton without data or model attached.
    [[nodiscard]] FitProblem fit_problem() const;
};

/// Parse JSON text (comments allowed). Throws ConfigError with a dotted path.
ToolkitConfig parse_config(const std::string& text);
ToolkitConfig load_config(const std::string& path);
/// Canonical JSON text, indented, keys in fixed order.
std::string dump_config(const ToolkitConfig& cfg);

}  // namespace spinbath
