// pipeline.hpp: the batch commands behind the spinbath CLI.

#pragma once

#include "spinbath/config.hpp"
#include "spinbath/estimator.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace spinbath {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitData = 3,
    kExitConvergence = 4,
    kExitUnidentifiable = 5,
};

struct CommandContext {
    ToolkitConfig config;
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
};

struct SpectrumArgs {
    std::optional<double> field_gauss;
    std::optional<double> theta_deg;
    std::optional<double> tau_ns;
    double f_min_mhz = 0.0;
    double f_max_mhz = 4000.0;
    int points = 2001;
    std::optional<std::array<double, 3>> sweep;  ///< b_min G, b_max G, count
};

struct T1Args {
    std::string data;
    bool simulate = false;
    std::vector<double> fields_gauss;
    double noise = 0.05;
    double t1_free_us = 1000.0;
    std::string nv_id = "NV-sim";
};

struct FitArgs {
    std::string data;
    std::vector<std::string> free;  ///< empty: take fit.free from the config
    std::string nv_id;              ///< empty: every NV in the file
};

struct DepthArgs {
    std::string data;
    std::string reference;
};

struct DecayArgs {
    std::string data;
};

int cmd_spectrum(const CommandContext& ctx, const SpectrumArgs& args);
int cmd_t1(const CommandContext& ctx, const T1Args& args);
int cmd_fit(const CommandContext& ctx, const FitArgs& args);
int cmd_tau_ee(const CommandContext& ctx);
int cmd_depth(const CommandContext& ctx, const DepthArgs& args);
int cmd_decay_fit(const CommandContext& ctx, const DecayArgs& args);

/// Synthetic record for a true Delta Gamma_1 with relative noise on the rate change;
/// the film-free T1 is exact up to a tiny quoted sigma.
MeasurementRecord synthetic_record(const std::string& nv_id, double b_gauss, double delta_gamma_true,
                                   double rel_noise, double t1_free, std::mt19937_64& rng);

}  // namespace spinbath
