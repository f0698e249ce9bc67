// spinbath command-line front end.

#include "spinbath/errors.hpp"
#include "spinbath/manifest.hpp"
#include "spinbath/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <string>

using namespace spinbath;

namespace {

// "B0:B1:N" for --sweep.
std::array<double, 3> parse_sweep(const std::string& s) {
    std::array<double, 3> out{};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
        const std::size_t end = s.find(':', pos);
        if ((k < 2) == (end == std::string::npos)) {
            throw ConfigError("--sweep: expected B0:B1:N, got '" + s + "'");
        }
        const std::string part = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        std::size_t used = 0;
        try {
            out[k] = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size()) {
            throw ConfigError("--sweep: bad number '" + part + "'");
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CuPc spin-bath relaxometry toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", toolkit_version());

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file (JSON)")->required();
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out_dir, "output directory");
    };

    SpectrumArgs spectrum;
    std::string sweep;
    auto* s_spec = app.add_subcommand("spectrum", "bath noise spectrum at one field, or a field sweep");
    add_common(s_spec);
    s_spec->add_option("--field", spectrum.field_gauss, "field in gauss");
    s_spec->add_option("--theta", spectrum.theta_deg, "molecular axis angle in degrees");
    s_spec->add_option("--tau", spectrum.tau_ns, "correlation time in ns");
    s_spec->add_option("--fmin", spectrum.f_min_mhz, "lowest frequency, MHz");
    s_spec->add_option("--fmax", spectrum.f_max_mhz, "highest frequency, MHz");
    s_spec->add_option("--points", spectrum.points, "frequency samples");
    s_spec->add_option("--sweep", sweep, "field sweep B0:B1:N in gauss");

    T1Args t1;
    auto* s_t1 = app.add_subcommand("t1", "rate changes from T1 data, or synthetic data");
    add_common(s_t1);
    s_t1->add_option("--data", t1.data, "measurement CSV");
    s_t1->add_flag("--simulate", t1.simulate, "write synthetic measurements instead");
    s_t1->add_option("--fields", t1.fields_gauss, "fields for --simulate, gauss")->delimiter(',');
    s_t1->add_option("--noise", t1.noise, "relative noise on the rate change");
    s_t1->add_option("--t1-free-us", t1.t1_free_us, "film-free T1, microseconds");
    s_t1->add_option("--nv-id", t1.nv_id, "NV label for --simulate");

    FitArgs fit_args;
    auto* s_fit = app.add_subcommand("fit", "estimate bath parameters per NV");
    add_common(s_fit);
    s_fit->add_option("--data", fit_args.data, "measurement CSV");
    s_fit->add_option("--free", fit_args.free, "free parameters (tau_e, theta_e, d_nv)")->delimiter(',');
    s_fit->add_option("--nv-id", fit_args.nv_id, "fit one NV only");

    auto* s_tau = app.add_subcommand("tau-ee", "self-consistent electron-electron correlation time");
    add_common(s_tau);

    DepthArgs depth;
    auto* s_depth = app.add_subcommand("depth", "NV depth from T1 data");
    add_common(s_depth);
    s_depth->add_option("--data", depth.data, "measurement CSV");
    s_depth->add_option("--reference", depth.reference, "CSV of nv_id, d_ref_nm");

    DecayArgs decay;
    auto* s_decay = app.add_subcommand("decay-fit", "stretched-exponential fit of a population decay");
    add_common(s_decay);
    s_decay->add_option("--data", decay.data, "CSV with t_us, signal, sigma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        CommandContext ctx;
        ctx.config = load_config(config_path);
        ctx.config_path = config_path;
        ctx.out_dir = out_dir;
        ctx.seed = seed;
        if (s_spec->parsed()) {
            if (!sweep.empty()) {
                spectrum.sweep = parse_sweep(sweep);
            }
            return cmd_spectrum(ctx, spectrum);
        }
        if (s_t1->parsed()) {
            return cmd_t1(ctx, t1);
        }
        if (s_fit->parsed()) {
            return cmd_fit(ctx, fit_args);
        }
        if (s_tau->parsed()) {
            return cmd_tau_ee(ctx);
        }
        if (s_depth->parsed()) {
            return cmd_depth(ctx, depth);
        }
        if (s_decay->parsed()) {
            return cmd_decay_fit(ctx, decay);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const UnidentifiableError& e) {
        std::cerr << "unidentifiable: " << e.what() << "\n";
        return kExitUnidentifiable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
