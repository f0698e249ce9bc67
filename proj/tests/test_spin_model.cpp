#include "spinbath/bath_spectrum.hpp"
#include "spinbath/errors.hpp"
#include "spinbath/spin_model.hpp"

#include "support.hpp"

#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <random>

using namespace spinbath;

namespace {

SpinSystemSpec default_spec(double b_gauss, double theta) {
    return SpinSystemSpec::cupc(2.1577, 2.0390, units::gauss_to_tesla(b_gauss), theta);
}

// Breit-Rabi levels for H = w S_z + a S.I (S = 1/2, no nuclear Zeeman term).
std::vector<double> breit_rabi(double w, double a, double spin) {
    std::vector<double> e;
    const double dhf = a * (spin + 0.5);
    const double n = 2.0 * spin + 1.0;
    const double x = w / dhf;
    for (double m = -(spin + 0.5); m <= spin + 0.5 + 1e-9; m += 1.0) {
        if (std::abs(std::abs(m) - (spin + 0.5)) < 1e-9) {
            e.push_back(a * spin / 2.0 + (m > 0 ? w / 2.0 : -w / 2.0));
            continue;
        }
        const double root = std::sqrt(1.0 + 4.0 * m * x / n + x * x);
        e.push_back(-dhf / (2.0 * n) + dhf / 2.0 * root);
        e.push_back(-dhf / (2.0 * n) - dhf / 2.0 * root);
    }
    return e;
}

}  // namespace

TEST_CASE("spin matrices obey the angular momentum algebra") {
    for (double s : {0.5, 1.0, 1.5}) {
        const auto m = spin_matrices(s);
        const Eigen::MatrixXcd comm = m[0] * m[1] - m[1] * m[0];
        CHECK((comm - std::complex<double>(0, 1) * m[2]).norm() < 1e-14);
        const Eigen::MatrixXcd s2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
        const auto d = m[0].rows();
        CHECK((s2 - s * (s + 1.0) * Eigen::MatrixXcd::Identity(d, d)).norm() < 1e-13);
    }
}

TEST_CASE("total spin decomposition reproduces the product dimension") {
    const auto two = total_spin_multiplicities(1.0, 2);
    REQUIRE(two.size() == 3);
    // Descending J: 1 (x) 1 = 2 + 1 + 0.
    CHECK(two[0] == std::pair<double, int>{2.0, 1});
    CHECK(two[1] == std::pair<double, int>{1.0, 1});
    CHECK(two[2] == std::pair<double, int>{0.0, 1});
    for (int k = 1; k <= 4; ++k) {
        int dim = 0;
        for (auto [j, c] : total_spin_multiplicities(1.0, k)) {
            dim += static_cast<int>(2 * j + 1) * c;
        }
        CHECK(dim == static_cast<int>(std::pow(3, k)));
    }
}

TEST_CASE("tensor rotation sign convention") {
    const Eigen::Matrix3d t = rotate_tensor({0.0, 0.0, 1.0}, kPi / 4.0);
    CHECK(t(0, 2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(t(2, 2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(t(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("default CuPc spec has 648 states") {
    const auto spec = default_spec(372.0, 0.3);
    CHECK(spec.hilbert_dimension() == 648);
    const auto lines = transition_spectrum(spec, PhysicalConstants{});
    CHECK(lines.state_count_half == 324);
}

TEST_CASE("Hamiltonian is Hermitian") {
    auto spec = default_spec(461.0, 0.7);
    spec.n_nitrogens = 2;
    const Eigen::MatrixXcd h = build_hamiltonian(spec, PhysicalConstants{});
    CHECK((h - h.adjoint()).norm() <= 1e-12 * h.norm());
}

TEST_CASE("Hamiltonian matches an independent Kronecker construction") {
    // Electron plus a single nitrogen along the lab axes.
    PhysicalConstants pc;
    LabSpinSystem sys;
    sys.g_tensor = Eigen::Vector3d(2.0, 2.05, 2.1).asDiagonal();
    sys.g_tensor(0, 2) = sys.g_tensor(2, 0) = 0.01;
    sys.b_field = 0.03;
    Eigen::Matrix3d a;
    a << 1.0, 0.2, 0.3, 0.2, 0.5, 0.1, 0.3, 0.1, 2.0;
    sys.nuclei.push_back({1.0, a * 1e8});
    const Eigen::MatrixXcd h = build_hamiltonian(sys, pc);

    Eigen::MatrixXcd sx(2, 2), sy(2, 2), sz(2, 2);
    sx << 0, 0.5, 0.5, 0;
    sy << 0, std::complex<double>(0, -0.5), std::complex<double>(0, 0.5), 0;
    sz << 0.5, 0, 0, -0.5;
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXcd ix(3, 3), iy(3, 3), iz(3, 3);
    ix << 0, r, 0, r, 0, r, 0, r, 0;
    iy << 0, std::complex<double>(0, -r), 0, std::complex<double>(0, r), 0, std::complex<double>(0, -r), 0,
        std::complex<double>(0, r), 0;
    iz << 1, 0, 0, 0, 0, 0, 0, 0, -1;
    const std::array<Eigen::MatrixXcd, 3> s{sx, sy, sz};
    const std::array<Eigen::MatrixXcd, 3> i{ix, iy, iz};
    const Eigen::MatrixXcd id3 = Eigen::MatrixXcd::Identity(3, 3);
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(6, 6);
    for (int k = 0; k < 3; ++k) {
        ref += pc.bohr_angular() * sys.b_field * sys.g_tensor(2, k) * Eigen::kroneckerProduct(s[k], id3).eval();
        for (int l = 0; l < 3; ++l) {
            ref += a(k, l) * 1e8 * Eigen::kroneckerProduct(s[k], i[l]).eval();
        }
    }
    CHECK((h - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("isotropic hyperfine lines match Breit-Rabi") {
    PhysicalConstants pc;
    for (double theta : {0.0, 0.6}) {
        SpinSystemSpec spec;
        spec.n_nitrogens = 0;
        spec.cu_tensor = {kTwoPi * 300e6, kTwoPi * 300e6, kTwoPi * 300e6};
        spec.g_parallel = spec.g_perp = 2.0023;
        spec.b_field = 0.02;
        spec.theta_e = theta;
        const auto lines = transition_spectrum(spec, pc);
        const double w = pc.bohr_angular() * 2.0023 * spec.b_field;
        const auto e = breit_rabi(w, kTwoPi * 300e6, 1.5);
        REQUIRE(e.size() == 8);
        REQUIRE(!lines.transitions.empty());
        for (const auto& t : lines.transitions) {
            double best = 1e300;
            for (double ei : e) {
                for (double ej : e) {
                    best = std::min(best, std::abs(t.omega - (ei - ej)));
                }
            }
            CHECK(best < 1e-7 * w);
        }
    }
}

TEST_CASE("weight trace identity over random specs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> b(0.0, 1000.0);
    std::uniform_real_distribution<double> th(0.0, kPi / 2.0);
    for (int k = 0; k < 4; ++k) {
        const auto lines = transition_spectrum(default_spec(b(rng), th(rng)), PhysicalConstants{});
        const double sum = lines.kept_weight() + lines.diagonal_weight + lines.degenerate_weight + lines.pruned_weight;
        CHECK(std::abs(sum - lines.trace_sx2_over_m) < 1e-10);
        CHECK(lines.trace_sx2_over_m == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("symmetry-reduced and dense routes agree") {
    PhysicalConstants pc;
    const auto spec = default_spec(372.0, 0.4);
    SpectrumOptions dense;
    dense.method = SpectrumMethod::dense;
    const auto a = transition_spectrum(spec, pc, dense);
    const auto b = transition_spectrum(spec, pc, SpectrumOptions{});
    CHECK(a.kept_weight() == doctest::Approx(b.kept_weight()).epsilon(1e-9));
    const BathSpectrumModel ma(TransitionSpectrum{{a}}, 2e-9, FilmGeometry{});
    const BathSpectrumModel mb(TransitionSpectrum{{b}}, 2e-9, FilmGeometry{});
    for (double f : {100.0, 900.0, 1827.0, 2500.0}) {
        const double w = units::mhz_to_angular(f);
        CHECK(testing::rel_diff(ma.spectral_density(w), mb.spectral_density(w)) < 1e-8);
    }
}

TEST_CASE("eta floor insensitivity") {
    PhysicalConstants pc;
    const auto spec = default_spec(461.0, 0.5);
    SpectrumOptions tight;
    tight.eta_floor = 1e-14;
    const auto table = IsotopeTable::natural_copper();
    const BathSpectrumModel a(isotope_resolved_spectrum(spec, table, pc), 2e-9, FilmGeometry{});
    const BathSpectrumModel b(isotope_resolved_spectrum(spec, table, pc, tight), 2e-9, FilmGeometry{});
    for (double f : {300.0, 1580.0, 2000.0}) {
        const double w = units::mhz_to_angular(f);
        CHECK(testing::rel_diff(a.spectral_density(w), b.spectral_density(w)) < 1e-6);
    }
}

TEST_CASE("electron-only spectrum is the Larmor doublet") {
    PhysicalConstants pc;
    const auto s = electron_only_spectrum(0.04, pc.g_free, pc);
    REQUIRE(s.isotopes.size() == 1);
    const auto& t = s.isotopes[0].transitions;
    REQUIRE(t.size() == 2);
    for (const auto& x : t) {
        CHECK(std::abs(x.omega) == doctest::Approx(pc.gamma_e * 0.04).epsilon(1e-12));
        CHECK(x.eta == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("invalid specs are rejected") {
    auto spec = default_spec(372.0, 0.0);
    spec.max_dimension = 100;
    CHECK_THROWS_AS(build_hamiltonian(spec, PhysicalConstants{}), ConfigError);
    IsotopeTable bad = IsotopeTable::natural_copper();
    bad.entries[0].abundance = 0.9;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    auto neg = default_spec(372.0, 0.0);
    neg.b_field = -1.0;
    CHECK_THROWS_AS(neg.validate(), ConfigError);
}
