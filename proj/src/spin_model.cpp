#include "spinbath/spin_model.hpp"

#include "spinbath/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace spinbath {

namespace {

bool is_half_integer_multiple(double s) {
    const double twice = 2.0 * s;
    return s >= 0.0 && std::abs(twice - std::round(twice)) < 1e-12;
}

int multiplicity_of(double s) { return static_cast<int>(std::lround(2.0 * s)) + 1; }

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

// Operator `op` acting on factor `slot` of a product space with factor dims `dims`.
Eigen::MatrixXcd embed(const Eigen::MatrixXcd& op, std::size_t slot, const std::vector<int>& dims) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (k == slot) {
            out = kron(out, op);
        } else {
            out = kron(out, Eigen::MatrixXcd::Identity(dims[k], dims[k]));
        }
    }
    return out;
}

// Product of `a` on factor `slot_a` and `b` on factor `slot_b`, slot_a != slot_b.
Eigen::MatrixXcd embed_pair(const Eigen::MatrixXcd& a, std::size_t slot_a, const Eigen::MatrixXcd& b,
                            std::size_t slot_b, const std::vector<int>& dims) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (k == slot_a) {
            out = kron(out, a);
        } else if (k == slot_b) {
            out = kron(out, b);
        } else {
            out = kron(out, Eigen::MatrixXcd::Identity(dims[k], dims[k]));
        }
    }
    return out;
}

bool tensors_equal(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1.0});
    return (a - b).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

struct Block {
    LabSpinSystem system;
    double multiplicity = 1.0;
};

// Diagonalize one (sub)system and append its transitions, scaled by `multiplicity`,
// normalized by the full-space half-dimension `m_half`.
void collect_transitions(const LabSpinSystem& sys, double multiplicity, double m_half,
                         const PhysicalConstants& pc, const SpectrumOptions& opts,
                         std::size_t max_dimension, IsotopeLines& out) {
    const Eigen::MatrixXcd h = build_hamiltonian(sys, pc, max_dimension);
    const Eigen::MatrixXcd sx = electron_sx(sys);
    const double hscale = std::max(h.cwiseAbs().maxCoeff(), 1.0);
    const bool real_problem = h.imag().cwiseAbs().maxCoeff() <= 1e-14 * hscale &&
                              sx.imag().cwiseAbs().maxCoeff() == 0.0;

    Eigen::VectorXd energies;
    Eigen::MatrixXd x_real;
    Eigen::MatrixXcd x_complex;
    if (real_problem) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.real());
        if (solver.info() != Eigen::Success) {
            throw ConvergenceError("transition_spectrum: eigensolver did not converge");
        }
        energies = solver.eigenvalues();
        const Eigen::MatrixXd& u = solver.eigenvectors();
        x_real = u.transpose() * sx.real() * u;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
        if (solver.info() != Eigen::Success) {
            throw ConvergenceError("transition_spectrum: eigensolver did not converge");
        }
        energies = solver.eigenvalues();
        const Eigen::MatrixXcd& u = solver.eigenvectors();
        x_complex = u.adjoint() * sx * u;
    }

    out.trace_sx2_over_m += multiplicity * (sx.adjoint() * sx).trace().real() / m_half;

    const double degenerate = kTwoPi * opts.degenerate_hz;
    const Eigen::Index n = energies.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double amp2 = real_problem ? x_real(i, j) * x_real(i, j) : std::norm(x_complex(i, j));
            const double eta = multiplicity * amp2 / m_half;
            if (i == j) {
                out.diagonal_weight += eta;
                continue;
            }
            const double omega = energies(i) - energies(j);
            if (std::abs(omega) < degenerate) {
                out.degenerate_weight += eta;
            } else if (eta < opts.eta_floor) {
                out.pruned_weight += eta;
            } else {
                out.transitions.push_back({omega, eta});
            }
        }
    }
}

}  // namespace

IsotopeTable IsotopeTable::natural_copper() {
    return IsotopeTable{{
        {"63Cu", 0.6915, 1.0, 1.5},
        {"65Cu", 0.3085, 1.07, 1.5},
    }};
}

void IsotopeTable::validate() const {
    if (entries.empty()) {
        throw ConfigError("isotopes: table is empty");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        const std::string where = "isotopes[" + std::to_string(k) + "]";
        if (!(e.abundance >= 0.0 && e.abundance <= 1.0)) {
            throw ConfigError(where + ".abundance: must lie in [0, 1]");
        }
        if (!(std::isfinite(e.hyperfine_scale))) {
            throw ConfigError(where + ".hyperfine_scale: must be finite");
        }
        if (!is_half_integer_multiple(e.nuclear_spin)) {
            throw ConfigError(where + ".nuclear_spin: must be a non-negative multiple of 1/2");
        }
        total += e.abundance;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg.precision(15);
        msg << "isotopes: abundances sum to " << total << ", expected 1";
        throw ConfigError(msg.str());
    }
}

SpinSystemSpec SpinSystemSpec::cupc(double g_parallel, double g_perp, double b_field, double theta_e) {
    SpinSystemSpec s;
    s.cu_tensor = {units::mhz_to_angular(-83.0), units::mhz_to_angular(-83.0), units::mhz_to_angular(-648.0)};
    s.n_tensor = {units::mhz_to_angular(57.0), units::mhz_to_angular(45.0), units::mhz_to_angular(45.0)};
    s.g_parallel = g_parallel;
    s.g_perp = g_perp;
    s.b_field = b_field;
    s.theta_e = theta_e;
    return s;
}

std::size_t SpinSystemSpec::hilbert_dimension() const {
    double dim = 2.0 * multiplicity_of(isotope.nuclear_spin);
    dim *= std::pow(static_cast<double>(multiplicity_of(nitrogen_spin)), n_nitrogens);
    if (dim > 1e15) {
        return static_cast<std::size_t>(-1);
    }
    return static_cast<std::size_t>(dim);
}

void SpinSystemSpec::validate() const {
    if (!(theta_e >= 0.0 && theta_e <= kPi / 2.0 + 1e-12)) {
        throw ConfigError("spin_system.theta_e: must lie in [0, pi/2]");
    }
    if (!(b_field >= 0.0 && std::isfinite(b_field))) {
        throw ConfigError("spin_system.b_field: must be finite and >= 0");
    }
    if (!(g_parallel > 0.0 && g_perp > 0.0)) {
        throw ConfigError("spin_system.g: g_parallel and g_perp must be > 0");
    }
    if (n_nitrogens < 0) {
        throw ConfigError("spin_system.n_nitrogens: must be >= 0");
    }
    if (!is_half_integer_multiple(isotope.nuclear_spin) || !is_half_integer_multiple(nitrogen_spin)) {
        throw ConfigError("spin_system: nuclear spins must be non-negative multiples of 1/2");
    }
    if (hilbert_dimension() > max_dimension) {
        throw ConfigError("spin_system: Hilbert dimension " + std::to_string(hilbert_dimension()) +
                          " exceeds cap " + std::to_string(max_dimension));
    }
}

std::size_t LabSpinSystem::dimension() const {
    std::size_t dim = 2;
    for (const auto& n : nuclei) {
        dim *= static_cast<std::size_t>(multiplicity_of(n.spin));
    }
    return dim;
}

double IsotopeLines::kept_weight() const {
    double s = 0.0;
    for (const auto& t : transitions) {
        s += t.eta;
    }
    return s;
}

std::size_t TransitionSpectrum::transition_count() const {
    std::size_t n = 0;
    for (const auto& iso : isotopes) {
        n += iso.transitions.size();
    }
    return n;
}

Eigen::Matrix3d rotation_y(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Eigen::Matrix3d r;
    r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
    return r;
}

Eigen::Matrix3d rotation_z(double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    Eigen::Matrix3d r;
    r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return r;
}

Eigen::Matrix3d rotate_tensor(const HyperfineTensor& t, double theta_e) {
    const Eigen::Matrix3d r = rotation_y(theta_e);
    return r * t.matrix() * r.transpose();
}

LabSpinSystem to_lab_frame(const SpinSystemSpec& spec) {
    spec.validate();
    LabSpinSystem sys;
    const Eigen::Matrix3d r = rotation_y(spec.theta_e);
    const Eigen::Matrix3d g_mol = Eigen::Vector3d(spec.g_perp, spec.g_perp, spec.g_parallel).asDiagonal();
    sys.g_tensor = r * g_mol * r.transpose();
    sys.b_field = spec.b_field;

    sys.nuclei.push_back({spec.isotope.nuclear_spin,
                          rotate_tensor(spec.cu_tensor.scaled(spec.isotope.hyperfine_scale), spec.theta_e)});
    for (int k = 0; k < spec.n_nitrogens; ++k) {
        // Bonds spaced evenly in the molecular plane; principal x along the bond.
        const Eigen::Matrix3d p = rotation_z(kTwoPi * k / spec.n_nitrogens);
        const Eigen::Matrix3d mol = p * spec.n_tensor.matrix() * p.transpose();
        sys.nuclei.push_back({spec.nitrogen_spin, r * mol * r.transpose()});
    }
    return sys;
}

std::array<Eigen::MatrixXcd, 3> spin_matrices(double s) {
    const int d = multiplicity_of(s);
    Eigen::MatrixXcd sz = Eigen::MatrixXcd::Zero(d, d);
    Eigen::MatrixXcd sp = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const double m = s - i;
        sz(i, i) = m;
        if (i > 0) {
            // <m+1| S+ |m>, with row i-1 holding m+1.
            sp(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
        }
    }
    const std::complex<double> half_i(0.0, 0.5);
    Eigen::MatrixXcd sx = 0.5 * (sp + sp.adjoint());
    Eigen::MatrixXcd sy = -half_i * (sp - sp.adjoint());
    return {sx, sy, sz};
}

Eigen::MatrixXcd build_hamiltonian(const LabSpinSystem& sys, const PhysicalConstants& pc,
                                   std::size_t max_dimension) {
    const std::size_t dim = sys.dimension();
    if (dim > max_dimension) {
        throw ConfigError("build_hamiltonian: Hilbert dimension " + std::to_string(dim) + " exceeds cap " +
                          std::to_string(max_dimension));
    }
    std::vector<int> dims{2};
    for (const auto& n : sys.nuclei) {
        dims.push_back(multiplicity_of(n.spin));
    }

    const auto s = spin_matrices(0.5);

    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(d, d);
    const double zeeman = pc.bohr_angular() * sys.b_field;
    for (int a = 0; a < 3; ++a) {
        if (sys.g_tensor(2, a) != 0.0) {
            h += zeeman * sys.g_tensor(2, a) * embed(s[a], 0, dims);
        }
    }
    for (std::size_t k = 0; k < sys.nuclei.size(); ++k) {
        const auto& nuc = sys.nuclei[k];
        const auto i_ops = spin_matrices(nuc.spin);
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                if (nuc.tensor(a, b) != 0.0) {
                    h += nuc.tensor(a, b) * embed_pair(s[a], 0, i_ops[b], k + 1, dims);
                }
            }
        }
    }
    return h;
}

Eigen::MatrixXcd build_hamiltonian(const SpinSystemSpec& spec, const PhysicalConstants& pc) {
    spec.validate();
    return build_hamiltonian(to_lab_frame(spec), pc, spec.max_dimension);
}

Eigen::MatrixXcd electron_sx(const LabSpinSystem& sys) {
    std::vector<int> dims{2};
    for (const auto& n : sys.nuclei) {
        dims.push_back(multiplicity_of(n.spin));
    }
    return embed(spin_matrices(0.5)[0], 0, dims);
}

std::vector<std::pair<double, int>> total_spin_multiplicities(double s, int k) {
    const int twice = static_cast<int>(std::lround(2.0 * s));
    // counts[offset + 2m] = number of product states with total projection m.
    std::vector<long long> counts{1};
    for (int step = 0; step < k; ++step) {
        std::vector<long long> next(counts.size() + static_cast<std::size_t>(twice), 0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            for (int m = 0; m <= twice; ++m) {
                next[i + static_cast<std::size_t>(m)] += counts[i];
            }
        }
        counts = std::move(next);
    }
    // Index i corresponds to 2M = 2*i - k*twice in half units; entries step by 1 in M.
    const int top = k * twice;  // 2 * J_max
    std::vector<std::pair<double, int>> out;
    for (int two_j = top; two_j >= 0; two_j -= 2) {
        const std::size_t idx = static_cast<std::size_t>((two_j + top) / 2);
        const long long above = (idx + 1 < counts.size()) ? counts[idx + 1] : 0;
        const long long mult = counts[idx] - above;
        if (mult > 0) {
            out.emplace_back(0.5 * two_j, static_cast<int>(mult));
        }
    }
    return out;
}

IsotopeLines transition_spectrum(const LabSpinSystem& sys, const PhysicalConstants& pc,
                                 const SpectrumOptions& opts, std::size_t max_dimension) {
    const std::size_t dim = sys.dimension();
    if (dim > max_dimension) {
        throw ConfigError("transition_spectrum: Hilbert dimension " + std::to_string(dim) + " exceeds cap " +
                          std::to_string(max_dimension));
    }
    IsotopeLines out;
    out.state_count_half = dim / 2;
    const double m_half = static_cast<double>(out.state_count_half);

    if (opts.method == SpectrumMethod::dense) {
        collect_transitions(sys, 1.0, m_half, pc, opts, max_dimension, out);
        return out;
    }

    // Group nuclei that enter the Hamiltonian identically; such a group couples only
    // through its total spin, so the space splits into blocks labelled by one total
    // spin J per group, each repeated mult(J) times.
    struct Group {
        double spin;
        Eigen::Matrix3d tensor;
        int count;
    };
    std::vector<Group> groups;
    for (const auto& n : sys.nuclei) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return std::abs(g.spin - n.spin) < 1e-12 && tensors_equal(g.tensor, n.tensor);
        });
        if (it == groups.end()) {
            groups.push_back({n.spin, n.tensor, 1});
        } else {
            ++it->count;
        }
    }

    std::vector<std::vector<std::pair<double, int>>> choices;
    choices.reserve(groups.size());
    for (const auto& g : groups) {
        choices.push_back(total_spin_multiplicities(g.spin, g.count));
    }

    std::vector<std::size_t> pick(groups.size(), 0);
    while (true) {
        LabSpinSystem block;
        block.g_tensor = sys.g_tensor;
        block.b_field = sys.b_field;
        double mult = 1.0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto [j, m] = choices[gi][pick[gi]];
            mult *= m;
            if (j > 0.0) {
                block.nuclei.push_back({j, groups[gi].tensor});
            }
        }
        collect_transitions(block, mult, m_half, pc, opts, max_dimension, out);

        std::size_t gi = 0;
        while (gi < groups.size()) {
            if (++pick[gi] < choices[gi].size()) {
                break;
            }
            pick[gi] = 0;
            ++gi;
        }
        if (gi == groups.size()) {
            break;
        }
    }
    return out;
}

IsotopeLines transition_spectrum(const SpinSystemSpec& spec, const PhysicalConstants& pc,
                                 const SpectrumOptions& opts) {
    IsotopeLines lines = transition_spectrum(to_lab_frame(spec), pc, opts, spec.max_dimension);
    lines.label = spec.isotope.label;
    lines.abundance = spec.isotope.abundance;
    return lines;
}

TransitionSpectrum isotope_resolved_spectrum(const SpinSystemSpec& base, const IsotopeTable& table,
                                             const PhysicalConstants& pc, const SpectrumOptions& opts) {
    table.validate();
    TransitionSpectrum out;
    for (const auto& iso : table.entries) {
        SpinSystemSpec spec = base;
        spec.isotope = iso;
        out.isotopes.push_back(transition_spectrum(spec, pc, opts));
    }
    return out;
}

TransitionSpectrum electron_only_spectrum(double b_field, double g, const PhysicalConstants& pc) {
    LabSpinSystem sys;
    sys.g_tensor = Eigen::Matrix3d::Identity() * g;
    sys.b_field = b_field;
    IsotopeLines lines = transition_spectrum(sys, pc, SpectrumOptions{.method = SpectrumMethod::dense});
    lines.label = "e";
    lines.abundance = 1.0;
    return TransitionSpectrum{{lines}};
}

}  // namespace spinbath
