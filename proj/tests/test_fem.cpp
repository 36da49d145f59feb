#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oma/errors.hpp"
#include "oma/fem.hpp"
#include "oma/rng.hpp"
#include "oma/truss.hpp"
#include "support/oracles.hpp"

using namespace oma;

namespace {

constexpr double kPi = 3.14159265358979323846;

// single vertical bar, bottom node fully fixed, top node vertical-only
TrussStructure single_bar(double length, double youngs, double area_m2, double rho) {
    TrussStructure t;
    t.nodes = {{0.0, 0.0}, {0.0, length}};
    t.edges = {{0, 1}};
    t.youngs_modulus = {youngs};
    t.area = {area_m2};
    t.density = {rho};
    t.supports = {{true, true}, {true, false}};
    return t;
}

TrussStructure random_truss(std::uint64_t seed, int target_nodes = 20) {
    PopulationConfig cfg;
    cfg.seed = seed;
    return generate_structure(cfg, static_cast<int>(seed) % 7, target_nodes % 3);
}

std::vector<std::vector<double>> to_plain(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    }
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("fem");

TEST_CASE("single element: EA/L stiffness and rho*A*L/3 consistent mass") {
    const double L = 2.5, E = 210e9, A = 0.5, rho = 8015.0;
    auto [sys, dofs] = assemble(single_bar(L, E, A, rho));
    REQUIRE(dofs.free_count == 1);
    CHECK(sys.stiffness(0, 0) == doctest::Approx(E * A / L).epsilon(1e-12));
    CHECK(sys.mass(0, 0) == doctest::Approx(rho * A * L / 3.0).epsilon(1e-12));
}

TEST_CASE("assembly symmetry and linearity in E") {
    TrussStructure truss = random_truss(3);
    auto [sys, dofs] = assemble(truss);
    double asym = 0.0;
    for (Eigen::Index i = 0; i < sys.stiffness.rows(); ++i) {
        for (Eigen::Index j = 0; j < sys.stiffness.cols(); ++j) {
            asym = std::max(asym, std::abs(sys.stiffness(i, j) - sys.stiffness(j, i)));
            asym = std::max(asym, std::abs(sys.mass(i, j) - sys.mass(j, i)));
        }
    }
    CHECK(asym == 0.0);

    TrussStructure doubled = truss;
    for (auto& e : doubled.youngs_modulus) e *= 2.0;
    auto [sys2, dofs2] = assemble(doubled);
    CHECK(((sys2.stiffness - 2.0 * sys.stiffness).lpNorm<Eigen::Infinity>()) <
          1e-6 * sys.stiffness.lpNorm<Eigen::Infinity>());
    CHECK((sys2.mass - sys.mass).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("solve_modes: fixed-free bar closed form") {
    const double L = 3.0, E = 200e9, A = 0.5, rho = 8015.0;
    auto [sys, dofs] = assemble(single_bar(L, E, A, rho));
    const EigenModes modes = solve_modes(sys.stiffness, sys.mass, 1);
    const double expected = std::sqrt(3.0 * E / (rho * L * L));
    CHECK(modes.omega[0] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("solve_modes: identity problem") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
    const EigenModes modes = solve_modes(eye, eye, 3);
    for (double w : modes.omega) CHECK(w == doctest::Approx(1.0));
    const Eigen::MatrixXd gram = modes.shapes.transpose() * modes.shapes;
    CHECK((gram - eye).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("solve_modes matches the Jacobi oracle and satisfies the residual bound") {
    const TrussStructure truss = random_truss(11, 20);
    auto [sys, dofs] = assemble(truss);
    const int k = std::min<int>(6, dofs.free_count);
    const EigenModes modes = solve_modes(sys.stiffness, sys.mass, k);

    const auto oracle =
        oracles::generalized_eigenvalues(to_plain(sys.stiffness), to_plain(sys.mass));
    for (int j = 0; j < k; ++j) {
        const double lambda = modes.omega[j] * modes.omega[j];
        CHECK(std::abs(lambda - oracle[j]) <= 1e-8 * std::abs(oracle[j]));
    }
    // eigenpair residual and mass normalization
    for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd phi = modes.shapes.col(j);
        const Eigen::VectorXd residual =
            sys.stiffness * phi - modes.omega[j] * modes.omega[j] * (sys.mass * phi);
        CHECK(residual.lpNorm<Eigen::Infinity>() <
              1e-8 * (sys.stiffness * phi).lpNorm<Eigen::Infinity>());
        CHECK(phi.dot(sys.mass * phi) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(std::is_sorted(modes.omega.begin(), modes.omega.end()));
}

TEST_CASE("rayleigh damping: formula value, anchor interpolation, modal diagonality") {
    SUBCASE("direct formula evaluation") {
        // alpha = 0.1, beta = 0.001 at omega = 2 pi
        const double zeta = 0.5 * (0.1 / (2.0 * kPi) + 0.001 * 2.0 * kPi);
        CHECK(zeta == doctest::Approx(0.011099).epsilon(1e-4));
    }
    SUBCASE("equal anchors reproduce exactly") {
        const std::vector<double> omega{10.0, 25.0, 40.0, 60.0};
        const RayleighModel m = rayleigh_damping(omega, 0.02, 0.02, 0, 3);
        CHECK(m.ratios[0] == doctest::Approx(0.02).epsilon(1e-12));
        CHECK(m.ratios[3] == doctest::Approx(0.02).epsilon(1e-12));
    }
    SUBCASE("phi^T C phi is diagonal with 2 zeta_j omega_j") {
        const TrussStructure truss = random_truss(13);
        auto [sys, dofs] = assemble(truss);
        const int k = std::min<int>(4, dofs.free_count);
        const EigenModes modes = solve_modes(sys.stiffness, sys.mass, k);
        const RayleighModel m = rayleigh_damping(modes.omega, 0.013, 0.031, 0, k - 1);
        const Eigen::MatrixXd c = m.alpha * sys.mass + m.beta * sys.stiffness;
        const Eigen::MatrixXd modal = modes.shapes.transpose() * c * modes.shapes;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const double expected = i == j ? 2.0 * m.ratios[i] * modes.omega[i] : 0.0;
                CHECK(std::abs(modal(i, j) - expected) <=
                      1e-8 * 2.0 * m.ratios[i] * modes.omega[i] + 1e-10);
            }
        }
    }
    SUBCASE("too-close anchors are rejected") {
        CHECK_THROWS_AS(rayleigh_damping({10.0, 10.05}, 0.02, 0.03, 0, 1), IllConditioned);
    }
}

TEST_CASE("white noise forces: mean, RMS, channel independence") {
    RandomStream rng(77);
    const double rms = 1000.0;
    const Tensor f = white_noise_forces(2, 0.005, 60.0, rms, rng);
    REQUIRE(f.cols() == 12001);
    const std::size_t P = f.cols();
    for (std::size_t c = 0; c < 2; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < P; ++i) {
            sum += f(c, i);
            sq += f(c, i) * f(c, i);
        }
        const double mean = sum / P;
        CHECK(std::abs(mean) < 5.0 * rms / std::sqrt(static_cast<double>(P)));
        CHECK(std::sqrt(sq / P) == doctest::Approx(rms).epsilon(0.03));
    }
    double dot = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
        dot += f(0, i) * f(1, i);
        s0 += f(0, i) * f(0, i);
        s1 += f(1, i) * f(1, i);
    }
    CHECK(std::abs(dot / std::sqrt(s0 * s1)) < 0.05);
}

TEST_CASE("newmark: zero force stays at rest") {
    auto [sys, dofs] = assemble(single_bar(2.0, 210e9, 0.5, 8015.0));
    const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(1, 101);
    const NewmarkResult r = newmark_integrate(sys, f, 0.005, Eigen::VectorXd::Zero(1),
                                              Eigen::VectorXd::Zero(1));
    CHECK(r.displacement.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(r.acceleration.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("newmark: undamped SDOF matches cos(2 pi t) within 1%") {
    SystemMatrices sys;
    sys.stiffness = Eigen::MatrixXd::Constant(1, 1, 4.0 * kPi * kPi);
    sys.mass = Eigen::MatrixXd::Identity(1, 1);
    const double dt = 0.005;
    const int steps = static_cast<int>(std::lround(10.0 / dt));
    const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(1, steps + 1);
    Eigen::VectorXd x0(1), v0(1);
    x0 << 1.0;
    v0 << 0.0;
    const NewmarkResult r = newmark_integrate(sys, f, dt, x0, v0);
    double max_err = 0.0;
    for (int s = 0; s <= steps; ++s) {
        max_err = std::max(max_err, std::abs(r.displacement(0, s) - std::cos(2.0 * kPi * s * dt)));
    }
    CHECK(max_err < 0.01);
}

TEST_CASE("newmark: damped SDOF log decrement recovers zeta within 5%") {
    const double zeta = 0.05, omega = 2.0 * kPi;
    SystemMatrices sys;
    sys.stiffness = Eigen::MatrixXd::Constant(1, 1, omega * omega);
    sys.mass = Eigen::MatrixXd::Identity(1, 1);
    sys.damping = Eigen::MatrixXd::Constant(1, 1, 2.0 * zeta * omega);
    const double dt = 0.005;
    const int steps = static_cast<int>(std::lround(10.0 / dt));
    Eigen::VectorXd x0(1), v0(1);
    x0 << 1.0;
    v0 << 0.0;
    const NewmarkResult r =
        newmark_integrate(sys, Eigen::MatrixXd::Zero(1, steps + 1), dt, x0, v0);

    std::vector<double> peaks;
    for (int s = 1; s + 1 <= steps; ++s) {
        if (r.displacement(0, s) > r.displacement(0, s - 1) &&
            r.displacement(0, s) >= r.displacement(0, s + 1)) {
            peaks.push_back(r.displacement(0, s));
        }
    }
    REQUIRE(peaks.size() >= 4);
    const double delta = std::log(peaks[0] / peaks[3]) / 3.0;
    const double zeta_est = delta / std::sqrt(4.0 * kPi * kPi + delta * delta);
    CHECK(zeta_est == doctest::Approx(zeta).epsilon(0.05));
}

TEST_CASE("newmark: second-order convergence in dt") {
    SystemMatrices sys;
    sys.stiffness = Eigen::MatrixXd::Constant(1, 1, 4.0 * kPi * kPi);
    sys.mass = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd x0(1), v0(1);
    x0 << 1.0;
    v0 << 0.0;
    auto max_error = [&](double dt) {
        const int steps = static_cast<int>(std::lround(5.0 / dt));
        const NewmarkResult r =
            newmark_integrate(sys, Eigen::MatrixXd::Zero(1, steps + 1), dt, x0, v0);
        double err = 0.0;
        for (int s = 0; s <= steps; ++s) {
            err = std::max(err, std::abs(r.displacement(0, s) - std::cos(2.0 * kPi * s * dt)));
        }
        return err;
    };
    const double ratio = max_error(0.01) / max_error(0.005);
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("newmark: energy drift below 0.1% over 60 s with no damping") {
    const TrussStructure truss = random_truss(21, 14);
    auto [sys, dofs] = assemble(truss);
    const int n = dofs.free_count;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(n);
    v0(0) = 0.01;  // initial impulse equivalent
    const double dt = 0.005;
    const int steps = static_cast<int>(std::lround(60.0 / dt));
    const NewmarkResult r =
        newmark_integrate(sys, Eigen::MatrixXd::Zero(n, steps + 1), dt, Eigen::VectorXd::Zero(n),
                          v0);
    auto energy = [&](int s) {
        const Eigen::VectorXd x = r.displacement.col(s);
        const Eigen::VectorXd v = r.velocity.col(s);
        return 0.5 * v.dot(sys.mass * v) + 0.5 * x.dot(sys.stiffness * x);
    };
    const double e0 = energy(0);
    double drift = 0.0;
    for (int s = 1; s <= steps; s += 50) drift = std::max(drift, std::abs(energy(s) - e0) / e0);
    CHECK(drift < 1e-3);
}

TEST_CASE("modal targets: normalization contract and population sweep") {
    PopulationConfig cfg;
    cfg.count = 60;
    cfg.seed = 31;
    const auto population = generate_population(cfg);
    for (const auto& truss : population) {
        const ModalSolution sol = modal_targets(truss, 4, 0.01, 0.03);
        REQUIRE(sol.modes == 4);
        for (int j = 0; j < 4; ++j) {
            double peak = 0.0;
            for (std::size_t i = 0; i < sol.shapes.rows(); ++i) {
                peak = std::max(peak, sol.shapes(i, static_cast<std::size_t>(j)));
            }
            CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(sol.frequencies[j] > 0.0);
            if (j > 0) CHECK(sol.frequencies[j] >= sol.frequencies[j - 1]);
            // default population keeps the first four modes below Nyquist
            CHECK(sol.frequencies[j] < 100.0);
        }
    }
}

TEST_CASE("modal targets: permutation of node ordering permutes shapes, keeps frequencies") {
    const TrussStructure truss = random_truss(5, 14);
    const int n = truss.node_count();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RandomStream rng(55);
    rng.shuffle(perm);  // perm[old] = new index

    TrussStructure permuted;
    permuted.nodes.resize(n);
    permuted.supports.resize(n);
    for (int i = 0; i < n; ++i) {
        permuted.nodes[perm[i]] = truss.nodes[i];
        permuted.supports[perm[i]] = truss.supports[i];
    }
    for (const auto& [a, b] : truss.edges) {
        permuted.edges.emplace_back(std::min(perm[a], perm[b]), std::max(perm[a], perm[b]));
    }
    permuted.youngs_modulus = truss.youngs_modulus;
    permuted.area = truss.area;
    permuted.density = truss.density;
    for (int idx : truss.bottom_nodes) permuted.bottom_nodes.push_back(perm[idx]);
    for (int idx : truss.left_nodes) permuted.left_nodes.push_back(perm[idx]);
    for (int idx : truss.excited_nodes) permuted.excited_nodes.push_back(perm[idx]);

    const ModalSolution base = modal_targets(truss, 4, 0.012, 0.028);
    const ModalSolution shuffled = modal_targets(permuted, 4, 0.012, 0.028);
    for (int j = 0; j < 4; ++j) {
        CHECK(shuffled.frequencies[j] ==
              doctest::Approx(base.frequencies[j]).epsilon(1e-9));
        for (int i = 0; i < n; ++i) {
            CHECK(shuffled.shapes(static_cast<std::size_t>(perm[i]), static_cast<std::size_t>(j)) ==
                  doctest::Approx(base.shapes(static_cast<std::size_t>(i),
                                              static_cast<std::size_t>(j)))
                      .epsilon(1e-6));
        }
    }
}

TEST_SUITE_END();
