#include "oma/fem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "oma/errors.hpp"

namespace oma {

std::pair<SystemMatrices, DofMap> assemble(const TrussStructure& truss) {
    const int n = truss.node_count();
    DofMap dofs;
    dofs.x_dof.assign(n, -1);
    dofs.y_dof.assign(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (!truss.supports[i].fix_x) {
            dofs.x_dof[i] = next++;
        } else {
            dofs.constrained.push_back(2 * i);
        }
        if (!truss.supports[i].fix_y) {
            dofs.y_dof[i] = next++;
        } else {
            dofs.constrained.push_back(2 * i + 1);
        }
    }
    dofs.free_count = next;
    if (next == 0) throw SingularSystem("all DOFs constrained");

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(next, next);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(next, next);
    for (int e = 0; e < truss.edge_count(); ++e) {
        const auto& [a, b] = truss.edges[e];
        const double dx = truss.nodes[b][0] - truss.nodes[a][0];
        const double dy = truss.nodes[b][1] - truss.nodes[a][1];
        const double length = std::hypot(dx, dy);
        const double c = dx / length;
        const double s = dy / length;
        const double ea_l = truss.youngs_modulus[e] * truss.area[e] / length;
        const double m6 = truss.density[e] * truss.area[e] * length / 6.0;

        // global element stiffness: EA/L * [T, -T; -T, T], T = [cc cs; cs ss]
        Eigen::Matrix4d ke;
        const double cc = c * c, cs = c * s, ss = s * s;
        ke << cc, cs, -cc, -cs,
              cs, ss, -cs, -ss,
              -cc, -cs, cc, cs,
              -cs, -ss, cs, ss;
        ke *= ea_l;
        // consistent mass is rotation-invariant: rho A L / 6 * [2I, I; I, 2I]
        Eigen::Matrix4d me = Eigen::Matrix4d::Zero();
        me(0, 0) = me(1, 1) = me(2, 2) = me(3, 3) = 2.0 * m6;
        me(0, 2) = me(2, 0) = me(1, 3) = me(3, 1) = m6;

        const int map[4] = {dofs.x_dof[a], dofs.y_dof[a], dofs.x_dof[b], dofs.y_dof[b]};
        for (int r = 0; r < 4; ++r) {
            if (map[r] < 0) continue;
            for (int col = 0; col < 4; ++col) {
                if (map[col] < 0) continue;
                K(map[r], map[col]) += ke(r, col);
                M(map[r], map[col]) += me(r, col);
            }
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("stiffness matrix is not positive definite after support elimination");
    }
    SystemMatrices sys;
    sys.stiffness = std::move(K);
    sys.mass = std::move(M);
    return {std::move(sys), std::move(dofs)};
}

EigenModes solve_modes(const Eigen::MatrixXd& stiffness, const Eigen::MatrixXd& mass, int k) {
    const auto n = stiffness.rows();
    if (n != stiffness.cols() || n != mass.rows() || n != mass.cols()) {
        throw ShapeMismatch("K and M must be square and of equal size");
    }
    if (k < 1 || k > n) throw ConfigError("mode count out of range");
    Eigen::LLT<Eigen::MatrixXd> mass_llt(mass);
    if (mass_llt.info() != Eigen::Success) {
        throw SingularSystem("mass matrix is not positive definite");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(stiffness, mass,
                                                                     Eigen::ComputeEigenvectors |
                                                                         Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success) {
        throw SingularSystem("generalized eigensolver failed");
    }
    EigenModes modes;
    modes.omega.resize(k);
    modes.shapes = solver.eigenvectors().leftCols(k);
    for (int j = 0; j < k; ++j) {
        const double lambda = solver.eigenvalues()(j);
        if (!(lambda > 0.0)) throw SingularSystem("non-positive eigenvalue (rigid-body mode?)");
        modes.omega[j] = std::sqrt(lambda);
    }
    return modes;
}

RayleighModel rayleigh_damping(const std::vector<double>& omega, double zeta_a, double zeta_b,
                               std::size_t anchor_a, std::size_t anchor_b) {
    if (omega.empty()) throw ConfigError("no modal frequencies given");
    anchor_b = std::min(anchor_b, omega.size() - 1);
    anchor_a = std::min(anchor_a, anchor_b);
    const double wa = omega[anchor_a];
    const double wb = omega[anchor_b];
    if (!(zeta_a > 0.0 && zeta_a < 0.2 && zeta_b > 0.0 && zeta_b < 0.2)) {
        throw ConfigError("damping anchors must lie in (0, 0.2)");
    }
    if (anchor_a == anchor_b || wb / wa < 1.01) {
        throw IllConditioned("anchor frequencies too close for Rayleigh calibration");
    }
    // solve [1/wa, wa; 1/wb, wb] [alpha; beta] = [2 zeta_a; 2 zeta_b]
    const double det = wb / wa - wa / wb;
    RayleighModel model;
    model.alpha = (2.0 * zeta_a * wb - 2.0 * zeta_b * wa) / det;
    model.beta = (2.0 * zeta_b / wa - 2.0 * zeta_a / wb) / det;
    model.ratios.resize(omega.size());
    for (std::size_t j = 0; j < omega.size(); ++j) {
        model.ratios[j] = 0.5 * (model.alpha / omega[j] + model.beta * omega[j]);
    }
    return model;
}

Tensor white_noise_forces(int excited_count, double dt, double duration, double amplitude_rms,
                          RandomStream& rng) {
    if (!(duration > 0.0) || !(dt > 0.0)) throw ConfigError("duration and dt must be positive");
    if (!(amplitude_rms > 0.0)) throw ConfigError("amplitude_rms must be positive");
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    Tensor forces(static_cast<std::size_t>(excited_count), steps + 1);
    for (auto& f : forces.buffer()) f = rng.normal(0.0, amplitude_rms);
    return forces;
}

NewmarkResult newmark_integrate(const SystemMatrices& sys, const Eigen::MatrixXd& force,
                                double dt, const Eigen::VectorXd& x0, const Eigen::VectorXd& v0) {
    const auto n = sys.stiffness.rows();
    if (force.rows() != n) throw ShapeMismatch("force rows must match free DOF count");
    const auto cols = force.cols();
    if (cols < 1) throw ConfigError("force history is empty");
    const Eigen::MatrixXd& K = sys.stiffness;
    const Eigen::MatrixXd& M = sys.mass;
    Eigen::MatrixXd C = sys.damping;
    if (C.size() == 0) C = Eigen::MatrixXd::Zero(n, n);

    constexpr double gamma = 0.5;
    constexpr double beta = 0.25;
    const Eigen::MatrixXd effective = M + gamma * dt * C + beta * dt * dt * K;
    Eigen::LLT<Eigen::MatrixXd> eff_llt(effective);
    if (eff_llt.info() != Eigen::Success) {
        throw SingularSystem("effective Newmark matrix factorization failed");
    }
    Eigen::LLT<Eigen::MatrixXd> mass_llt(M);
    if (mass_llt.info() != Eigen::Success) {
        throw SingularSystem("mass matrix factorization failed");
    }

    NewmarkResult out;
    out.displacement.resize(n, cols);
    out.velocity.resize(n, cols);
    out.acceleration.resize(n, cols);
    Eigen::VectorXd x = x0, v = v0;
    Eigen::VectorXd a = mass_llt.solve(force.col(0) - C * v - K * x);
    out.displacement.col(0) = x;
    out.velocity.col(0) = v;
    out.acceleration.col(0) = a;
    for (Eigen::Index step = 1; step < cols; ++step) {
        const Eigen::VectorXd x_pred = x + dt * v + (0.5 - beta) * dt * dt * a;
        const Eigen::VectorXd v_pred = v + (1.0 - gamma) * dt * a;
        const Eigen::VectorXd rhs = force.col(step) - C * v_pred - K * x_pred;
        a = eff_llt.solve(rhs);
        x = x_pred + beta * dt * dt * a;
        v = v_pred + gamma * dt * a;
        out.displacement.col(step) = x;
        out.velocity.col(step) = v;
        out.acceleration.col(step) = a;
    }
    return out;
}

TimeHistory simulate_newmark(const SystemMatrices& sys, const DofMap& dofs,
                             const TrussStructure& truss, const Tensor& excited_forces,
                             double dt, double duration) {
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    if (excited_forces.rows() != truss.excited_nodes.size()) {
        throw ShapeMismatch("force rows must match excited node count");
    }
    if (excited_forces.cols() < steps + 1) {
        throw ShapeMismatch("force history shorter than requested duration");
    }
    const int n = dofs.free_count;
    Eigen::MatrixXd force = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(steps + 1));
    for (std::size_t r = 0; r < truss.excited_nodes.size(); ++r) {
        const int dof = dofs.y_dof[truss.excited_nodes[r]];
        if (dof < 0) continue;  // vertical forcing of a fixed DOF does nothing
        for (std::size_t s = 0; s <= steps; ++s) {
            force(dof, static_cast<Eigen::Index>(s)) = excited_forces(r, s);
        }
    }
    const NewmarkResult result = newmark_integrate(sys, force, dt, Eigen::VectorXd::Zero(n),
                                                   Eigen::VectorXd::Zero(n));
    TimeHistory history;
    history.dt = dt;
    history.channels = Tensor(static_cast<std::size_t>(truss.node_count()), steps);
    for (int node = 0; node < truss.node_count(); ++node) {
        const int dof = dofs.y_dof[node];
        if (dof < 0) continue;  // constrained vertical DOF: zero row
        for (std::size_t s = 0; s < steps; ++s) {
            history.channels(static_cast<std::size_t>(node), s) =
                result.acceleration(dof, static_cast<Eigen::Index>(s + 1));
        }
    }
    return history;
}

ModalSolution modal_targets(const TrussStructure& truss, int k, double zeta_a, double zeta_b) {
    if (k < 1) throw ConfigError("mode count must be >= 1");
    auto [sys, dofs] = assemble(truss);
    // solve up to 4 modes even for k < 4 so the Rayleigh anchors stay apart
    const int solve_count = std::min<int>(static_cast<int>(sys.stiffness.rows()), std::max(k, 4));
    const EigenModes modes = solve_modes(sys.stiffness, sys.mass, solve_count);
    const RayleighModel rayleigh = rayleigh_damping(
        modes.omega, zeta_a, zeta_b, 0, std::min<std::size_t>(3, solve_count - 1));
    ModalSolution sol;
    sol.modes = k;
    sol.frequencies.resize(k);
    sol.damping_ratios.assign(rayleigh.ratios.begin(), rayleigh.ratios.begin() + k);
    sol.shapes = Tensor(static_cast<std::size_t>(truss.node_count()), static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        sol.frequencies[j] = modes.omega[j] / (2.0 * 3.14159265358979323846);
        double peak = 0.0;
        for (int node = 0; node < truss.node_count(); ++node) {
            const int dof = dofs.y_dof[node];
            const double value = dof >= 0 ? std::abs(modes.shapes(dof, j)) : 0.0;
            sol.shapes(static_cast<std::size_t>(node), static_cast<std::size_t>(j)) = value;
            peak = std::max(peak, value);
        }
        if (peak <= 0.0) throw SingularSystem("mode has no vertical participation");
        for (int node = 0; node < truss.node_count(); ++node) {
            sol.shapes(static_cast<std::size_t>(node), static_cast<std::size_t>(j)) /= peak;
        }
    }
    return sol;
}

}  // namespace oma
