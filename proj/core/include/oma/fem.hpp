#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "oma/rng.hpp"
#include "oma/tensor.hpp"
#include "oma/truss.hpp"

namespace oma {

/// Global DOF numbering after support elimination: free DOFs get indices
/// 0..n_free-1, constrained DOFs carry -1.
struct DofMap {
    std::vector<int> x_dof;  // per node; -1 when fixed
    std::vector<int> y_dof;
    int free_count = 0;
    std::vector<int> constrained;  // full-ordering indices (2*node + axis)

    int node_count() const { return static_cast<int>(x_dof.size()); }
};

struct SystemMatrices {
    Eigen::MatrixXd stiffness;  // n_f x n_f, N/m
    Eigen::MatrixXd mass;       // n_f x n_f, kg
    Eigen::MatrixXd damping;    // n_f x n_f, N s/m; empty until Rayleigh applied
};

/// Modal targets: frequencies in Hz ascending, Rayleigh damping ratios, and
/// per-node vertical mode-shape magnitudes with each column scaled to max 1.
struct ModalSolution {
    std::vector<double> frequencies;     // Hz
    std::vector<double> damping_ratios;  // fraction of critical
    Tensor shapes;                       // N x k, |vertical component|, column max = 1
    int modes = 0;

    bool operator==(const ModalSolution&) const = default;
};

/// Vertical nodal acceleration histories, one row per node, dt-spaced samples.
struct TimeHistory {
    double dt = 0.005;
    Tensor channels;  // N x P, m/s^2

    int channel_count() const { return static_cast<int>(channels.rows()); }
    int sample_count() const { return static_cast<int>(channels.cols()); }
};

/// Axial truss elements: EA/L stiffness and rho*A*L/6 * [[2,1],[1,2]]
/// consistent mass per direction, rotated to global axes, summed and reduced
/// by deleting constrained rows/columns.
std::pair<SystemMatrices, DofMap> assemble(const TrussStructure& truss);

struct EigenModes {
    std::vector<double> omega;  // rad/s ascending
    Eigen::MatrixXd shapes;     // n_f x k, mass-normalized (phi^T M phi = I)
};

/// Smallest k of K phi = omega^2 M phi via Cholesky reduction to a standard
/// symmetric problem.
EigenModes solve_modes(const Eigen::MatrixXd& stiffness, const Eigen::MatrixXd& mass, int k);

struct RayleighModel {
    double alpha = 0.0;  // mass coefficient
    double beta = 0.0;   // stiffness coefficient
    std::vector<double> ratios;  // per supplied omega: (alpha/w + beta*w)/2
};

/// Calibrates C = alpha M + beta K so the damping ratio equals zeta_a at
/// omega[anchor_a] and zeta_b at omega[anchor_b].
RayleighModel rayleigh_damping(const std::vector<double>& omega, double zeta_a, double zeta_b,
                               std::size_t anchor_a = 0, std::size_t anchor_b = 3);

/// i.i.d. zero-mean Gaussian vertical force per excited node per step,
/// standard deviation amplitude_rms. Columns span t = 0..duration inclusive.
Tensor white_noise_forces(int excited_count, double dt, double duration, double amplitude_rms,
                          RandomStream& rng);

struct NewmarkResult {
    Eigen::MatrixXd displacement;  // n_f x (steps+1), column 0 = initial state
    Eigen::MatrixXd velocity;
    Eigen::MatrixXd acceleration;
};

/// Average-acceleration Newmark (gamma = 1/2, beta = 1/4), unconditionally
/// stable. force has steps+1 columns (values at t = j*dt).
NewmarkResult newmark_integrate(const SystemMatrices& sys, const Eigen::MatrixXd& force,
                                double dt, const Eigen::VectorXd& x0, const Eigen::VectorXd& v0);

/// Full pipeline step: white-noise force rows (aligned with
/// truss.excited_nodes) to vertical nodal accelerations from rest. Constrained
/// vertical DOFs emit zero rows.
TimeHistory simulate_newmark(const SystemMatrices& sys, const DofMap& dofs,
                             const TrussStructure& truss, const Tensor& excited_forces,
                             double dt, double duration);

/// assemble -> solve_modes -> rayleigh_damping, then vertical components of
/// the shapes as magnitudes with per-mode max of exactly 1.
ModalSolution modal_targets(const TrussStructure& truss, int k, double zeta_a, double zeta_b);

}  // namespace oma
