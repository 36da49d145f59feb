#pragma once

// Independent reference implementations used to check the production code.
// These deliberately avoid the code paths they verify: the DFT is the O(n^2)
// sum, the generalized eigensolver is a hand-rolled Cholesky + cyclic Jacobi,
// and the feature-propagation oracle solves the harmonic system directly.

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "oma/tensor.hpp"

namespace oracles {

/// Direct O(n^2) DFT of a real signal.
std::vector<std::complex<double>> dft(const std::vector<double>& x);

/// Eigenvalues of K v = lambda M v, ascending. Plain-vector matrices; no
/// linear-algebra library involved.
std::vector<double> generalized_eigenvalues(const std::vector<std::vector<double>>& K,
                                            const std::vector<std::vector<double>>& M);

/// Damped SDOF free response x(t) for mass m, stiffness k, damping ratio zeta.
double sdof_displacement(double m, double k, double zeta, double x0, double v0, double t);

/// Fixed point of the feature-propagation iteration via a dense linear solve
/// of the harmonic interpolation (unknown rows of X = S X restricted to the
/// unknown block). Assumes every component has a known node.
oma::Tensor harmonic_interpolation(int node_count,
                                   const std::vector<std::pair<int, int>>& edges,
                                   const oma::Tensor& features, const std::vector<bool>& known);

}  // namespace oracles
