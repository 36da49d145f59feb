#pragma once

#include <utility>
#include <vector>

#include "oma/tensor.hpp"

namespace oma {

struct FeaturePropagationResult {
    Tensor features;
    int iterations = 0;
    double last_delta = 0.0;
    /// Nodes in components without any known node; their rows were zeroed.
    std::vector<int> zeroed_nodes;
};

/// Dirichlet-style interpolation of missing node features: iterate
/// X <- D^{-1/2} A D^{-1/2} X, resetting known rows to their originals, until
/// the max-abs change drops below tol or max_iters is reached. Known rows are
/// preserved exactly.
FeaturePropagationResult feature_propagation(int node_count,
                                             const std::vector<std::pair<int, int>>& edges,
                                             const Tensor& features,
                                             const std::vector<bool>& known, int max_iters = 40,
                                             double tol = 1e-6);

}  // namespace oma
