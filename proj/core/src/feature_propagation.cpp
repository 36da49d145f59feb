#include "oma/feature_propagation.hpp"

#include <cmath>

#include "oma/errors.hpp"

namespace oma {

FeaturePropagationResult feature_propagation(int node_count,
                                             const std::vector<std::pair<int, int>>& edges,
                                             const Tensor& features,
                                             const std::vector<bool>& known, int max_iters,
                                             double tol) {
    const auto n = static_cast<std::size_t>(node_count);
    if (features.rows() != n || known.size() != n) {
        throw ShapeMismatch("feature/known sizes must match node count");
    }
    bool any_known = false;
    for (bool k : known) any_known = any_known || k;
    if (!any_known) throw NoKnownNodes("feature propagation needs at least one known node");

    // connected components; ones without a known node get zero rows
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::vector<int> component(n, -1);
    int components = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (component[start] >= 0) continue;
        std::vector<int> stack{static_cast<int>(start)};
        component[start] = components;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int u : adj[static_cast<std::size_t>(v)]) {
                if (component[static_cast<std::size_t>(u)] < 0) {
                    component[static_cast<std::size_t>(u)] = components;
                    stack.push_back(u);
                }
            }
        }
        ++components;
    }
    std::vector<bool> component_has_known(static_cast<std::size_t>(components), false);
    for (std::size_t i = 0; i < n; ++i) {
        if (known[i]) component_has_known[static_cast<std::size_t>(component[i])] = true;
    }

    FeaturePropagationResult result;
    result.features = features;
    for (std::size_t i = 0; i < n; ++i) {
        if (!component_has_known[static_cast<std::size_t>(component[i])]) {
            result.zeroed_nodes.push_back(static_cast<int>(i));
            for (std::size_t m = 0; m < result.features.cols(); ++m) result.features(i, m) = 0.0;
        } else if (!known[i]) {
            // unknown rows start from zero, the diffusion fills them in
            for (std::size_t m = 0; m < result.features.cols(); ++m) result.features(i, m) = 0.0;
        }
    }

    std::vector<double> inv_sqrt_degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!adj[i].empty()) inv_sqrt_degree[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size()));
    }

    const std::size_t width = features.cols();
    Tensor next(n, width);
    for (int iter = 0; iter < max_iters; ++iter) {
        next.fill(0.0);
        for (const auto& [a, b] : edges) {
            const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
            const double w = inv_sqrt_degree[ua] * inv_sqrt_degree[ub];
            const double* ra = result.features.data() + ua * width;
            const double* rb = result.features.data() + ub * width;
            double* na = next.data() + ua * width;
            double* nb = next.data() + ub * width;
            for (std::size_t m = 0; m < width; ++m) {
                na[m] += w * rb[m];
                nb[m] += w * ra[m];
            }
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool keep = known[i] || !component_has_known[static_cast<std::size_t>(component[i])];
            double* dst = result.features.data() + i * width;
            const double* src = next.data() + i * width;
            if (keep) continue;
            for (std::size_t m = 0; m < width; ++m) {
                delta = std::max(delta, std::abs(src[m] - dst[m]));
                dst[m] = src[m];
            }
        }
        result.iterations = iter + 1;
        result.last_delta = delta;
        if (delta < tol) break;
    }
    return result;
}

}  // namespace oma
