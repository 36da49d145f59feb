#include <doctest.h>

#include <cmath>

#include "oma/errors.hpp"
#include "oma/feature_propagation.hpp"
#include "oma/rng.hpp"
#include "support/oracles.hpp"

using namespace oma;

TEST_SUITE_BEGIN("feature_propagation");

TEST_CASE("all nodes known: output equals input, zero effective iterations") {
    const Tensor features = Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
    const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}};
    const auto result = feature_propagation(3, edges, features, {true, true, true});
    CHECK(result.features == features);
    CHECK(result.zeroed_nodes.empty());
}

TEST_CASE("two-node path: the unknown node converges to the known row") {
    const Tensor features = Tensor::from_rows({{0.7, -0.3, 1.5}, {9.0, 9.0, 9.0}});
    const std::vector<std::pair<int, int>> edges{{0, 1}};
    const auto result = feature_propagation(2, edges, features, {true, false});
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(result.features(1, c) == doctest::Approx(features(0, c)).epsilon(1e-9));
        CHECK(result.features(0, c) == features(0, c));  // known row untouched
    }
}

TEST_CASE("matches the dense harmonic-interpolation oracle on a 10-node graph") {
    RandomStream rng(5);
    const int n = 10;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    edges.emplace_back(0, 5);
    edges.emplace_back(2, 7);
    edges.emplace_back(4, 9);
    Tensor features(n, 4);
    for (auto& v : features.buffer()) v = rng.uniform(0.0, 1.0);
    std::vector<bool> known(n, false);
    known[0] = known[3] = known[8] = true;

    const auto iterative = feature_propagation(n, edges, features, known, 400, 1e-10);
    const Tensor direct = oracles::harmonic_interpolation(n, edges, features, known);
    for (int i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(iterative.features(i, c) == doctest::Approx(direct(i, c)).epsilon(1e-4));
        }
    }
}

TEST_CASE("components without known nodes are zeroed and flagged") {
    const Tensor features = Tensor::from_rows({{1.0}, {2.0}, {3.0}, {4.0}});
    const std::vector<std::pair<int, int>> edges{{0, 1}, {2, 3}};
    const auto result = feature_propagation(4, edges, features, {true, false, false, false});
    CHECK(result.zeroed_nodes == std::vector<int>{2, 3});
    CHECK(result.features(2, 0) == 0.0);
    CHECK(result.features(3, 0) == 0.0);
    CHECK(result.features(1, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("no known nodes is an error") {
    const Tensor features = Tensor::from_rows({{1.0}, {2.0}});
    CHECK_THROWS_AS(feature_propagation(2, {{0, 1}}, features, {false, false}), NoKnownNodes);
}

TEST_CASE("idempotent on complete inputs") {
    RandomStream rng(6);
    Tensor features(5, 3);
    for (auto& v : features.buffer()) v = rng.uniform(0.0, 1.0);
    const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
    const std::vector<bool> known(5, true);
    const auto once = feature_propagation(5, edges, features, known);
    const auto twice = feature_propagation(5, edges, once.features, known);
    CHECK(once.features == twice.features);
}

TEST_SUITE_END();
