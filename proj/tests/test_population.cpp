#include <doctest.h>

#include <cmath>
#include <set>

#include "oma/errors.hpp"
#include "oma/rng.hpp"
#include "oma/truss.hpp"

using namespace oma;

namespace {

// brute-force empty-circumcircle check for every triangle of a mesh
bool delaunay_property_holds(const TrussStructure& truss) {
    auto circumcircle = [&](const std::array<int, 3>& t, double& cx, double& cy, double& r2) {
        const auto& a = truss.nodes[t[0]];
        const auto& b = truss.nodes[t[1]];
        const auto& c = truss.nodes[t[2]];
        const double d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        if (std::abs(d) < 1e-12) return false;
        const double a2 = a[0] * a[0] + a[1] * a[1];
        const double b2 = b[0] * b[0] + b[1] * b[1];
        const double c2 = c[0] * c[0] + c[1] * c[1];
        cx = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
        cy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
        r2 = (a[0] - cx) * (a[0] - cx) + (a[1] - cy) * (a[1] - cy);
        return true;
    };
    for (const auto& tri : truss.triangles) {
        double cx, cy, r2;
        if (!circumcircle(tri, cx, cy, r2)) return false;
        for (int i = 0; i < truss.node_count(); ++i) {
            if (i == tri[0] || i == tri[1] || i == tri[2]) continue;
            const double dx = truss.nodes[i][0] - cx;
            const double dy = truss.nodes[i][1] - cy;
            // strict interior, with slack for the cocircular corner case
            if (dx * dx + dy * dy < r2 * (1.0 - 1e-9)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("population");

TEST_CASE("four corners only: two triangles sharing a diagonal, five edges") {
    BoundarySpec boundary{30.0, 5.0, 18.0, SupportKind::SimplySupported};
    RandomStream rng(1);
    const TrussStructure truss = mesh_truss(boundary, 4, rng);
    CHECK(truss.node_count() == 4);
    CHECK(truss.triangles.size() == 2);
    CHECK(truss.edge_count() == 5);
    CHECK(truss.connected());
    CHECK(delaunay_property_holds(truss));
}

TEST_CASE("empty circumcircle property holds on random meshes") {
    for (std::uint64_t seed : {2u, 3u, 4u, 5u}) {
        RandomStream rng(seed);
        BoundarySpec boundary{rng.uniform(20.0, 40.0), rng.uniform(3.0, 6.0), 0.0,
                              SupportKind::SimplySupported};
        boundary.top_span = 0.55 * boundary.bottom_span;
        const int target = 10 + static_cast<int>(rng.index(25));
        const TrussStructure truss = mesh_truss(boundary, target, rng);
        CHECK(delaunay_property_holds(truss));
        CHECK(std::abs(truss.node_count() - target) <= 0.2 * target + 1e-9);
        for (const auto& p : truss.nodes) CHECK(boundary.contains(p[0], p[1], 1e-6));
    }
}

TEST_CASE("meshing is deterministic under a fixed seed") {
    BoundarySpec boundary{28.0, 4.0, 16.0, SupportKind::SimplySupported};
    RandomStream rng_a(42), rng_b(42);
    const TrussStructure a = mesh_truss(boundary, 18, rng_a);
    const TrussStructure b = mesh_truss(boundary, 18, rng_b);
    CHECK(a == b);
}

TEST_CASE("assign_materials: constants, range, degenerate range, sample mean") {
    BoundarySpec boundary{25.0, 4.5, 14.0, SupportKind::SimplySupported};
    RandomStream rng(7);
    TrussStructure truss = mesh_truss(boundary, 16, rng);

    SUBCASE("values inside the requested range, constants fixed") {
        const TrussStructure t = assign_materials(truss, {100e9, 300e9}, rng);
        for (int e = 0; e < t.edge_count(); ++e) {
            CHECK(t.youngs_modulus[e] >= 100e9);
            CHECK(t.youngs_modulus[e] <= 300e9);
            CHECK(t.density[e] == 8015.0);
            CHECK(t.area[e] == 0.5);
        }
    }
    SUBCASE("degenerate range pins E exactly") {
        const TrussStructure t = assign_materials(truss, {200e9, 200e9}, rng);
        for (int e = 0; e < t.edge_count(); ++e) CHECK(t.youngs_modulus[e] == 200e9);
    }
    SUBCASE("empirical mean over 1e4 draws is within 1% of 200 GPa") {
        RandomStream sampler(123);
        double sum = 0.0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) sum += sampler.uniform(100e9, 300e9);
        CHECK(std::abs(sum / draws - 200e9) < 2e9);
    }
}

TEST_CASE("supports: simply supported pins 3 scalar DOFs, cantilever fixes the left edge") {
    BoundarySpec boundary{30.0, 5.0, 15.0, SupportKind::SimplySupported};
    RandomStream rng(9);
    TrussStructure meshed = mesh_truss(boundary, 20, rng);
    meshed = assign_materials(std::move(meshed), {100e9, 300e9}, rng);

    SUBCASE("simply supported") {
        const TrussStructure t = apply_supports(meshed, SupportKind::SimplySupported);
        CHECK(t.constrained_dof_count() == 3);
        // excitation covers every bottom node that carries no constraint
        for (int idx : t.excited_nodes) {
            CHECK_FALSE(t.supports[idx].fix_x);
            CHECK_FALSE(t.supports[idx].fix_y);
        }
        CHECK(t.excited_nodes.size() == t.bottom_nodes.size() - 2);
    }
    SUBCASE("cantilevered fixes two DOFs per left-edge node") {
        const TrussStructure t = apply_supports(meshed, SupportKind::Cantilevered);
        CHECK(t.constrained_dof_count() == 2 * static_cast<int>(t.left_nodes.size()));
        CHECK(t.left_nodes.size() >= 2);
    }
}

TEST_CASE("population: reproducible, valid, heterogeneous") {
    PopulationConfig cfg;
    cfg.count = 24;
    cfg.node_count_range = {8, 32};
    cfg.seed = 2024;

    const auto population = generate_population(cfg);
    CHECK(population.size() == 24);

    SUBCASE("same config twice is bitwise identical") {
        const auto again = generate_population(cfg);
        for (std::size_t i = 0; i < population.size(); ++i) CHECK(population[i] == again[i]);
    }
    SUBCASE("single-structure population") {
        PopulationConfig one = cfg;
        one.count = 1;
        CHECK(generate_population(one).size() == 1);
    }
    SUBCASE("every structure passes the invariants") {
        std::set<int> node_counts;
        for (const auto& t : population) {
            CHECK_NOTHROW(t.validate());
            CHECK(t.connected());
            CHECK(t.constrained_dof_count() >= 3);
            CHECK(delaunay_property_holds(t));
            node_counts.insert(t.node_count());
        }
        CHECK(node_counts.size() >= 3);  // genuinely heterogeneous population
    }
    SUBCASE("per-structure reproducibility in isolation") {
        const TrussStructure lone = generate_structure(cfg, 17);
        CHECK(lone == population[17]);
    }
}

TEST_CASE("invalid inputs are rejected") {
    BoundarySpec bad{10.0, 3.0, 12.0, SupportKind::SimplySupported};  // top wider than bottom
    RandomStream rng(1);
    CHECK_THROWS_AS(mesh_truss(bad, 10, rng), ConfigError);
    BoundarySpec ok{20.0, 3.0, 10.0, SupportKind::SimplySupported};
    CHECK_THROWS_AS(mesh_truss(ok, 3, rng), ConfigError);
    TrussStructure no_bottom;
    no_bottom.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.5, 1.0}};
    no_bottom.supports.assign(3, {});
    CHECK_THROWS_AS(apply_supports(no_bottom, SupportKind::SimplySupported), NoSupportableNodes);
}

TEST_SUITE_END();
