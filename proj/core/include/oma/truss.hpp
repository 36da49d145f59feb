#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "oma/rng.hpp"

namespace oma {

enum class SupportKind { SimplySupported, Cantilevered };

const char* to_string(SupportKind kind);
SupportKind support_kind_from_string(const std::string& s);

/// Symmetric trapezoid: bottom chord on y = 0 spanning [-bottom_span/2,
/// +bottom_span/2], top chord at y = height spanning [-top_span/2, +top_span/2].
struct BoundarySpec {
    double bottom_span = 30.0;  // m
    double height = 4.5;        // m
    double top_span = 18.0;     // m
    SupportKind kind = SupportKind::SimplySupported;

    double area() const { return 0.5 * (bottom_span + top_span) * height; }
    double perimeter() const;
    bool contains(double x, double y, double tol = 1e-9) const;
    void validate() const;
};

/// Planar truss as both a structure and a graph: joints are nodes, bars are
/// edges. Per-edge material, per-node support flags.
struct TrussStructure {
    struct Support {
        bool fix_x = false;
        bool fix_y = false;
        bool operator==(const Support&) const = default;
    };

    std::vector<std::array<double, 2>> nodes;  // (x, y) in m
    std::vector<std::pair<int, int>> edges;    // unordered pairs, first < second
    std::vector<double> youngs_modulus;        // Pa, per edge
    std::vector<double> area;                  // m^2, per edge
    std::vector<double> density;               // kg/m^3, per edge
    std::vector<Support> supports;             // per node
    std::vector<int> excited_nodes;

    // boundary bookkeeping from meshing, needed by apply_supports
    std::vector<int> bottom_nodes;
    std::vector<int> left_nodes;
    std::vector<std::array<int, 3>> triangles;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int edge_count() const { return static_cast<int>(edges.size()); }
    double edge_length(int e) const;
    int constrained_dof_count() const;
    bool connected() const;

    /// Checks the structural invariants; throws Error on violation. The
    /// boundary-containment check runs only when a boundary is supplied.
    void validate(const BoundarySpec* boundary = nullptr) const;

    bool operator==(const TrussStructure&) const = default;
};

struct BoundaryRanges {
    std::pair<double, double> bottom_span{20.0, 40.0};  // m
    std::pair<double, double> height{3.0, 6.0};         // m
    std::pair<double, double> top_ratio{0.4, 0.7};      // top_span / bottom_span
};

struct PopulationConfig {
    int count = 100;
    std::pair<int, int> node_count_range{8, 40};
    BoundaryRanges boundary;
    std::pair<double, double> youngs_range{100e9, 300e9};  // Pa
    SupportKind kind = SupportKind::SimplySupported;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Delaunay triangulation (Bowyer-Watson) of the trapezoid corners, jittered
/// boundary subdivision points and min-separation-rejected interior points.
/// Node count lands within +-20% of target_nodes.
TrussStructure mesh_truss(const BoundarySpec& boundary, int target_nodes, RandomStream& rng);

/// density = 8015 kg/m^3 and area = 0.5 m^2 on every edge; E i.i.d. uniform
/// per edge from range.
TrussStructure assign_materials(TrussStructure truss, std::pair<double, double> youngs_range,
                                RandomStream& rng);

/// SimplySupported: bottom-left pin + bottom-right roller. Cantilevered: every
/// left-edge node fully fixed. Excitation set = unconstrained bottom nodes.
TrussStructure apply_supports(TrussStructure truss, SupportKind kind);

/// One reproducible structure of the population; `salt` selects an alternate
/// realization when a draw has to be rejected downstream.
TrussStructure generate_structure(const PopulationConfig& config, int index,
                                  std::uint64_t salt = 0);

std::vector<TrussStructure> generate_population(const PopulationConfig& config);

}  // namespace oma
