#include "oma/truss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "oma/errors.hpp"
#include "oma/parallel.hpp"

namespace oma {

const char* to_string(SupportKind kind) {
    return kind == SupportKind::SimplySupported ? "simply_supported" : "cantilevered";
}

SupportKind support_kind_from_string(const std::string& s) {
    if (s == "simply_supported") return SupportKind::SimplySupported;
    if (s == "cantilevered") return SupportKind::Cantilevered;
    throw ConfigError("unknown support kind: " + s);
}

double BoundarySpec::perimeter() const {
    const double run = 0.5 * (bottom_span - top_span);
    const double slant = std::hypot(run, height);
    return bottom_span + top_span + 2.0 * slant;
}

bool BoundarySpec::contains(double x, double y, double tol) const {
    if (y < -tol || y > height + tol) return false;
    const double half_width = 0.5 * (bottom_span + (top_span - bottom_span) * (y / height));
    return std::abs(x) <= half_width + tol;
}

void BoundarySpec::validate() const {
    if (!(bottom_span > 0.0 && top_span > 0.0 && height > 0.0)) {
        throw ConfigError("boundary dimensions must be positive");
    }
    if (!(bottom_span > top_span)) {
        throw ConfigError("bottom span must exceed top span");
    }
}

double TrussStructure::edge_length(int e) const {
    const auto& [a, b] = edges[e];
    return std::hypot(nodes[b][0] - nodes[a][0], nodes[b][1] - nodes[a][1]);
}

int TrussStructure::constrained_dof_count() const {
    int n = 0;
    for (const auto& s : supports) n += (s.fix_x ? 1 : 0) + (s.fix_y ? 1 : 0);
    return n;
}

bool TrussStructure::connected() const {
    if (nodes.empty()) return false;
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> seen(nodes.size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int u : adj[v]) {
            if (!seen[u]) {
                seen[u] = true;
                ++visited;
                stack.push_back(u);
            }
        }
    }
    return visited == nodes.size();
}

void TrussStructure::validate(const BoundarySpec* boundary) const {
    if (nodes.size() < 3) throw Error("truss needs at least 3 nodes");
    if (supports.size() != nodes.size()) throw Error("support flags must cover every node");
    std::set<std::pair<int, int>> seen;
    for (int e = 0; e < edge_count(); ++e) {
        const auto& [a, b] = edges[e];
        if (a < 0 || b < 0 || a >= node_count() || b >= node_count() || a == b) {
            throw Error("edge endpoints out of range");
        }
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
            throw Error("duplicate edge");
        }
        if (edge_length(e) <= 1e-12) throw Error("zero-length edge");
    }
    if (!connected()) throw Error("truss graph is not connected");
    if (constrained_dof_count() < 3) throw Error("fewer than 3 constrained DOFs");
    if (youngs_modulus.size() != edges.size() || area.size() != edges.size() ||
        density.size() != edges.size()) {
        throw Error("per-edge material arrays must cover every edge");
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!(youngs_modulus[e] > 0.0 && area[e] > 0.0 && density[e] > 0.0)) {
            throw Error("material values must be strictly positive");
        }
        if (youngs_modulus[e] < 100e9 - 1e-3 || youngs_modulus[e] > 300e9 + 1e-3) {
            throw Error("Young's modulus outside the 100-300 GPa population range");
        }
    }
    if (boundary != nullptr) {
        for (const auto& p : nodes) {
            if (!boundary->contains(p[0], p[1], 1e-6)) {
                throw Error("node outside boundary");
            }
        }
    }
}

void PopulationConfig::validate() const {
    if (count < 1) throw ConfigError("population count must be >= 1");
    if (node_count_range.first < 4 || node_count_range.first > node_count_range.second) {
        throw ConfigError("node count range invalid (need 4 <= min <= max)");
    }
    auto check = [](std::pair<double, double> r, const char* what) {
        if (!(r.first > 0.0) || r.first > r.second) {
            throw ConfigError(std::string("invalid range for ") + what);
        }
    };
    check(boundary.bottom_span, "bottom_span");
    check(boundary.height, "height");
    check(boundary.top_ratio, "top_ratio");
    if (boundary.top_ratio.second >= 1.0) throw ConfigError("top_ratio must stay below 1");
    check(youngs_range, "youngs_modulus");
}

// ---------------------------------------------------------------------------
// Bowyer-Watson Delaunay triangulation
// ---------------------------------------------------------------------------

namespace {

using Point = std::array<double, 2>;

double orient2d(const Point& a, const Point& b, const Point& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

// Strict-interior circumcircle test; cocircular points count as outside so a
// degenerate quad keeps whichever diagonal was created first.
bool in_circumcircle(const Point& a, const Point& b, const Point& c, const Point& p) {
    Point aa = a, bb = b, cc = c;
    if (orient2d(aa, bb, cc) < 0.0) std::swap(bb, cc);
    const double ax = aa[0] - p[0], ay = aa[1] - p[1];
    const double bx = bb[0] - p[0], by = bb[1] - p[1];
    const double cx = cc[0] - p[0], cy = cc[1] - p[1];
    const double a2 = ax * ax + ay * ay;
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    const double det = ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
    const double m = std::max({std::abs(ax), std::abs(ay), std::abs(bx), std::abs(by),
                               std::abs(cx), std::abs(cy)});
    return det > 1e-12 * m * m * m * m;
}

std::vector<std::array<int, 3>> delaunay(const std::vector<Point>& input) {
    const int n = static_cast<int>(input.size());
    if (n < 3) return {};
    std::vector<Point> pts = input;
    double lo_x = pts[0][0], hi_x = lo_x, lo_y = pts[0][1], hi_y = lo_y;
    for (const auto& p : pts) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
    }
    const double cx = 0.5 * (lo_x + hi_x);
    const double cy = 0.5 * (lo_y + hi_y);
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1.0});
    pts.push_back({cx - 64.0 * span, cy - 32.0 * span});
    pts.push_back({cx + 64.0 * span, cy - 32.0 * span});
    pts.push_back({cx, cy + 64.0 * span});

    std::vector<std::array<int, 3>> tris{{n, n + 1, n + 2}};
    for (int ip = 0; ip < n; ++ip) {
        const Point& p = pts[ip];
        std::vector<std::array<int, 3>> bad;
        std::vector<std::array<int, 3>> keep;
        for (const auto& t : tris) {
            if (in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], p)) {
                bad.push_back(t);
            } else {
                keep.push_back(t);
            }
        }
        // cavity boundary = edges used by exactly one bad triangle
        std::map<std::pair<int, int>, int> edge_count;
        for (const auto& t : bad) {
            for (int k = 0; k < 3; ++k) {
                const int u = t[k], v = t[(k + 1) % 3];
                ++edge_count[{std::min(u, v), std::max(u, v)}];
            }
        }
        tris = std::move(keep);
        for (const auto& [edge, count] : edge_count) {
            if (count != 1) continue;
            std::array<int, 3> nt{edge.first, edge.second, ip};
            if (std::abs(orient2d(pts[nt[0]], pts[nt[1]], pts[nt[2]])) < 1e-14) continue;
            tris.push_back(nt);
        }
    }
    std::vector<std::array<int, 3>> result;
    for (const auto& t : tris) {
        if (t[0] < n && t[1] < n && t[2] < n) {
            std::array<int, 3> s = t;
            std::sort(s.begin(), s.end());
            result.push_back(s);
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double wx = p[0] - a[0], wy = p[1] - a[1];
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p[0] - (a[0] + t * vx), p[1] - (a[1] + t * vy));
}

struct MeshPoints {
    std::vector<Point> pts;
    std::vector<int> bottom;  // includes both bottom corners
    std::vector<int> left;    // includes bottom-left and top-left corners
};

MeshPoints sample_mesh_points(const BoundarySpec& boundary, int target, RandomStream& rng) {
    MeshPoints m;
    const double b = boundary.bottom_span;
    const double t = boundary.top_span;
    const double h = boundary.height;
    const Point bl{-0.5 * b, 0.0}, br{0.5 * b, 0.0}, tr{0.5 * t, h}, tl{-0.5 * t, h};
    m.pts = {bl, br, tr, tl};
    m.bottom = {0, 1};
    m.left = {0, 3};

    const double area = boundary.area();
    const double perim = boundary.perimeter();
    // spacing l solving  area/l^2 + perim/l + 4 = target
    double spacing = 0.0;
    if (target > 4) {
        const double u =
            (-perim + std::sqrt(perim * perim + 4.0 * area * (target - 4))) / (2.0 * area);
        spacing = u > 0.0 ? 1.0 / u : 0.0;
    }

    auto subdivide = [&](const Point& p0, const Point& p1, std::vector<int>* tag) {
        if (spacing <= 0.0) return;
        const double len = std::hypot(p1[0] - p0[0], p1[1] - p0[1]);
        const int segments = std::max(1, static_cast<int>(std::lround(len / spacing)));
        for (int i = 1; i < segments; ++i) {
            const double jitter = rng.uniform(-0.2, 0.2) / segments;
            const double s = static_cast<double>(i) / segments + jitter;
            m.pts.push_back({p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])});
            if (tag) tag->push_back(static_cast<int>(m.pts.size()) - 1);
        }
    };
    subdivide(bl, br, &m.bottom);
    subdivide(br, tr, nullptr);
    subdivide(tl, tr, nullptr);
    subdivide(bl, tl, &m.left);

    const int interior_budget = target - static_cast<int>(m.pts.size());
    if (interior_budget > 0) {
        const double radius = 0.5 * std::sqrt(area / target);
        const std::array<std::pair<Point, Point>, 4> sides{
            std::pair{bl, br}, {br, tr}, {tl, tr}, {bl, tl}};
        int placed = 0;
        int attempts = 0;
        const int max_attempts = 400 * interior_budget;
        while (placed < interior_budget && attempts < max_attempts) {
            ++attempts;
            const Point p{rng.uniform(-0.5 * b, 0.5 * b), rng.uniform(0.0, h)};
            if (!boundary.contains(p[0], p[1])) continue;
            bool ok = true;
            for (const auto& q : m.pts) {
                if (std::hypot(p[0] - q[0], p[1] - q[1]) < radius) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                for (const auto& [s0, s1] : sides) {
                    if (point_segment_distance(p, s0, s1) < radius) {
                        ok = false;
                        break;
                    }
                }
            }
            if (ok) {
                m.pts.push_back(p);
                ++placed;
            }
        }
    }
    return m;
}

}  // namespace

TrussStructure mesh_truss(const BoundarySpec& boundary, int target_nodes, RandomStream& rng) {
    boundary.validate();
    if (target_nodes < 4) throw ConfigError("target_nodes must be at least 4");

    constexpr int kRetries = 10;
    for (int attempt = 0; attempt < kRetries; ++attempt) {
        MeshPoints m = sample_mesh_points(boundary, target_nodes, rng);
        const int n = static_cast<int>(m.pts.size());
        if (std::abs(n - target_nodes) > 0.2 * target_nodes + 1e-9) continue;

        auto tris = delaunay(m.pts);
        if (tris.empty()) continue;

        TrussStructure truss;
        truss.nodes = std::move(m.pts);
        truss.bottom_nodes = std::move(m.bottom);
        truss.left_nodes = std::move(m.left);
        truss.triangles = std::move(tris);
        std::set<std::pair<int, int>> edge_set;
        for (const auto& t : truss.triangles) {
            edge_set.insert({t[0], t[1]});
            edge_set.insert({t[1], t[2]});
            edge_set.insert({t[0], t[2]});
        }
        truss.edges.assign(edge_set.begin(), edge_set.end());
        truss.supports.assign(truss.nodes.size(), {});
        if (!truss.connected()) continue;
        return truss;
    }
    throw DegenerateMesh("mesh generation failed after retries (degenerate or off-target)");
}

TrussStructure assign_materials(TrussStructure truss, std::pair<double, double> youngs_range,
                                RandomStream& rng) {
    if (!(youngs_range.first > 0.0) || youngs_range.first > youngs_range.second) {
        throw ConfigError("Young's modulus range must be positive and ordered");
    }
    const std::size_t ne = truss.edges.size();
    truss.density.assign(ne, 8015.0);
    truss.area.assign(ne, 0.5);
    truss.youngs_modulus.resize(ne);
    for (auto& e : truss.youngs_modulus) {
        e = rng.uniform(youngs_range.first, youngs_range.second);
    }
    return truss;
}

TrussStructure apply_supports(TrussStructure truss, SupportKind kind) {
    truss.supports.assign(truss.nodes.size(), {});
    if (kind == SupportKind::SimplySupported) {
        if (truss.bottom_nodes.empty()) {
            throw NoSupportableNodes("no bottom-boundary nodes to support");
        }
        int pin = truss.bottom_nodes.front();
        int roller = pin;
        for (int idx : truss.bottom_nodes) {
            if (truss.nodes[idx][0] < truss.nodes[pin][0]) pin = idx;
            if (truss.nodes[idx][0] > truss.nodes[roller][0]) roller = idx;
        }
        if (pin == roller) throw NoSupportableNodes("bottom boundary has a single node");
        truss.supports[pin] = {true, true};
        truss.supports[roller] = {false, true};
    } else {
        if (truss.left_nodes.empty()) {
            throw NoSupportableNodes("no left-boundary nodes to fix");
        }
        for (int idx : truss.left_nodes) truss.supports[idx] = {true, true};
    }
    truss.excited_nodes.clear();
    for (int idx : truss.bottom_nodes) {
        const auto& s = truss.supports[idx];
        if (!s.fix_x && !s.fix_y) truss.excited_nodes.push_back(idx);
    }
    std::sort(truss.excited_nodes.begin(), truss.excited_nodes.end());
    return truss;
}

TrussStructure generate_structure(const PopulationConfig& config, int index, std::uint64_t salt) {
    config.validate();
    RandomStream rng(derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(index)),
                                 salt));
    const auto [n_lo, n_hi] = config.node_count_range;
    const int target = n_lo + static_cast<int>(rng.index(static_cast<std::size_t>(n_hi - n_lo + 1)));
    BoundarySpec boundary;
    boundary.bottom_span = rng.uniform(config.boundary.bottom_span.first,
                                       config.boundary.bottom_span.second);
    boundary.height = rng.uniform(config.boundary.height.first, config.boundary.height.second);
    boundary.top_span =
        boundary.bottom_span *
        rng.uniform(config.boundary.top_ratio.first, config.boundary.top_ratio.second);
    boundary.kind = config.kind;

    TrussStructure truss = mesh_truss(boundary, target, rng);
    truss = assign_materials(std::move(truss), config.youngs_range, rng);
    truss = apply_supports(std::move(truss), config.kind);
    truss.validate(&boundary);
    return truss;
}

std::vector<TrussStructure> generate_population(const PopulationConfig& config) {
    config.validate();
    std::vector<TrussStructure> population(config.count);
    parallel_for(static_cast<std::size_t>(config.count), [&](std::size_t i) {
        try {
            population[i] = generate_structure(config, static_cast<int>(i));
        } catch (const DegenerateMesh& e) {
            throw DegenerateMesh("structure " + std::to_string(i) + ": " + e.what());
        }
    });
    return population;
}

}  // namespace oma
