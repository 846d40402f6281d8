#include "displab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace displab {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::geometry: return "geometry";
        case ErrorKind::topology: return "topology";
        case ErrorKind::input: return "input";
        case ErrorKind::coefficient: return "coefficient";
        case ErrorKind::compatibility: return "compatibility";
        case ErrorKind::solver: return "solver";
        case ErrorKind::drift: return "drift";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Bowyer-Watson Delaunay triangulation.
//
// The point sets fed to this are benign (staggered lattice + circle + square
// edges, all pairwise separated by ~h/2), so a straightforward incremental
// insertion with a cached circumcircle per triangle is adequate and fully
// deterministic.  Ties in the in-circle predicate are broken toward "outside",
// which keeps the cavity star-shaped; any resulting non-Delaunay sliver is
// still a valid triangulation and downstream topology checks would flag real
// damage.
// ---------------------------------------------------------------------------

struct CircumCircle {
    double cx, cy, r2;
};

struct BwTriangle {
    int a, b, c;
    CircumCircle cc;
    bool alive = true;
};

CircumCircle circumcircle(const Vec2& p, const Vec2& q, const Vec2& r) {
    const double ax = p.x(), ay = p.y();
    const double bx = q.x() - ax, by = q.y() - ay;
    const double cx = r.x() - ax, cy = r.y() - ay;
    const double d = 2.0 * (bx * cy - by * cx);
    if (std::abs(d) < 1e-30) fail(ErrorKind::topology, "degenerate triangle in Delaunay fill");
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    const double ux = (cy * b2 - by * c2) / d;
    const double uy = (bx * c2 - cx * b2) / d;
    return {ax + ux, ay + uy, ux * ux + uy * uy};
}

std::vector<std::array<int, 3>> delaunay(const std::vector<Vec2>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) fail(ErrorKind::geometry, "need at least 3 points to triangulate");

    std::vector<Vec2> all = pts;
    all.emplace_back(-40.0, -10.0);
    all.emplace_back(41.0, -10.0);
    all.emplace_back(0.5, 60.0);

    std::vector<BwTriangle> tris;
    tris.push_back({n, n + 1, n + 2, circumcircle(all[n], all[n + 1], all[n + 2])});

    std::vector<int> bad;
    std::map<std::pair<int, int>, int> edge_use;  // cavity boundary bookkeeping
    for (int ip = 0; ip < n; ++ip) {
        const Vec2& p = all[ip];
        bad.clear();
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (!tris[t].alive) continue;
            const double dx = p.x() - tris[t].cc.cx;
            const double dy = p.y() - tris[t].cc.cy;
            if (dx * dx + dy * dy < tris[t].cc.r2 * (1.0 - 1e-12)) bad.push_back(t);
        }
        if (bad.empty()) fail(ErrorKind::topology, "point fell outside the Delaunay cavity");

        edge_use.clear();
        auto touch = [&edge_use](int u, int v) {
            auto key = std::minmax(u, v);
            edge_use[{key.first, key.second}] += 1;
        };
        for (int t : bad) {
            touch(tris[t].a, tris[t].b);
            touch(tris[t].b, tris[t].c);
            touch(tris[t].c, tris[t].a);
            tris[t].alive = false;
        }
        // Cavity boundary edges (used once) fan out to the new point.  Their
        // orientation is recovered from the dead triangles so the new
        // triangles inherit a consistent orientation.
        for (int t : bad) {
            const std::array<std::array<int, 2>, 3> edges = {{{tris[t].a, tris[t].b},
                                                              {tris[t].b, tris[t].c},
                                                              {tris[t].c, tris[t].a}}};
            for (const auto& e : edges) {
                auto key = std::minmax(e[0], e[1]);
                if (edge_use[{key.first, key.second}] == 1) {
                    tris.push_back({e[0], e[1], ip, circumcircle(all[e[0]], all[e[1]], all[ip])});
                }
            }
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches the super-triangle
        out.push_back({t.a, t.b, t.c});
    }
    return out;
}

int64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<int64_t>(a) << 32) | static_cast<uint32_t>(b);
}

// Every axis-aligned lattice square is exactly cocircular, so both of its
// diagonals are valid Delaunay choices and incremental insertion picks one
// arbitrarily.  Normalize the choice with a rule that commutes with the
// dihedral symmetries of a centered obstacle: take the diagonal better
// aligned with the direction from the obstacle center to the square center
// ("/" on the exact tie).  This makes the bulk of the triangulation exactly
// symmetric whenever the geometry is.
void resolve_lattice_diagonals(std::vector<std::array<int, 3>>& tris,
                               const std::vector<Vec2>& nodes, double dx, const Vec2& center,
                               bool radial) {
    std::unordered_map<int64_t, std::array<int, 2>> edge_tris;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int e = 0; e < 3; ++e) {
            const int64_t key = edge_key(tris[t][e], tris[t][(e + 1) % 3]);
            auto it = edge_tris.find(key);
            if (it == edge_tris.end()) edge_tris[key] = {t, -1};
            else it->second[1] = t;
        }
    }

    const double tol = 1e-9 * dx;
    std::vector<int64_t> keys;
    keys.reserve(edge_tris.size());
    for (const auto& [key, pair] : edge_tris)
        if (pair[1] >= 0) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    for (const int64_t key : keys) {
        const auto pair = edge_tris[key];
        const int ta = pair[0], tb = pair[1];
        // Earlier flips may have rewritten ta/tb; both must still carry this
        // edge for the pair to be a live quad.
        const int ea = static_cast<int>(key >> 32);
        const int eb = static_cast<int>(key & 0xffffffff);
        auto has = [&](int t, int v) {
            return tris[t][0] == v || tris[t][1] == v || tris[t][2] == v;
        };
        if (!has(ta, ea) || !has(ta, eb) || !has(tb, ea) || !has(tb, eb)) continue;
        // Gather the four distinct vertices of the two triangles.
        std::array<int, 4> quad{};
        int nq = 0;
        auto push = [&](int v) {
            for (int i = 0; i < nq; ++i)
                if (quad[i] == v) return;
            if (nq < 4) quad[nq] = v;
            ++nq;
        };
        for (int v : tris[ta]) push(v);
        for (int v : tris[tb]) push(v);
        if (nq != 4) continue;

        // Identify an axis-aligned square of side dx.
        double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
        for (int i = 0; i < 4; ++i) {
            xmin = std::min(xmin, nodes[quad[i]].x());
            xmax = std::max(xmax, nodes[quad[i]].x());
            ymin = std::min(ymin, nodes[quad[i]].y());
            ymax = std::max(ymax, nodes[quad[i]].y());
        }
        if (std::abs(xmax - xmin - dx) > tol || std::abs(ymax - ymin - dx) > tol) continue;
        int bl = -1, br = -1, tr = -1, tl = -1;
        for (int i = 0; i < 4; ++i) {
            const Vec2& p = nodes[quad[i]];
            const bool lx = std::abs(p.x() - xmin) < tol, hx = std::abs(p.x() - xmax) < tol;
            const bool ly = std::abs(p.y() - ymin) < tol, hy = std::abs(p.y() - ymax) < tol;
            if (lx && ly) bl = quad[i];
            else if (hx && ly) br = quad[i];
            else if (hx && hy) tr = quad[i];
            else if (lx && hy) tl = quad[i];
        }
        if (bl < 0 || br < 0 || tr < 0 || tl < 0) continue;

        // Current shared edge must be one of the diagonals.
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffff);
        const bool is_main = (a == std::min(bl, tr) && b == std::max(bl, tr));
        const bool is_anti = (a == std::min(br, tl) && b == std::max(br, tl));
        if (!is_main && !is_anti) continue;

        // Around an obstacle the radial rule keeps the pattern equivariant
        // under the dihedral group; without one a single uniform diagonal
        // direction preserves the nodal superconvergence of the lattice.
        bool want_main = false;
        if (radial) {
            const Vec2 sq_center(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
            const Vec2 rho = sq_center - center;
            want_main = std::abs(rho.x() + rho.y()) > std::abs(rho.x() - rho.y());
        }
        if (want_main == is_main) continue;

        if (want_main) {
            tris[ta] = {bl, br, tr};
            tris[tb] = {bl, tr, tl};
        } else {
            tris[ta] = {br, tr, tl};
            tris[tb] = {br, tl, bl};
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Mesh construction
// ---------------------------------------------------------------------------

CellMesh build_cell_mesh(CellGeometry& geometry, double h) {
    if (!(h > 0.0)) fail(ErrorKind::geometry, "mesh spacing must be positive");
    const double r = geometry.obstacle_radius;
    const Vec2 c = geometry.obstacle_center;
    if (r < 0.0) fail(ErrorKind::geometry, "obstacle radius must be non-negative");
    if (r > 0.0 && h > 0.5 * r + 1e-12)
        fail(ErrorKind::geometry, "mesh spacing h=" + std::to_string(h) +
                                      " too coarse to resolve obstacle radius " + std::to_string(r));

    const int n = std::max(2, static_cast<int>(std::llround(1.0 / h)));
    const double dx = 1.0 / n;

    if (r > 0.0) {
        const double off = std::max(std::abs(c.x() - 0.5), std::abs(c.y() - 0.5));
        const double margin = std::max(2.0 * dx, 0.02);
        if (r + off > 0.5 - margin)
            fail(ErrorKind::geometry,
                 "obstacle touches the cell boundary within tolerance margin: radius " +
                     std::to_string(r) + " + offset " + std::to_string(off) + " > " +
                     std::to_string(0.5 - margin));
    }

    CellMesh mesh;
    mesh.h = dx;
    auto& nodes = mesh.nodes;

    // Outer boundary: uniform, bitwise-identical coordinates on opposite
    // edges so periodic pairing is exact.
    std::vector<int> bottom(n + 1), top(n + 1), left(n + 1), right(n + 1);
    for (int i = 0; i <= n; ++i) {
        bottom[i] = static_cast<int>(nodes.size());
        nodes.emplace_back(i * dx, 0.0);
    }
    for (int i = 0; i <= n; ++i) {
        top[i] = static_cast<int>(nodes.size());
        nodes.emplace_back(i * dx, 1.0);
    }
    left[0] = bottom[0];
    left[n] = top[0];
    right[0] = bottom[n];
    right[n] = top[n];
    for (int j = 1; j < n; ++j) {
        left[j] = static_cast<int>(nodes.size());
        nodes.emplace_back(0.0, j * dx);
    }
    for (int j = 1; j < n; ++j) {
        right[j] = static_cast<int>(nodes.size());
        nodes.emplace_back(1.0, j * dx);
    }

    for (int j = 0; j <= n; ++j) mesh.periodic_pairs.push_back({left[j], right[j]});
    for (int i = 0; i <= n; ++i) mesh.periodic_pairs.push_back({bottom[i], top[i]});

    // Plain interior lattice, kept clear of the obstacle by a band wide
    // enough that every circle chord stays locally Delaunay.  A plain lattice
    // (not a staggered one) keeps the point set invariant under the dihedral
    // symmetries of a centered obstacle, which the dispersion tensor's
    // discrete symmetry checks rely on.
    const double band = 0.7 * dx;
    for (int j = 1; j < n; ++j) {
        const double y = j * dx;
        for (int i = 1; i < n; ++i) {
            const double x = i * dx;
            if (r > 0.0 && (Vec2(x, y) - c).norm() < r + band) continue;
            nodes.emplace_back(x, y);
        }
    }

    // Obstacle nodes: exactly on the circle, uniform angles.  A multiple of
    // four keeps the node set invariant under quarter-turns and both mirror
    // families when the obstacle is centered.
    int m = 0;
    int first_circle = static_cast<int>(nodes.size());
    if (r > 0.0) {
        m = std::max(8, 4 * static_cast<int>(std::llround(kPi * r / (2.0 * dx))));
        for (int k = 0; k < m; ++k) {
            const double th = 2.0 * kPi * k / m;
            nodes.emplace_back(c.x() + r * std::cos(th), c.y() + r * std::sin(th));
        }
    }

    // Triangulate, normalize the tie diagonals, then carve out the obstacle.
    auto raw = delaunay(nodes);
    resolve_lattice_diagonals(raw, nodes, dx, c, r > 0.0);
    for (const auto& tri : raw) {
        const Vec2 ctr = (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
        if (r > 0.0 && (ctr - c).norm() < r) continue;
        mesh.triangles.push_back(tri);
    }
    for (auto& tri : mesh.triangles) {
        const Vec2 e1 = nodes[tri[1]] - nodes[tri[0]];
        const Vec2 e2 = nodes[tri[2]] - nodes[tri[0]];
        if (e1.x() * e2.y() - e1.y() * e2.x() < 0.0) std::swap(tri[1], tri[2]);
    }

    // Recover the obstacle boundary loop from edges used by exactly one kept
    // triangle whose endpoints are circle nodes.
    if (r > 0.0) {
        auto is_circle_node = [&](int v) { return v >= first_circle && v < first_circle + m; };
        std::unordered_map<int64_t, int> use;
        for (const auto& tri : mesh.triangles)
            for (int e = 0; e < 3; ++e) use[edge_key(tri[e], tri[(e + 1) % 3])] += 1;

        std::vector<std::vector<int>> adjacency(m);
        int loop_edges = 0;
        for (const auto& [key, count] : use) {
            if (count != 1) continue;
            const int a = static_cast<int>(key >> 32);
            const int b = static_cast<int>(key & 0xffffffff);
            const bool ca = is_circle_node(a), cb = is_circle_node(b);
            if (ca && cb) {
                adjacency[a - first_circle].push_back(b - first_circle);
                adjacency[b - first_circle].push_back(a - first_circle);
                ++loop_edges;
            } else {
                const Vec2& pa = nodes[a];
                const Vec2& pb = nodes[b];
                auto on_square = [](const Vec2& p) {
                    return p.x() < 1e-12 || p.x() > 1.0 - 1e-12 || p.y() < 1e-12 ||
                           p.y() > 1.0 - 1e-12;
                };
                if (!(on_square(pa) && on_square(pb)))
                    fail(ErrorKind::topology, "stray boundary edge off the obstacle circle");
            }
        }
        if (loop_edges != m)
            fail(ErrorKind::topology, "obstacle boundary has " + std::to_string(loop_edges) +
                                          " edges for " + std::to_string(m) + " circle nodes");
        for (int k = 0; k < m; ++k)
            if (adjacency[k].size() != 2)
                fail(ErrorKind::topology, "circle node with boundary degree != 2");

        std::vector<int> loop;
        loop.reserve(m);
        int prev = -1, cur = 0;
        for (int step = 0; step < m; ++step) {
            loop.push_back(first_circle + cur);
            const int nxt = (adjacency[cur][0] == prev) ? adjacency[cur][1] : adjacency[cur][0];
            prev = cur;
            cur = nxt;
        }
        if (cur != 0) fail(ErrorKind::topology, "obstacle boundary is not a single closed loop");

        double twice_area = 0.0;
        for (int k = 0; k < m; ++k) {
            const Vec2 p = nodes[loop[k]] - c;
            const Vec2 q = nodes[loop[(k + 1) % m]] - c;
            twice_area += p.x() * q.y() - p.y() * q.x();
        }
        if (twice_area < 0.0) std::reverse(loop.begin() + 1, loop.end());
        mesh.boundary_loop = std::move(loop);
    }

    validate_mesh(mesh, geometry);

    auto [area, length] = measure(mesh);
    geometry.fluid_area = area;
    geometry.surface_length = length;
    geometry.eta = (area > 0.0) ? length / area : 0.0;
    return mesh;
}

SurfaceMesh extract_surface_mesh(const CellMesh& mesh, const CellGeometry& geometry) {
    SurfaceMesh surf;
    const int m = static_cast<int>(mesh.boundary_loop.size());
    if (m == 0) return surf;
    surf.nodes = mesh.boundary_loop;
    surf.lengths.resize(m);
    surf.tangents.resize(m);
    surf.normals.resize(m);
    for (int k = 0; k < m; ++k) {
        const Vec2& a = mesh.nodes[surf.nodes[k]];
        const Vec2& b = mesh.nodes[surf.nodes[(k + 1) % m]];
        const Vec2 d = b - a;
        const double len = d.norm();
        if (len < 1e-14) fail(ErrorKind::topology, "zero-length obstacle boundary segment");
        surf.lengths[k] = len;
        surf.tangents[k] = d / len;
        // Exterior normal of the fluid region points into the obstacle.
        Vec2 nrm(-surf.tangents[k].y(), surf.tangents[k].x());
        const Vec2 mid = 0.5 * (a + b);
        if (nrm.dot(geometry.obstacle_center - mid) < 0.0) nrm = -nrm;
        surf.normals[k] = nrm;
        surf.total_length += len;
    }
    return surf;
}

std::pair<double, double> measure(const CellMesh& mesh) {
    double area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) area += mesh.triangle_area(t);
    double length = 0.0;
    const int m = static_cast<int>(mesh.boundary_loop.size());
    for (int k = 0; k < m; ++k) {
        const Vec2& a = mesh.nodes[mesh.boundary_loop[k]];
        const Vec2& b = mesh.nodes[mesh.boundary_loop[(k + 1) % m]];
        length += (b - a).norm();
    }
    return {area, length};
}

void validate_mesh(const CellMesh& mesh, const CellGeometry& geometry) {
    const int nv = mesh.num_nodes();
    const int nt = mesh.num_triangles();
    if (nv < 3 || nt < 1) fail(ErrorKind::topology, "mesh is empty");

    std::vector<char> referenced(nv, 0);
    for (const auto& tri : mesh.triangles) {
        for (int v : tri) {
            if (v < 0 || v >= nv) fail(ErrorKind::topology, "triangle references missing node");
            referenced[v] = 1;
        }
    }
    for (int v = 0; v < nv; ++v)
        if (!referenced[v]) fail(ErrorKind::topology, "orphan node " + std::to_string(v));

    for (int t = 0; t < nt; ++t)
        if (mesh.triangle_area(t) < 1e-16)
            fail(ErrorKind::topology, "degenerate or inverted triangle " + std::to_string(t));

    const double r = geometry.obstacle_radius;
    const Vec2 c = geometry.obstacle_center;
    if (r > 0.0) {
        for (int v = 0; v < nv; ++v)
            if ((mesh.nodes[v] - c).norm() < r - 1e-9)
                fail(ErrorKind::topology, "node strictly inside the obstacle");
        const int m = static_cast<int>(mesh.boundary_loop.size());
        if (m < 3) fail(ErrorKind::topology, "obstacle boundary loop missing");
        for (int k = 0; k < m; ++k) {
            const int v = mesh.boundary_loop[k];
            if (v < 0 || v >= nv) fail(ErrorKind::topology, "boundary loop references missing node");
            if (std::abs((mesh.nodes[v] - c).norm() - r) > 1e-9)
                fail(ErrorKind::topology, "boundary loop node off the obstacle circle");
        }
        double twice_area = 0.0;
        for (int k = 0; k < m; ++k) {
            const Vec2 p = mesh.nodes[mesh.boundary_loop[k]] - c;
            const Vec2 q = mesh.nodes[mesh.boundary_loop[(k + 1) % m]] - c;
            twice_area += p.x() * q.y() - p.y() * q.x();
        }
        if (twice_area <= 0.0)
            fail(ErrorKind::topology, "boundary loop is not counter-clockwise around the obstacle");
    } else if (!mesh.boundary_loop.empty()) {
        fail(ErrorKind::topology, "boundary loop present without an obstacle");
    }

    // Periodic pairing: bijection with equal tangential coordinate.
    for (const auto& pr : mesh.periodic_pairs) {
        const int a = pr[0], b = pr[1];
        if (a < 0 || a >= nv || b < 0 || b >= nv)
            fail(ErrorKind::topology, "periodic pair references missing node");
        const Vec2& pa = mesh.nodes[a];
        const Vec2& pb = mesh.nodes[b];
        const bool horizontal = std::abs(pa.x()) < 1e-12 && std::abs(pb.x() - 1.0) < 1e-12 &&
                                std::abs(pa.y() - pb.y()) < 1e-12;
        const bool vertical = std::abs(pa.y()) < 1e-12 && std::abs(pb.y() - 1.0) < 1e-12 &&
                              std::abs(pa.x() - pb.x()) < 1e-12;
        if (!horizontal && !vertical)
            fail(ErrorKind::topology, "periodic pair does not match opposite edges");
    }
    // Every outer-edge node must appear in the pairing, each side once per direction.
    int on_left = 0, on_right = 0, on_bottom = 0, on_top = 0;
    for (int v = 0; v < nv; ++v) {
        const Vec2& p = mesh.nodes[v];
        if (std::abs(p.x()) < 1e-12) ++on_left;
        if (std::abs(p.x() - 1.0) < 1e-12) ++on_right;
        if (std::abs(p.y()) < 1e-12) ++on_bottom;
        if (std::abs(p.y() - 1.0) < 1e-12) ++on_top;
    }
    if (on_left != on_right || on_bottom != on_top)
        fail(ErrorKind::topology, "outer-edge node counts do not match across the cell");
    int horizontal_pairs = 0, vertical_pairs = 0;
    for (const auto& pr : mesh.periodic_pairs) {
        const Vec2& pa = mesh.nodes[pr[0]];
        const Vec2& pb = mesh.nodes[pr[1]];
        if (std::abs(pa.x()) < 1e-12 && std::abs(pb.x() - 1.0) < 1e-12) ++horizontal_pairs;
        else ++vertical_pairs;
    }
    if (horizontal_pairs != on_left || vertical_pairs != on_bottom)
        fail(ErrorKind::topology, "periodic pairing is not a bijection of outer-edge nodes");

    // Euler characteristic: 0 for the perforated cell (annulus), 1 otherwise.
    std::unordered_map<int64_t, int> edges;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) edges[edge_key(tri[e], tri[(e + 1) % 3])] += 1;
    for (const auto& [key, count] : edges) {
        (void)key;
        if (count > 2) fail(ErrorKind::topology, "edge shared by more than two triangles");
    }
    const long euler = static_cast<long>(nv) - static_cast<long>(edges.size()) + nt;
    const long expected = (r > 0.0) ? 0 : 1;
    if (euler != expected)
        fail(ErrorKind::topology, "Euler characteristic " + std::to_string(euler) +
                                      ", expected " + std::to_string(expected));
}

// ---------------------------------------------------------------------------
// Plain-text serialization
// ---------------------------------------------------------------------------

namespace {
void write_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}
}  // namespace

void write_mesh(std::ostream& out, const CellMesh& mesh, const CellGeometry& geometry) {
    out << "displab-mesh 1\n";
    out << "h ";
    write_double(out, mesh.h);
    out << "\nobstacle ";
    write_double(out, geometry.obstacle_center.x());
    out << ' ';
    write_double(out, geometry.obstacle_center.y());
    out << ' ';
    write_double(out, geometry.obstacle_radius);
    out << "\nnodes " << mesh.num_nodes() << "\n";
    for (const auto& p : mesh.nodes) {
        write_double(out, p.x());
        out << ' ';
        write_double(out, p.y());
        out << '\n';
    }
    out << "triangles " << mesh.num_triangles() << "\n";
    for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "boundary " << mesh.boundary_loop.size() << "\n";
    for (int v : mesh.boundary_loop) out << v << '\n';
    out << "periodic " << mesh.periodic_pairs.size() << "\n";
    for (const auto& p : mesh.periodic_pairs) out << p[0] << ' ' << p[1] << '\n';
}

void write_mesh_file(const std::string& path, const CellMesh& mesh, const CellGeometry& geometry) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::input, "cannot open mesh file for writing: " + path);
    write_mesh(out, mesh, geometry);
    if (!out) fail(ErrorKind::input, "failed writing mesh file: " + path);
}

std::pair<CellMesh, CellGeometry> read_mesh(std::istream& in) {
    auto expect = [&in](const std::string& tag) {
        std::string tok;
        if (!(in >> tok) || tok != tag)
            fail(ErrorKind::input, "mesh file: expected '" + tag + "', got '" + tok + "'");
    };
    expect("displab-mesh");
    int version = 0;
    if (!(in >> version) || version != 1)
        fail(ErrorKind::input, "mesh file: unsupported version");

    CellMesh mesh;
    CellGeometry geom;
    expect("h");
    if (!(in >> mesh.h) || !(mesh.h > 0.0)) fail(ErrorKind::input, "mesh file: bad spacing");
    expect("obstacle");
    double cx, cy, r;
    if (!(in >> cx >> cy >> r)) fail(ErrorKind::input, "mesh file: bad obstacle record");
    geom.obstacle_center = Vec2(cx, cy);
    geom.obstacle_radius = r;

    expect("nodes");
    int nv = 0;
    if (!(in >> nv) || nv < 3) fail(ErrorKind::input, "mesh file: bad node count");
    mesh.nodes.resize(nv);
    for (auto& p : mesh.nodes) {
        double x, y;
        if (!(in >> x >> y)) fail(ErrorKind::input, "mesh file: truncated node table");
        p = Vec2(x, y);
    }
    expect("triangles");
    int nt = 0;
    if (!(in >> nt) || nt < 1) fail(ErrorKind::input, "mesh file: bad triangle count");
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles)
        if (!(in >> t[0] >> t[1] >> t[2]))
            fail(ErrorKind::input, "mesh file: truncated triangle table");
    expect("boundary");
    int nb = 0;
    if (!(in >> nb) || nb < 0) fail(ErrorKind::input, "mesh file: bad boundary count");
    mesh.boundary_loop.resize(nb);
    for (auto& v : mesh.boundary_loop)
        if (!(in >> v)) fail(ErrorKind::input, "mesh file: truncated boundary table");
    expect("periodic");
    int np = 0;
    if (!(in >> np) || np < 0) fail(ErrorKind::input, "mesh file: bad periodic count");
    mesh.periodic_pairs.resize(np);
    for (auto& p : mesh.periodic_pairs)
        if (!(in >> p[0] >> p[1])) fail(ErrorKind::input, "mesh file: truncated periodic table");

    validate_mesh(mesh, geom);
    auto [area, length] = measure(mesh);
    geom.fluid_area = area;
    geom.surface_length = length;
    geom.eta = (area > 0.0) ? length / area : 0.0;
    return {std::move(mesh), geom};
}

std::pair<CellMesh, CellGeometry> read_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::input, "cannot open mesh file: " + path);
    return read_mesh(in);
}

}  // namespace displab
