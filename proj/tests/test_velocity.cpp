#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "displab/errors.hpp"
#include "displab/velocity.hpp"

using namespace displab;

namespace {

struct CellData {
    CellGeometry geom;
    CellMesh mesh;
    SurfaceMesh surf;
};

CellData make_cell(double h, double radius = 0.2) {
    CellData d;
    d.geom.obstacle_radius = radius;
    d.mesh = build_cell_mesh(d.geom, h);
    d.surf = extract_surface_mesh(d.mesh, d.geom);
    return d;
}

/// Map from an undirected edge to the triangles containing it.
std::map<std::pair<int, int>, std::vector<int>> edge_triangles(const CellMesh& mesh) {
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int k = 0; k < 3; ++k) {
            int a = tri[static_cast<std::size_t>(k)];
            int b = tri[static_cast<std::size_t>((k + 1) % 3)];
            if (a > b) std::swap(a, b);
            edges[{a, b}].push_back(t);
        }
    }
    return edges;
}

}  // namespace

TEST_CASE("stream velocity: unit norm, zero mean, matching surface drift") {
    const CellData d = make_cell(1.0 / 32.0);
    for (const VelocityRecipe recipe :
         {VelocityRecipe::symmetric, VelocityRecipe::nonsymmetric}) {
        CAPTURE(to_string(recipe));
        const VelocityField field = build_velocity(recipe, d.mesh, d.surf, 0.3);

        double norm_sq = 0.0;
        for (int t = 0; t < d.mesh.num_triangles(); ++t)
            norm_sq += d.mesh.triangle_area(t) *
                       field.bulk[static_cast<std::size_t>(t)].squaredNorm();
        CHECK(std::abs(norm_sq - 1.0) < 1e-13);
        CHECK(field.l2_norm == 1.0);

        // The periodic stream traces cancel over opposite cell faces and the
        // obstacle trace is pinned to zero, so the mean is exact.
        CHECK(field.bulk_mean.norm() < 1e-12);
        // Chord tangents telescope around the closed loop.
        CHECK(field.surface_mean.norm() < 1e-13);
        CHECK(field.drift.norm() < 1e-12);
    }
}

TEST_CASE("stream velocity does not penetrate the obstacle") {
    const CellData d = make_cell(1.0 / 32.0);
    const VelocityField field = build_velocity(VelocityRecipe::symmetric, d.mesh, d.surf);

    // Obstacle edges carry two pinned stream values, hence zero normal flux.
    std::map<std::pair<int, int>, int> on_loop;
    const int m = d.surf.num_nodes();
    for (int s = 0; s < m; ++s) {
        int a = d.surf.nodes[static_cast<std::size_t>(s)];
        int b = d.surf.nodes[static_cast<std::size_t>((s + 1) % m)];
        if (a > b) std::swap(a, b);
        on_loop[{a, b}] = s;
    }
    int checked = 0;
    const auto edges = edge_triangles(d.mesh);
    for (const auto& [key, tris] : edges) {
        const auto hit = on_loop.find(key);
        if (hit == on_loop.end()) continue;
        REQUIRE(tris.size() == 1);
        const Vec2 edge = d.mesh.nodes[static_cast<std::size_t>(key.second)] -
                          d.mesh.nodes[static_cast<std::size_t>(key.first)];
        const Vec2 normal(edge.y(), -edge.x());
        CHECK(std::abs(field.bulk[static_cast<std::size_t>(tris[0])].dot(normal)) /
                  edge.norm() <
              1e-13);
        ++checked;
    }
    CHECK(checked == d.surf.num_segments());
}

TEST_CASE("stream velocity has continuous normal flux across interior edges") {
    const CellData d = make_cell(1.0 / 16.0);
    const VelocityField field = build_velocity(VelocityRecipe::nonsymmetric, d.mesh, d.surf);

    double worst = 0.0;
    for (const auto& [key, tris] : edge_triangles(d.mesh)) {
        if (tris.size() != 2) continue;
        const Vec2 edge = d.mesh.nodes[static_cast<std::size_t>(key.second)] -
                          d.mesh.nodes[static_cast<std::size_t>(key.first)];
        const Vec2 normal = Vec2(edge.y(), -edge.x()).normalized();
        const double jump = (field.bulk[static_cast<std::size_t>(tris[0])] -
                             field.bulk[static_cast<std::size_t>(tris[1])])
                                .dot(normal);
        worst = std::max(worst, std::abs(jump));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("velocity recipes produce distinct fields") {
    const CellData d = make_cell(1.0 / 16.0);
    const VelocityField sym = build_velocity(VelocityRecipe::symmetric, d.mesh, d.surf);
    const VelocityField nsym = build_velocity(VelocityRecipe::nonsymmetric, d.mesh, d.surf);
    double diff_sq = 0.0;
    for (int t = 0; t < d.mesh.num_triangles(); ++t)
        diff_sq += d.mesh.triangle_area(t) *
                   (sym.bulk[static_cast<std::size_t>(t)] -
                    nsym.bulk[static_cast<std::size_t>(t)])
                       .squaredNorm();
    CHECK(std::sqrt(diff_sq) > 0.01);

    const VelocityField none = build_velocity(VelocityRecipe::none, d.mesh, d.surf);
    for (const Vec2& b : none.bulk) CHECK(b.norm() == 0.0);
    CHECK(none.drift.norm() == 0.0);
}

TEST_CASE("stream recipe on the unperforated cell is rejected") {
    const CellData d = make_cell(1.0 / 16.0, 0.0);
    CHECK_THROWS_AS(build_velocity(VelocityRecipe::symmetric, d.mesh, d.surf), Error);
    try {
        build_velocity(VelocityRecipe::symmetric, d.mesh, d.surf);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::compatibility);
    }
    // Zero velocity needs no stream function and stays valid.
    const VelocityField none = build_velocity(VelocityRecipe::none, d.mesh, d.surf);
    CHECK(none.bulk_mean.norm() == 0.0);
}

TEST_CASE("velocity export is deterministic") {
    const CellData d = make_cell(1.0 / 16.0);
    std::ostringstream first, second;
    write_velocity_csv(first, d.mesh, d.surf,
                       build_velocity(VelocityRecipe::nonsymmetric, d.mesh, d.surf, 0.3));
    write_velocity_csv(second, d.mesh, d.surf,
                       build_velocity(VelocityRecipe::nonsymmetric, d.mesh, d.surf, 0.3));
    CHECK(first.str() == second.str());
    CHECK(first.str().substr(0, 20) == "kind,index,x,y,b1,b2");
}
