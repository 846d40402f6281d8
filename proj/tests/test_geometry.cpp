#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "displab/geometry.hpp"

using namespace displab;

namespace {
constexpr double kPi = std::numbers::pi;

// The kept triangles must tile the square minus the *polygon* inscribed in
// the circle, so the discrete measures have closed forms.
double polygon_area(double r, int m) { return 0.5 * m * r * r * std::sin(2.0 * kPi / m); }
double polygon_length(double r, int m) { return 2.0 * m * r * std::sin(kPi / m); }
}  // namespace

TEST_CASE("cell mesh matches the inscribed-polygon measures exactly") {
    for (double h : {1.0 / 16, 1.0 / 32}) {
        CellGeometry geom;
        const CellMesh mesh = build_cell_mesh(geom, h);
        const int m = static_cast<int>(mesh.boundary_loop.size());
        CHECK(m >= 8);
        auto [area, length] = measure(mesh);
        CHECK(area == doctest::Approx(1.0 - polygon_area(0.2, m)).epsilon(1e-12));
        CHECK(length == doctest::Approx(polygon_length(0.2, m)).epsilon(1e-12));
        CHECK(geom.fluid_area == area);
        CHECK(geom.surface_length == length);
        CHECK(geom.eta == doctest::Approx(length / area));
    }
}

TEST_CASE("discrete measures converge to the circle values at second order") {
    const double exact_area = 1.0 - kPi * 0.04;
    const double exact_len = 0.4 * kPi;
    double err_area[3], err_len[3];
    int i = 0;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        CellGeometry geom;
        const CellMesh mesh = build_cell_mesh(geom, h);
        auto [area, length] = measure(mesh);
        err_area[i] = std::abs(area - exact_area);
        err_len[i] = std::abs(length - exact_len);
        ++i;
    }
    // Finest level inside the absolute measurement tolerance.
    CHECK(err_area[2] < 1e-3);
    CHECK(err_len[2] < 1e-3);
    // Observed order from consecutive refinements.
    CHECK(std::log2(err_area[0] / err_area[1]) > 1.8);
    CHECK(std::log2(err_area[1] / err_area[2]) > 1.8);
    CHECK(std::log2(err_len[0] / err_len[1]) > 1.8);
    CHECK(std::log2(err_len[1] / err_len[2]) > 1.8);
}

TEST_CASE("periodic pairing is exact and complete") {
    CellGeometry geom;
    const CellMesh mesh = build_cell_mesh(geom, 1.0 / 16);
    const int n = static_cast<int>(std::llround(1.0 / mesh.h));
    CHECK(static_cast<int>(mesh.periodic_pairs.size()) == 2 * (n + 1));
    for (const auto& pr : mesh.periodic_pairs) {
        const Vec2& a = mesh.nodes[pr[0]];
        const Vec2& b = mesh.nodes[pr[1]];
        const bool lr = a.x() == 0.0 && b.x() == 1.0 && a.y() == b.y();
        const bool bt = a.y() == 0.0 && b.y() == 1.0 && a.x() == b.x();
        CHECK((lr || bt));
    }
}

TEST_CASE("surface mesh frames: closed loop, exterior normals, exact circle nodes") {
    CellGeometry geom;
    const CellMesh mesh = build_cell_mesh(geom, 1.0 / 32);
    const SurfaceMesh surf = extract_surface_mesh(mesh, geom);
    REQUIRE(!surf.empty());
    Vec2 chord_sum = Vec2::Zero();
    for (int k = 0; k < surf.num_segments(); ++k) {
        chord_sum += surf.lengths[k] * surf.tangents[k];
        const Vec2 mid = 0.5 * (mesh.nodes[surf.nodes[k]] +
                                mesh.nodes[surf.nodes[(k + 1) % surf.num_nodes()]]);
        CHECK(surf.normals[k].dot(geom.obstacle_center - mid) > 0.0);
        CHECK(std::abs(surf.normals[k].dot(surf.tangents[k])) < 1e-14);
        CHECK(surf.normals[k].norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
    // Closed loop: the chord vectors telescope to zero exactly.
    CHECK(chord_sum.norm() < 1e-13);
    CHECK(surf.total_length == doctest::Approx(geom.surface_length).epsilon(1e-14));
    for (int v : surf.nodes)
        CHECK(std::abs((mesh.nodes[v] - geom.obstacle_center).norm() - 0.2) < 1e-12);
}

TEST_CASE("unperforated mode meshes the full square") {
    CellGeometry geom;
    geom.obstacle_radius = 0.0;
    const CellMesh mesh = build_cell_mesh(geom, 1.0 / 16);
    auto [area, length] = measure(mesh);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(length == 0.0);
    CHECK(mesh.boundary_loop.empty());
    CHECK(extract_surface_mesh(mesh, geom).empty());
}

TEST_CASE("infeasible requests are rejected") {
    CellGeometry big;
    big.obstacle_radius = 0.49;
    CHECK_THROWS_AS(build_cell_mesh(big, 1.0 / 32), Error);
    try {
        CellGeometry g2;
        g2.obstacle_radius = 0.49;
        build_cell_mesh(g2, 1.0 / 32);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::geometry);
    }

    CellGeometry coarse;  // h must resolve the obstacle: h <= r/2
    CHECK_THROWS_AS(build_cell_mesh(coarse, 0.15), Error);

    CellGeometry offcenter;  // feasible off-center obstacle is accepted
    offcenter.obstacle_center = Vec2(0.55, 0.45);
    const CellMesh mesh = build_cell_mesh(offcenter, 1.0 / 32);
    validate_mesh(mesh, offcenter);
}

TEST_CASE("mesh serialization round-trips bit-exactly and validates on import") {
    CellGeometry geom;
    const CellMesh mesh = build_cell_mesh(geom, 1.0 / 16);

    std::stringstream buf;
    write_mesh(buf, mesh, geom);
    auto [back, geom2] = read_mesh(buf);

    REQUIRE(back.num_nodes() == mesh.num_nodes());
    REQUIRE(back.num_triangles() == mesh.num_triangles());
    for (int v = 0; v < mesh.num_nodes(); ++v) {
        CHECK(back.nodes[v].x() == mesh.nodes[v].x());
        CHECK(back.nodes[v].y() == mesh.nodes[v].y());
    }
    CHECK(back.triangles == mesh.triangles);
    CHECK(back.boundary_loop == mesh.boundary_loop);
    CHECK(back.periodic_pairs == mesh.periodic_pairs);
    CHECK(back.h == mesh.h);
    CHECK(geom2.fluid_area == geom.fluid_area);
    CHECK(geom2.surface_length == geom.surface_length);

    SUBCASE("tampered triangle index is rejected") {
        std::stringstream tampered;
        write_mesh(tampered, mesh, geom);
        std::string text = tampered.str();
        // Point a triangle at a node id beyond the table.
        const auto pos = text.find("triangles");
        const auto line_start = text.find('\n', pos) + 1;
        const auto line_end = text.find('\n', line_start);
        text.replace(line_start, line_end - line_start, "0 1 999999");
        std::stringstream broken(text);
        CHECK_THROWS_AS(read_mesh(broken), Error);
    }

    SUBCASE("truncated file is rejected") {
        std::stringstream trunc(buf.str().substr(0, buf.str().size() / 2));
        CHECK_THROWS_AS(read_mesh(trunc), Error);
    }
}
