#include <doctest.h>

#include <cmath>

#include "displab/cell_problems.hpp"
#include "displab/dispersion.hpp"

using namespace displab;

namespace {

struct Cell {
    CellGeometry geom;
    CellMesh mesh;
    SurfaceMesh surf;
    VelocityField vel;
};

Cell make_cell(double h, VelocityRecipe recipe, double surface_speed = 0.0,
               double radius = 0.2) {
    Cell c;
    c.geom.obstacle_radius = radius;
    c.mesh = build_cell_mesh(c.geom, h);
    c.surf = extract_surface_mesh(c.mesh, c.geom);
    c.vel = build_velocity(recipe, c.mesh, c.surf, surface_speed);
    return c;
}

}  // namespace

TEST_CASE("unperforated cell recovers the bulk diffusion tensor") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::none, 0.0, 0.0);
    CoefficientSet co;
    co.D << 2.0, 0.3, 0.3, 0.5;
    const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, 1.0);
    const DispersionTensor t = assemble_dispersion(c.mesh, c.surf, c.vel, co, sol);
    CHECK((t.A - co.D).norm() < 1e-12);
    CHECK((t.A_sym - co.D).norm() < 1e-12);
}

TEST_CASE("no velocity: tensor is symmetric and respects the mesh symmetry") {
    const Cell c = make_cell(1.0 / 32.0, VelocityRecipe::none);
    CoefficientSet co;
    const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, 1.0);
    const DispersionTensor t = assemble_dispersion(c.mesh, c.surf, c.vel, co, sol);

    CHECK((t.A - t.A.transpose()).norm() < 1e-9);
    CHECK(std::abs(t.A(0, 0) - t.A(1, 1)) < 1e-10);
    CHECK(std::abs(t.A(0, 1)) < 1e-10);
    CHECK(std::abs(t.A(1, 0)) < 1e-10);
    CHECK(t.sym_gap < 1e-12);
    CHECK(t.lambda_min > 0.0);

    // Pure diffusion bounds: between a strictly positive floor and the
    // fluid-volume upper bound reached without an obstacle.
    const CellSolution lim = solve_limit_vanishing_slope(c.mesh, c.surf, c.vel, co);
    const DispersionTensor tl = assemble_dispersion(c.mesh, c.surf, c.vel, co, lim);
    CHECK(tl.A(0, 0) > 0.5);
    CHECK(tl.A(0, 0) < c.geom.fluid_area);
}

TEST_CASE("energy part equals the symmetric part discretely") {
    // The antisymmetric groups cancel in the symmetric part and the
    // convective group is skew up to rounding because the discrete velocity
    // is elementwise divergence-free with continuous normal flux.
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::nonsymmetric, 0.3);
    CoefficientSet co;
    for (const double u0 : {0.0, 1.0, 20.0}) {
        const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, u0);
        const DispersionTensor t = assemble_dispersion(c.mesh, c.surf, c.vel, co, sol);
        CHECK(t.sym_gap < 1e-10);
        CHECK(t.lambda_min > 0.0);
        for (int g = 0; g < 3; ++g) {
            CHECK(t.groups[static_cast<std::size_t>(g)](0, 0) >= 0.0);
            CHECK(t.groups[static_cast<std::size_t>(g)](1, 1) >= 0.0);
        }
    }
}

TEST_CASE("corrector-energy and flux-based formulas agree discretely") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::nonsymmetric, 0.3);
    CoefficientSet co;
    co.isotherm.beta = 0.7;
    co.kappa = 2.0;
    const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, 1.0, /*with_aux=*/true);
    const DispersionTensor t = assemble_dispersion(c.mesh, c.surf, c.vel, co, sol);
    const Eigen::Matrix2d alt = assemble_dispersion_flux(c.mesh, c.surf, co, sol);
    CHECK((t.A - alt).norm() / t.A.norm() < 1e-8);
}

TEST_CASE("dispersion decreases with concentration in the diffusive regime") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::none);
    CoefficientSet co;
    double prev = std::numeric_limits<double>::infinity();
    for (const double u0 : {0.0, 0.5, 2.0, 10.0}) {
        const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, u0);
        const DispersionTensor t = assemble_dispersion(c.mesh, c.surf, c.vel, co, sol);
        CHECK(t.A_sym(0, 0) < prev);
        prev = t.A_sym(0, 0);
    }
    // And stays above the vanishing-slope limit value.
    const CellSolution lim = solve_limit_vanishing_slope(c.mesh, c.surf, c.vel, co);
    CHECK(prev > assemble_dispersion(c.mesh, c.surf, c.vel, co, lim).A_sym(0, 0));
}
