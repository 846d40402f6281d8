#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "displab/cell_problems.hpp"
#include "displab/dispersion.hpp"
#include "displab/errors.hpp"

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

double joint_mean(const Cell& c, const Corrector& cr) {
    double val = 0.0;
    for (int t = 0; t < c.mesh.num_triangles(); ++t) {
        const auto& tri = c.mesh.triangles[static_cast<std::size_t>(t)];
        val += c.mesh.triangle_area(t) * (cr.chi[tri[0]] + cr.chi[tri[1]] + cr.chi[tri[2]]) / 3.0;
    }
    const int m = c.surf.num_nodes();
    for (int s = 0; s < m; ++s)
        val += c.surf.lengths[static_cast<std::size_t>(s)] * 0.5 *
               (cr.omega[s] + cr.omega[(s + 1) % m]);
    return val;
}

// ---------------------------------------------------------------------------
// Independent dense reference: assembles the f'-weighted variational form of
// the paired problem from scratch (own folding, own element formulas, dense
// KKT solve) and returns nodal chi / loop omega.
// ---------------------------------------------------------------------------
struct DenseRef {
    Eigen::VectorXd chi;
    Eigen::VectorXd omega;
};

DenseRef dense_reference(const Cell& c, const CoefficientSet& co, double fprime,
                         int direction) {
    const auto& nodes = c.mesh.nodes;
    const int nv = c.mesh.num_nodes();

    // Fold periodic copies by coordinate match (outer coordinates are exact).
    std::vector<int> rep(static_cast<std::size_t>(nv));
    std::map<std::pair<double, double>, int> first;
    for (int v = 0; v < nv; ++v) {
        double x = nodes[static_cast<std::size_t>(v)].x();
        double y = nodes[static_cast<std::size_t>(v)].y();
        if (x == 1.0) x = 0.0;
        if (y == 1.0) y = 0.0;
        auto [it, inserted] = first.insert({{x, y}, v});
        rep[static_cast<std::size_t>(v)] = it->second;
    }
    std::vector<int> idx(static_cast<std::size_t>(nv), -1);
    int nr = 0;
    for (int v = 0; v < nv; ++v)
        if (rep[static_cast<std::size_t>(v)] == v) idx[static_cast<std::size_t>(v)] = nr++;
    for (int v = 0; v < nv; ++v)
        idx[static_cast<std::size_t>(v)] = idx[static_cast<std::size_t>(rep[static_cast<std::size_t>(v)])];

    const int m = c.surf.num_nodes();
    const int N = nr + m;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N + 1, N + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
    const Vec2 e = Vec2::Unit(direction);

    for (int t = 0; t < c.mesh.num_triangles(); ++t) {
        const auto& tri = c.mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2 p[3] = {nodes[static_cast<std::size_t>(tri[0])],
                           nodes[static_cast<std::size_t>(tri[1])],
                           nodes[static_cast<std::size_t>(tri[2])]};
        const double two_a = (p[1] - p[0]).x() * (p[2] - p[0]).y() -
                             (p[1] - p[0]).y() * (p[2] - p[0]).x();
        const double area = 0.5 * two_a;
        Vec2 g[3];
        for (int k = 0; k < 3; ++k) {
            const Vec2 edge = p[(k + 2) % 3] - p[(k + 1) % 3];
            g[k] = Vec2(-edge.y(), edge.x()) / two_a;
        }
        const Vec2 b = c.vel.bulk[static_cast<std::size_t>(t)];
        for (int i = 0; i < 3; ++i) {
            const int r = idx[static_cast<std::size_t>(tri[i])];
            for (int j = 0; j < 3; ++j) {
                const int cc = idx[static_cast<std::size_t>(tri[j])];
                K(r, cc) += area * ((co.D * g[j]).dot(g[i]) + b.dot(g[j]) / 3.0);
            }
            rhs[r] += area * ((c.vel.drift - b).dot(e) / 3.0 - (co.D * e).dot(g[i]));
            K(N, r) += area / 3.0;  // joint-mean constraint row
        }
    }

    const double wx = co.kappa * fprime;
    for (int s = 0; s < m; ++s) {
        const int na = c.surf.nodes[static_cast<std::size_t>(s)];
        const int nb2 = c.surf.nodes[static_cast<std::size_t>((s + 1) % m)];
        const double L = c.surf.lengths[static_cast<std::size_t>(s)];
        const Vec2 tg = (nodes[static_cast<std::size_t>(nb2)] - nodes[static_cast<std::size_t>(na)]) / L;
        const double wd = fprime * tg.dot(co.Ds * tg);
        const double sp = fprime * c.vel.surface[static_cast<std::size_t>(s)];
        const int bu[2] = {idx[static_cast<std::size_t>(na)], idx[static_cast<std::size_t>(nb2)]};
        const int su[2] = {nr + s, nr + (s + 1) % m};
        const double M2[2][2] = {{L / 3.0, L / 6.0}, {L / 6.0, L / 3.0}};
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                // Exchange: kappa f' (chi - omega)(phi - psi) on both blocks.
                K(bu[i], bu[j]) += wx * M2[i][j];
                K(bu[i], su[j]) -= wx * M2[i][j];
                K(su[i], bu[j]) -= wx * M2[i][j];
                K(su[i], su[j]) += wx * M2[i][j];
                // Tangential diffusion (f'-weighted rows).
                const double sgn_i = i == 0 ? -1.0 : 1.0;
                const double sgn_j = j == 0 ? -1.0 : 1.0;
                K(su[i], su[j]) += wd * sgn_i * sgn_j / L;
                // Tangential convection.
                K(su[i], su[j]) += sp * sgn_j * 0.5;
            }
            const Vec2 bs = c.vel.surface[static_cast<std::size_t>(s)] * tg;
            rhs[su[i]] += fprime * (c.vel.drift - bs).dot(e) * L / 2.0;
            // Right side carries -int (t.Ds e) d/ds(psi): +value at the
            // segment start, -value at its end.
            rhs[su[i]] += fprime * tg.dot(co.Ds * e) * (i == 0 ? 1.0 : -1.0);
            K(N, su[i]) += L / 2.0;
        }
    }
    K.block(0, N, N, 1) = K.block(N, 0, 1, N).transpose();

    const Eigen::VectorXd x = Eigen::FullPivLU<Eigen::MatrixXd>(K).solve(rhs);
    DenseRef out;
    out.chi.resize(nv);
    for (int v = 0; v < nv; ++v) out.chi[v] = x[idx[static_cast<std::size_t>(v)]];
    out.omega = x.segment(nr, m);
    return out;
}

}  // namespace

TEST_CASE("paired corrector matches an independent dense solve") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::nonsymmetric, 0.3);
    CoefficientSet co;
    const double u0 = 1.0;
    const double fp = co.isotherm.slope(u0);  // 0.25

    const CellSolution sol = solve_cell(c.mesh, c.surf, c.vel, co, u0);
    CHECK(sol.regime == CellRegime::coupled);
    CHECK(sol.fprime == fp);

    for (int i = 0; i < 2; ++i) {
        const DenseRef ref = dense_reference(c, co, fp, i);
        const auto& d = sol.dir[static_cast<std::size_t>(i)];
        CHECK((ref.chi - d.chi).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK((ref.omega - d.omega).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK(sol.residual[static_cast<std::size_t>(i)] < 1e-9);
        CHECK(std::abs(joint_mean(c, d)) < 1e-12);
    }
}

TEST_CASE("solving the weighted variational form directly gives the same correctors") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::symmetric, 0.2);
    CoefficientSet co;
    co.isotherm.beta = 0.5;
    const double fp = co.isotherm.slope(2.0);

    const CellSolution base = solve_cell(c.mesh, c.surf, c.vel, co, 2.0);

    const DofMap dofs = build_dof_map(c.mesh);
    const int nb = dofs.n;
    const int m = c.surf.num_nodes();
    for (int i = 0; i < 2; ++i) {
        LinearSystem sys = assemble_cell_system(c.mesh, c.surf, c.vel, co, fp, i, fp);
        Eigen::VectorXd k(nb + m);
        k.setOnes();
        sys.kernels.push_back(k);
        LinearSystem::Constraint cons;
        const Eigen::VectorXd bm = bulk_mass_vector(c.mesh, dofs);
        for (int d = 0; d < nb; ++d) cons.coeffs.push_back({d, bm[d]});
        const Eigen::VectorXd sm = surface_mass_vector(c.surf);
        for (int s = 0; s < m; ++s) cons.coeffs.push_back({nb + s, sm[s]});
        sys.constraints.push_back(cons);

        const SolveReport rep = solve(sys);
        const Eigen::VectorXd chi = expand_to_nodes(dofs, rep.x.head(nb));
        const auto& d = base.dir[static_cast<std::size_t>(i)];
        CHECK((chi - d.chi).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK((rep.x.tail(m) - d.omega).lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("linear adsorption law makes the correctors concentration-independent") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::symmetric);
    CoefficientSet co;
    co.isotherm.beta = 0.0;

    const CellSolution a = solve_cell(c.mesh, c.surf, c.vel, co, 0.1);
    const CellSolution b = solve_cell(c.mesh, c.surf, c.vel, co, 100.0);
    CHECK(a.fprime == b.fprime);
    for (int i = 0; i < 2; ++i) {
        CHECK((a.dir[static_cast<std::size_t>(i)].chi - b.dir[static_cast<std::size_t>(i)].chi)
                  .lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((a.dir[static_cast<std::size_t>(i)].omega -
               b.dir[static_cast<std::size_t>(i)].omega)
                  .lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("surface flux potential matches the closed-form circle solution") {
    // With a constant tangential speed and (numerically) zero drift the
    // tangential potential on a circle of radius r is -speed r^2 t_i, up to
    // the discrete zero-mean gauge.
    const double speed = 0.3;
    const double r = 0.2;
    auto run = [&](double h) {
        const Cell c = make_cell(h, VelocityRecipe::none, speed);
        const FluxPotentials fp = solve_flux_potentials(c.mesh, c.surf, c.vel);
        const Eigen::VectorXd sm = surface_mass_vector(c.surf);
        double worst = 0.0;
        for (int i = 0; i < 2; ++i) {
            const int m = c.surf.num_nodes();
            Eigen::VectorXd exact(m);
            for (int k = 0; k < m; ++k) {
                const Vec2 p = c.mesh.nodes[static_cast<std::size_t>(
                                   c.surf.nodes[static_cast<std::size_t>(k)])] -
                               c.geom.obstacle_center;
                const double theta = std::atan2(p.y(), p.x());
                const Vec2 tang(-std::sin(theta), std::cos(theta));
                exact[k] = -speed * r * r * tang[i];
            }
            exact.array() -= sm.dot(exact) / c.surf.total_length;
            worst = std::max(worst,
                             (fp.Xi[static_cast<std::size_t>(i)] - exact).lpNorm<Eigen::Infinity>());
        }
        return worst;
    };
    const double e32 = run(1.0 / 32.0);
    const double e64 = run(1.0 / 64.0);
    CHECK(e32 < 2e-4);
    CHECK(e64 < e32 / 3.0);
}

TEST_CASE("limit problems are approached by extreme parameter values") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::symmetric, 0.1);
    CoefficientSet co;

    auto rel_gap = [](const Eigen::Matrix2d& x, const Eigen::Matrix2d& y) {
        return (x - y).norm() / y.norm();
    };

    // Vanishing adsorption slope.
    {
        const CellSolution lim = solve_limit_vanishing_slope(c.mesh, c.surf, c.vel, co);
        CHECK(lim.regime == CellRegime::vanishing_slope);
        const CellSolution far = solve_cell(c.mesh, c.surf, c.vel, co, 1e4);
        const Eigen::Matrix2d Alim = assemble_dispersion(c.mesh, c.surf, c.vel, co, lim).A;
        const Eigen::Matrix2d Afar = assemble_dispersion(c.mesh, c.surf, c.vel, co, far).A;
        CHECK(rel_gap(Afar, Alim) < 0.05);
    }
    // Fast surface diffusion.
    {
        const CellSolution lim = solve_limit_fast_surface(c.mesh, c.surf, c.vel, co, 2.5);
        // The limit surface corrector is affine: its tangential derivative
        // cancels the coordinate direction exactly.
        const int m = c.surf.num_nodes();
        for (int i = 0; i < 2; ++i) {
            const auto& d = lim.dir[static_cast<std::size_t>(i)];
            for (int s = 0; s < m; ++s) {
                const double doi = (d.omega[(s + 1) % m] - d.omega[s]) /
                                   c.surf.lengths[static_cast<std::size_t>(s)];
                CHECK(std::abs(doi + c.surf.tangents[static_cast<std::size_t>(s)][i]) < 1e-11);
            }
        }
        CoefficientSet fast = co;
        fast.Ds = 1e3 * Eigen::Matrix2d::Identity();
        const CellSolution far = solve_cell(c.mesh, c.surf, c.vel, fast, 2.5);
        const Eigen::Matrix2d Alim = assemble_dispersion(c.mesh, c.surf, c.vel, co, lim).A;
        const Eigen::Matrix2d Afar = assemble_dispersion(c.mesh, c.surf, c.vel, fast, far).A;
        CHECK(rel_gap(Afar, Alim) < 0.05);
    }
    // Fast exchange.
    {
        const CellSolution lim = solve_limit_fast_exchange(c.mesh, c.surf, c.vel, co);
        CHECK(lim.surface_weight == 1.0);
        CoefficientSet fast = co;
        fast.kappa = 1e4;
        const CellSolution far = solve_cell(c.mesh, c.surf, c.vel, fast, 0.0);
        const Eigen::Matrix2d Alim = assemble_dispersion(c.mesh, c.surf, c.vel, co, lim).A;
        const Eigen::Matrix2d Afar = assemble_dispersion(c.mesh, c.surf, c.vel, fast, far).A;
        CHECK(rel_gap(Afar, Alim) < 0.05);
        // The merged corrector is exactly concentration independent; its
        // surface field is the bulk trace bitwise.
        for (int i = 0; i < 2; ++i) {
            const auto& d = lim.dir[static_cast<std::size_t>(i)];
            for (int k = 0; k < c.surf.num_nodes(); ++k)
                CHECK(d.omega[k] ==
                      d.chi[c.surf.nodes[static_cast<std::size_t>(k)]]);
        }
    }
}

TEST_CASE("invalid coefficients are rejected") {
    const Cell c = make_cell(1.0 / 16.0, VelocityRecipe::none);
    CoefficientSet co;
    co.kappa = 0.0;
    CHECK_THROWS_AS(solve_cell(c.mesh, c.surf, c.vel, co, 1.0), Error);
    co.kappa = 1.0;
    co.D << 1.0, 2.0, 2.0, 1.0;  // indefinite
    CHECK_THROWS_AS(solve_cell(c.mesh, c.surf, c.vel, co, 1.0), Error);
    co.D = Eigen::Matrix2d::Identity();
    co.D(0, 1) = 0.5;  // non-symmetric
    CHECK_THROWS_AS(solve_cell(c.mesh, c.surf, c.vel, co, 1.0), Error);
}
