#include "verify_suite.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "displab/dispersion.hpp"
#include "displab/velocity.hpp"

namespace displab {

namespace {

struct VerifyContext {
    CellGeometry geom;
    CellMesh mesh;
    SurfaceMesh surf;
    bool inject_fault = false;
};

VerifyContext make_context(double radius, double h) {
    VerifyContext ctx;
    ctx.geom.obstacle_radius = radius;
    ctx.mesh = build_cell_mesh(ctx.geom, h);
    ctx.surf = extract_surface_mesh(ctx.mesh, ctx.geom);
    return ctx;
}

/// Assemble the tensor for a cell solution, optionally skewed by the
/// injected fault so the downstream checks can prove they catch it.
DispersionTensor tensor_at(const VerifyContext& ctx, const VelocityField& vel,
                           const CoefficientSet& coeffs, const CellSolution& sol) {
    DispersionTensor t = assemble_dispersion(ctx.mesh, ctx.surf, vel, coeffs, sol);
    if (ctx.inject_fault) t.A(0, 1) += 1e-3;
    return t;
}

Vec2 edge_vector(const CellMesh& mesh, int a, int b) {
    return mesh.nodes[static_cast<std::size_t>(b)] - mesh.nodes[static_cast<std::size_t>(a)];
}

/// Map from an undirected edge to the triangles containing it.
std::map<std::pair<int, int>, std::vector<int>> edge_triangles(const CellMesh& mesh) {
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int e = 0; e < 3; ++e) {
            const int a = tri[static_cast<std::size_t>(e)];
            const int b = tri[static_cast<std::size_t>((e + 1) % 3)];
            edges[{std::min(a, b), std::max(a, b)}].push_back(t);
        }
    }
    return edges;
}

void drift_checks(const VerifyContext& ctx, VelocityRecipe recipe, double surface_speed,
                  std::vector<CheckResult>& out) {
    const std::string tag = std::string(" (") + to_string(recipe) + ")";
    const VelocityField vel = build_velocity(recipe, ctx.mesh, ctx.surf, surface_speed);
    const DriftReport drift = compute_drift(ctx.mesh, ctx.surf, vel, 1.0);

    const double bulk = drift.bulk_mean.cwiseAbs().maxCoeff();
    out.push_back({"bulk velocity mean" + tag, bulk <= 1e-10, bulk, 1e-10});
    const double surf = drift.surface_mean.cwiseAbs().maxCoeff();
    out.push_back({"surface velocity mean" + tag, surf <= 1e-10, surf, 1e-10});

    const auto edges = edge_triangles(ctx.mesh);
    double slip = 0.0;
    for (int s = 0; s < ctx.surf.num_segments(); ++s) {
        const int a = ctx.surf.nodes[static_cast<std::size_t>(s)];
        const int b = ctx.surf.nodes[static_cast<std::size_t>((s + 1) % ctx.surf.num_nodes())];
        const auto it = edges.find({std::min(a, b), std::max(a, b)});
        if (it == edges.end()) continue;
        for (const int t : it->second) {
            const Vec2 bt = vel.bulk[static_cast<std::size_t>(t)];
            slip = std::max(slip,
                            std::abs(bt.dot(ctx.surf.normals[static_cast<std::size_t>(s)])));
        }
    }
    out.push_back({"obstacle slip" + tag, slip <= 1e-10, slip, 1e-10});

    // The per-triangle field is constant, so its elementwise divergence
    // vanishes identically; the discrete content of div b = 0 is normal-flux
    // continuity across interior edges.
    double jump = 0.0;
    for (const auto& [key, tris] : edges) {
        if (tris.size() != 2) continue;
        const Vec2 d = edge_vector(ctx.mesh, key.first, key.second);
        const Vec2 n = Vec2(-d.y(), d.x()).normalized();
        const Vec2 b1 = vel.bulk[static_cast<std::size_t>(tris[0])];
        const Vec2 b2 = vel.bulk[static_cast<std::size_t>(tris[1])];
        jump = std::max(jump, std::abs((b1 - b2).dot(n)));
    }
    out.push_back({"interior normal-flux continuity" + tag, jump <= 1e-10, jump, 1e-10});
}

void compatibility_check(const VerifyContext& ctx, VelocityRecipe recipe,
                         const CoefficientSet& coeffs, double u0, double surface_speed,
                         std::vector<CheckResult>& out) {
    const std::string tag = std::string(" (") + to_string(recipe) + ")";
    const VelocityField vel = build_velocity(recipe, ctx.mesh, ctx.surf, surface_speed);
    const double fp = coeffs.isotherm.slope(u0);
    double worst = 0.0;
    for (int dir = 0; dir < 2; ++dir) {
        const LinearSystem sys =
            assemble_cell_system(ctx.mesh, ctx.surf, vel, coeffs, fp, dir, fp);
        worst = std::max(worst, std::abs(sys.rhs.sum()));
    }
    out.push_back({"constant-pair compatibility" + tag, worst <= 1e-10, worst, 1e-10});
}

double formula_gap(const VerifyContext& ctx, const VelocityField& vel,
                   const CoefficientSet& coeffs, double u0) {
    const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, coeffs, u0, true);
    const DispersionTensor primary = assemble_dispersion(ctx.mesh, ctx.surf, vel, coeffs, sol);
    const Eigen::Matrix2d flux = assemble_dispersion_flux(ctx.mesh, ctx.surf, coeffs, sol);
    return (primary.A - flux).norm() / primary.A.norm();
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const LabConfig& cfg, const VerifyOptions& opt) {
    std::vector<CheckResult> out;
    VerifyContext ctx = make_context(cfg.radius, opt.h);
    ctx.inject_fault = opt.inject_fault;

    for (const VelocityRecipe recipe :
         {VelocityRecipe::symmetric, VelocityRecipe::nonsymmetric}) {
        drift_checks(ctx, recipe, cfg.surface_speed, out);
        compatibility_check(ctx, recipe, cfg.coefficients(), cfg.u0, cfg.surface_speed, out);
    }

    const CoefficientSet coeffs = cfg.coefficients();
    const VelocityRecipe recipe = velocity_recipe_from_string(cfg.velocity);
    const VelocityField vel = build_velocity(recipe, ctx.mesh, ctx.surf, cfg.surface_speed);

    // Tensor-formula equivalence at h, improving (or already at rounding
    // level) against the twice-coarser mesh.
    {
        const double gap_fine = formula_gap(ctx, vel, coeffs, cfg.u0);
        out.push_back({"formula equivalence gap", gap_fine <= 0.02, gap_fine, 0.02});
        // Clamp so the coarser companion mesh still resolves the obstacle.
        const double coarse_h = std::min(2.0 * opt.h, 0.499 * cfg.radius);
        VerifyContext coarse = make_context(cfg.radius, coarse_h);
        const VelocityField vel_c =
            build_velocity(recipe, coarse.mesh, coarse.surf, cfg.surface_speed);
        const double gap_coarse = formula_gap(coarse, vel_c, coeffs, cfg.u0);
        const double bound = std::max(gap_coarse, 1e-8);
        out.push_back({"formula equivalence refinement trend", gap_fine <= bound, gap_fine,
                       bound});
    }

    // Coercivity of the symmetric part over the parameter suite.
    {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (coeffs.D + coeffs.D.transpose()));
        const double bound = ctx.geom.fluid_area * es.eigenvalues().minCoeff() - 1e-6;
        double min_lambda = std::numeric_limits<double>::infinity();
        for (const double u0 : {0.0, 1.0, 2.5, 10.0, 100.0}) {
            const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, coeffs, u0);
            min_lambda = std::min(min_lambda, tensor_at(ctx, vel, coeffs, sol).lambda_min);
        }
        for (const double scale : {0.1, 1.0, 10.0}) {
            CoefficientSet c = coeffs;
            c.Ds = scale * coeffs.Ds;
            const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, c, cfg.u0);
            min_lambda = std::min(min_lambda, tensor_at(ctx, vel, c, sol).lambda_min);
        }
        for (const double kap : {0.1, 1.0, 10.0}) {
            CoefficientSet c = coeffs;
            c.kappa = kap;
            const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, c, cfg.u0);
            min_lambda = std::min(min_lambda, tensor_at(ctx, vel, c, sol).lambda_min);
        }
        out.push_back(
            {"coercivity of the symmetric part", min_lambda >= bound, min_lambda, bound});
    }

    // Without flow the square-with-centered-disk symmetries force an
    // isotropic tensor.
    {
        const VelocityField none = build_velocity(VelocityRecipe::none, ctx.mesh, ctx.surf);
        const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, none, coeffs, 1.0);
        const DispersionTensor t = tensor_at(ctx, none, coeffs, sol);
        const double dev = std::max({std::abs(t.A(0, 0) - t.A(1, 1)), std::abs(t.A(0, 1)),
                                     std::abs(t.A(1, 0))});
        out.push_back({"no-flow tensor isotropy", dev <= 1e-6, dev, 1e-6});
    }

    // Symmetrized three-group assembly equals the symmetric part of the full
    // six-group assembly.
    {
        const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, coeffs, cfg.u0);
        const DispersionTensor t = tensor_at(ctx, vel, coeffs, sol);
        const double gap = (0.5 * (t.A + t.A.transpose()) - t.A_sym).norm() / t.A.norm();
        out.push_back({"symmetrized-assembly identity", gap <= 1e-10, gap, 1e-10});
    }

    // A linear isotherm has constant slope, so the tensor cannot depend on
    // the concentration.
    {
        CoefficientSet lin = coeffs;
        lin.isotherm.beta = 0.0;
        DispersionTensor first;
        double dev = 0.0;
        bool have_first = false;
        for (const double u0 : {0.1, 1.0, 10.0, 100.0}) {
            const CellSolution sol = solve_cell(ctx.mesh, ctx.surf, vel, lin, u0);
            const DispersionTensor t = tensor_at(ctx, vel, lin, sol);
            if (!have_first) {
                first = t;
                have_first = true;
            } else {
                dev = std::max(dev, (t.A - first.A).norm() / first.A.norm());
            }
        }
        out.push_back({"linear-isotherm invariance", dev <= 1e-10, dev, 1e-10});
    }

    return out;
}

}  // namespace displab
