#include "displab/velocity.hpp"

#include <cmath>
#include <ostream>

#include "displab/errors.hpp"

namespace displab {

VelocityRecipe velocity_recipe_from_string(const std::string& name) {
    if (name == "none") return VelocityRecipe::none;
    if (name == "symmetric") return VelocityRecipe::symmetric;
    if (name == "nonsymmetric") return VelocityRecipe::nonsymmetric;
    fail(ErrorKind::input, "unknown velocity recipe '" + name +
                               "' (expected none, symmetric or nonsymmetric)");
}

const char* to_string(VelocityRecipe recipe) {
    switch (recipe) {
        case VelocityRecipe::none: return "none";
        case VelocityRecipe::symmetric: return "symmetric";
        case VelocityRecipe::nonsymmetric: return "nonsymmetric";
    }
    return "?";
}

Eigen::Matrix2d stream_mixing_matrix(VelocityRecipe recipe, const Vec2& y) {
    Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
    if (recipe == VelocityRecipe::nonsymmetric) {
        const double y1 = y.x();
        m(0, 0) = y1 < 0.5 ? 0.01 + 0.5 * y1 : 0.26 + (y1 - 0.5);
        m(1, 1) = std::cos(y1);
    }
    return m;
}

namespace {

/// Solve -div(M grad psi) = 1 with psi = 0 on the obstacle loop and periodic
/// outer boundary; return nodal values.
Eigen::VectorXd solve_stream(VelocityRecipe recipe, const CellMesh& mesh) {
    const DofMap dofs = build_dof_map(mesh);
    LinearSystem sys(dofs.n);
    add_bulk_stiffness(sys, mesh, dofs, [&](int t) {
        return stream_mixing_matrix(recipe, mesh.centroid(t));
    });
    add_bulk_load(sys.rhs, mesh, dofs, [](int) { return 1.0; });

    if (mesh.boundary_loop.empty()) {
        // No obstacle: pure periodic Neumann problem whose constant source
        // cannot balance; declare the kernel so the solve reports it.
        sys.kernels.push_back(Eigen::VectorXd::Ones(dofs.n));
    } else {
        for (int node : mesh.boundary_loop) sys.dirichlet.push_back({dofs.dof(node), 0.0});
    }

    const SolveReport report = solve(sys);
    return expand_to_nodes(dofs, report.x);
}

}  // namespace

VelocityField build_velocity(VelocityRecipe recipe, const CellMesh& mesh,
                             const SurfaceMesh& surf, double surface_speed) {
    VelocityField field;
    field.recipe = recipe;
    field.bulk.assign(static_cast<std::size_t>(mesh.num_triangles()), Vec2::Zero());
    field.surface.assign(static_cast<std::size_t>(surf.num_segments()), surface_speed);

    if (recipe != VelocityRecipe::none) {
        field.stream = solve_stream(recipe, mesh);
        double norm_sq = 0.0;
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const Vec2 g = p1_gradient(mesh, t, field.stream);
            field.bulk[static_cast<std::size_t>(t)] = Vec2(-g.y(), g.x());
            norm_sq += mesh.triangle_area(t) * field.bulk[static_cast<std::size_t>(t)].squaredNorm();
        }
        if (!(norm_sq > 1e-30)) fail(ErrorKind::numeric, "stream velocity is identically zero");
        const double scale = 1.0 / std::sqrt(norm_sq);
        for (Vec2& b : field.bulk) b *= scale;
        field.l2_norm = 1.0;
    }

    const DriftReport report = compute_drift(mesh, surf, field);
    field.bulk_mean = report.bulk_mean;
    field.surface_mean = report.surface_mean;
    field.drift = report.drift;
    return field;
}

DriftReport compute_drift(const CellMesh& mesh, const SurfaceMesh& surf,
                          const VelocityField& field, double tol) {
    if (field.bulk.size() != static_cast<std::size_t>(mesh.num_triangles()) ||
        field.surface.size() != static_cast<std::size_t>(surf.num_segments()))
        fail(ErrorKind::input, "velocity field does not match the mesh");

    Vec2 bulk_sum = Vec2::Zero();
    double area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.triangle_area(t);
        bulk_sum += a * field.bulk[static_cast<std::size_t>(t)];
        area += a;
    }
    DriftReport report;
    report.bulk_mean = bulk_sum / area;

    report.surface_mean = Vec2::Zero();
    if (!surf.empty()) {
        Vec2 surf_sum = Vec2::Zero();
        for (int s = 0; s < surf.num_segments(); ++s)
            surf_sum += surf.lengths[static_cast<std::size_t>(s)] *
                        field.surface[static_cast<std::size_t>(s)] *
                        surf.tangents[static_cast<std::size_t>(s)];
        report.surface_mean = surf_sum / surf.total_length;

        if ((report.bulk_mean - report.surface_mean).norm() > tol)
            fail(ErrorKind::drift,
                 "bulk and surface velocity means disagree beyond tolerance");
    }

    // The bulk mean is the integration-weighted value that enters the cell
    // right-hand sides; use it as the common drift.
    report.drift = report.bulk_mean;
    return report;
}

void write_velocity_csv(std::ostream& out, const CellMesh& mesh, const SurfaceMesh& surf,
                        const VelocityField& field) {
    char line[256];
    out << "kind,index,x,y,b1,b2\n";
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const Vec2 c = mesh.centroid(t);
        const Vec2& b = field.bulk[static_cast<std::size_t>(t)];
        std::snprintf(line, sizeof line, "bulk,%d,%.17g,%.17g,%.17g,%.17g\n", t, c.x(), c.y(),
                      b.x(), b.y());
        out << line;
    }
    for (int s = 0; s < surf.num_segments(); ++s) {
        const Vec2& a = mesh.nodes[static_cast<std::size_t>(surf.nodes[static_cast<std::size_t>(s)])];
        const Vec2& b = mesh.nodes[static_cast<std::size_t>(
            surf.nodes[static_cast<std::size_t>((s + 1) % surf.num_nodes())])];
        const Vec2 mid = 0.5 * (a + b);
        const Vec2 bs = field.surface[static_cast<std::size_t>(s)] *
                        surf.tangents[static_cast<std::size_t>(s)];
        std::snprintf(line, sizeof line, "surface,%d,%.17g,%.17g,%.17g,%.17g\n", s, mid.x(),
                      mid.y(), bs.x(), bs.y());
        out << line;
    }
}

}  // namespace displab
