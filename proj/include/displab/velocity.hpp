#pragma once

#include <iosfwd>
#include <string>

#include "displab/fem.hpp"
#include "displab/geometry.hpp"

namespace displab {

/// How the divergence-free cell velocity is manufactured.
///  none          b = 0 (pure diffusion runs)
///  symmetric     stream problem with identity mixing matrix
///  nonsymmetric  stream problem with an anisotropic, y1-dependent mixing
///                matrix that breaks the cell symmetry
enum class VelocityRecipe { none, symmetric, nonsymmetric };

VelocityRecipe velocity_recipe_from_string(const std::string& name);
const char* to_string(VelocityRecipe recipe);

/// Mixing matrix M(y) of the stream problem -div(M grad psi) = 1.
Eigen::Matrix2d stream_mixing_matrix(VelocityRecipe recipe, const Vec2& y);

/// Cell velocity data.  The bulk field is constant per triangle, equal to
/// the rotated gradient (-d2 psi, d1 psi) of a P1 stream function that
/// vanishes on the obstacle and is periodic, then normalized to unit L2
/// norm over the fluid region.  By construction it is elementwise
/// divergence-free, its normal flux is continuous across interior edges,
/// it does not penetrate the obstacle, and its cell mean vanishes to
/// rounding.  The surface field is a constant signed speed along the loop
/// tangent direction per segment; its mean telescopes to zero exactly.
struct VelocityField {
    VelocityRecipe recipe = VelocityRecipe::none;
    std::vector<Vec2> bulk;        ///< per triangle
    std::vector<double> surface;   ///< tangential speed per segment
    Eigen::VectorXd stream;        ///< nodal stream function (diagnostics)
    Vec2 bulk_mean = Vec2::Zero();
    Vec2 surface_mean = Vec2::Zero();
    Vec2 drift = Vec2::Zero();     ///< common mean b* used by the cell problems
    double l2_norm = 0.0;          ///< bulk L2 norm after normalization
};

/// Build the velocity for a recipe.  Throws a compatibility error when a
/// stream recipe is requested on the unperforated cell (the stream problem
/// has no obstacle to anchor it and a non-balanced source).
VelocityField build_velocity(VelocityRecipe recipe, const CellMesh& mesh,
                             const SurfaceMesh& surf, double surface_speed = 0.0);

struct DriftReport {
    Vec2 bulk_mean;
    Vec2 surface_mean;
    Vec2 drift;  ///< the common value
};

/// Bulk and surface means of a velocity field; throws a drift error when the
/// two disagree beyond `tol` (they must both equal b*).
DriftReport compute_drift(const CellMesh& mesh, const SurfaceMesh& surf,
                          const VelocityField& field, double tol = 1e-8);

/// CSV export: one row per triangle (index, centroid, velocity), then one
/// row per boundary segment (index, midpoint, tangential speed).
void write_velocity_csv(std::ostream& out, const CellMesh& mesh, const SurfaceMesh& surf,
                        const VelocityField& field);

}  // namespace displab
