#pragma once

#include <array>

#include "displab/cell_problems.hpp"

namespace displab {

/// Effective dispersion tensor assembled from a corrector solution.
///
/// The entries collect six contributions: (0) bulk diffusion energy of the
/// corrected directions, (1) exchange energy of the bulk-surface mismatch,
/// (2) tangential diffusion energy on the surface, (3) the antisymmetric
/// bulk flux part, (4) its surface counterpart, and (5) the convective
/// parts.  Groups 0-2 are symmetric and form the energy (symmetric) part;
/// groups 3-4 are antisymmetric by construction and the symmetric part of
/// group 5 cancels discretely because the velocity is divergence-free.
struct DispersionTensor {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();      ///< full tensor
    Eigen::Matrix2d A_sym = Eigen::Matrix2d::Zero();  ///< energy part (groups 0-2)
    std::array<Eigen::Matrix2d, 6> groups;
    double lambda_min = 0.0;  ///< smallest eigenvalue of sym(A)
    double sym_gap = 0.0;     ///< ||sym(A) - A_sym||_F / ||A||_F consistency
};

DispersionTensor assemble_dispersion(const CellMesh& mesh, const SurfaceMesh& surf,
                                     const VelocityField& vel, const CoefficientSet& coeffs,
                                     const CellSolution& sol);

/// Flux-based form of the same tensor, using the auxiliary potentials (the
/// solution must carry them).  Agrees with the corrector-energy form to
/// solver accuracy on the same mesh.
Eigen::Matrix2d assemble_dispersion_flux(const CellMesh& mesh, const SurfaceMesh& surf,
                                         const CoefficientSet& coeffs,
                                         const CellSolution& sol);

/// Smallest eigenvalue of the symmetric part of a 2x2 tensor.
double smallest_eigenvalue_sym(const Eigen::Matrix2d& A);

/// Sampled dispersion curve u0 -> A*(u0) for one coefficient set, with the
/// vanishing-slope limit as anchor.  Because the tensor depends on the
/// concentration only through the adsorption slope, evaluation interpolates
/// linearly in f'(u0) between samples; the limit row is the f' = 0 anchor,
/// and the u0 = 0 sample carries the maximal slope alpha — queries at
/// nonnegative concentrations never extrapolate.
struct DispersionTable {
    CoefficientSet coeffs;
    std::vector<double> u0;               ///< ascending sample concentrations
    std::vector<double> fprime;           ///< their slopes (descending)
    std::vector<DispersionTensor> rows;   ///< tensor per sample
    DispersionTensor limit;               ///< vanishing-slope anchor

    Eigen::Matrix2d eval(double u) const;          ///< full tensor at u >= 0
    Eigen::Matrix2d eval_at_slope(double fp) const;
};

/// Sample grid {0} followed by a linear range up to 1 and a geometric range
/// up to u_max (u_max > 1).
std::vector<double> default_concentration_grid(int linear_count = 8, int log_count = 12,
                                               double u_max = 1e4);

DispersionTable build_dispersion_table(const CellMesh& mesh, const SurfaceMesh& surf,
                                       const VelocityField& vel,
                                       const CoefficientSet& coeffs,
                                       const std::vector<double>& u_values,
                                       int jobs = 1);

}  // namespace displab
