#pragma once

#include <array>

#include "displab/fem.hpp"
#include "displab/geometry.hpp"
#include "displab/isotherm.hpp"
#include "displab/velocity.hpp"

namespace displab {

/// Transport coefficients entering the cell problems.
struct CoefficientSet {
    Isotherm isotherm;  ///< adsorption law (alpha, beta)
    double kappa = 1.0;  ///< bulk <-> surface exchange rate, > 0
    Eigen::Matrix2d D = Eigen::Matrix2d::Identity();   ///< bulk diffusion, SPD
    Eigen::Matrix2d Ds = Eigen::Matrix2d::Identity();  ///< surface diffusion; its
                                                       ///< tangential part acts
    void validate() const;
};

/// Which corrector family a solution belongs to.
enum class CellRegime {
    coupled,          ///< finite parameters: paired bulk + surface correctors
    vanishing_slope,  ///< adsorption slope -> 0: surface decouples from the tensor
    fast_surface,     ///< surface diffusion -> infinity: affine surface corrector
    fast_exchange,    ///< exchange rate -> infinity: surface corrector = bulk trace
};
const char* to_string(CellRegime regime);

/// One direction's corrector data.  chi has one value per mesh node
/// (periodic copies synchronized), omega one value per boundary-loop
/// position.  xi / Xi are the auxiliary potentials of the flux-based tensor
/// formula and stay empty unless requested.
struct Corrector {
    Eigen::VectorXd chi;
    Eigen::VectorXd omega;
    Eigen::VectorXd xi;
    Eigen::VectorXd Xi;
};

struct CellSolution {
    CellRegime regime = CellRegime::coupled;
    double u0 = 0.0;              ///< concentration the slope was taken at
    double fprime = 0.0;          ///< adsorption slope entering the coupling
    double surface_weight = 0.0;  ///< weight of the surface terms in the tensor
    std::array<Corrector, 2> dir;
    std::array<double, 2> residual = {0.0, 0.0};  ///< weighted-form rel. residuals
    std::array<int, 2> iterations = {0, 0};  ///< linear-solver iterations (0 = direct)
};

/// Paired cell problem at concentration u0 (slope f'(u0)).  Degenerates
/// gracefully to the vanishing-slope form when f'(u0) underflows the
/// coupling threshold.  With `with_aux` the auxiliary flux potentials are
/// solved as well.  On the unperforated cell the surface part is empty and
/// the result carries the bulk corrector only.
CellSolution solve_cell(const CellMesh& mesh, const SurfaceMesh& surf,
                        const VelocityField& vel, const CoefficientSet& coeffs, double u0,
                        bool with_aux = false);

/// Same problem at an explicitly prescribed slope value (used by the limit
/// tables and by tests).
CellSolution solve_cell_at_slope(const CellMesh& mesh, const SurfaceMesh& surf,
                                 const VelocityField& vel, const CoefficientSet& coeffs,
                                 double fprime, bool with_aux = false);

/// Limit problems.
CellSolution solve_limit_vanishing_slope(const CellMesh& mesh, const SurfaceMesh& surf,
                                         const VelocityField& vel,
                                         const CoefficientSet& coeffs);
CellSolution solve_limit_fast_surface(const CellMesh& mesh, const SurfaceMesh& surf,
                                      const VelocityField& vel, const CoefficientSet& coeffs,
                                      double u0);
CellSolution solve_limit_fast_exchange(const CellMesh& mesh, const SurfaceMesh& surf,
                                       const VelocityField& vel,
                                       const CoefficientSet& coeffs);

/// Auxiliary potentials for the flux-based tensor formula: a bulk potential
/// driven by the velocity fluctuation (plain Laplacian, natural boundary
/// conditions, zero mean) and its tangential surface counterpart.  They do
/// not depend on the concentration.
struct FluxPotentials {
    std::array<Eigen::VectorXd, 2> xi;  ///< nodal bulk fields
    std::array<Eigen::VectorXd, 2> Xi;  ///< loop-ordered surface fields
};
FluxPotentials solve_flux_potentials(const CellMesh& mesh, const SurfaceMesh& surf,
                                     const VelocityField& vel);

/// Assemble the paired system for one direction; exposed for tests and for
/// the --dump-system diagnostic.  Bulk unknowns first, then one unknown per
/// loop position.  `surface_row_scale` multiplies the surface rows and their
/// right-hand side (1 gives the solved form, f' the weighted variational
/// form; the two are row-equivalent).
LinearSystem assemble_cell_system(const CellMesh& mesh, const SurfaceMesh& surf,
                                  const VelocityField& vel, const CoefficientSet& coeffs,
                                  double fprime, int direction, double surface_row_scale);

}  // namespace displab
