#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "displab/geometry.hpp"

namespace displab {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Folding of mesh nodes into reduced periodic unknowns: every periodic
/// slave shares the dof of its master (corner chains resolved), interior and
/// obstacle nodes keep their own dof.
struct DofMap {
    std::vector<int> rep;    ///< node -> representative node
    std::vector<int> index;  ///< node -> reduced dof
    std::vector<int> nodes;  ///< reduced dof -> representative node
    int n = 0;

    int dof(int node) const { return index[node]; }
};

DofMap build_dof_map(const CellMesh& mesh);

/// Scatter reduced unknowns back to one value per mesh node (slaves copy
/// their master) and the reverse gather.
Eigen::VectorXd expand_to_nodes(const DofMap& dofs, const Eigen::VectorXd& reduced);
Eigen::VectorXd reduce_from_nodes(const DofMap& dofs, const Eigen::VectorXd& nodal);

/// Geometry of one P1 triangle: area and the constant basis gradients.
struct P1Element {
    double area;
    Vec2 grad[3];
};
P1Element p1_element(const CellMesh& mesh, int t);

/// Per-triangle gradient of a nodal field (values indexed by mesh node).
Vec2 p1_gradient(const CellMesh& mesh, int t, const Eigen::VectorXd& nodal);

/// Nodal field on the cell.  Bulk fields hold one value per mesh node with
/// periodic slaves synchronized; surface fields one value per boundary-loop
/// position.
struct FieldOnCell {
    enum class Kind { bulk, surface };
    Kind kind = Kind::bulk;
    Eigen::VectorXd values;
};

/// Sparse linear system in reduced unknowns with optional affine constraints
/// (appended as Lagrange multiplier rows/columns), Dirichlet pins, and known
/// left-kernel vectors of the *unconstrained* operator.  When kernels are
/// present the right-hand side is checked for orthogonality and an
/// incompatible system is refused before factorization.
struct LinearSystem {
    int n = 0;
    std::vector<Triplet> entries;
    Eigen::VectorXd rhs;

    struct Constraint {
        std::vector<std::pair<int, double>> coeffs;
        double value = 0.0;
    };
    std::vector<Constraint> constraints;
    std::vector<std::pair<int, double>> dirichlet;  ///< dof -> pinned value
    std::vector<Eigen::VectorXd> kernels;

    explicit LinearSystem(int size = 0) : n(size), rhs(Eigen::VectorXd::Zero(size)) {}
};

struct SolveReport {
    Eigen::VectorXd x;            ///< primary unknowns (length n)
    Eigen::VectorXd multipliers;  ///< one per constraint
    double residual = 0.0;        ///< augmented-system relative residual
    int iterations = 0;           ///< 0 for the direct path
};

/// Solve the (possibly constrained) system.  Direct sparse LU below
/// `direct_limit` unknowns, ILU-preconditioned BiCGSTAB above.  Throws a
/// compatibility error when a declared kernel is not orthogonal to the rhs
/// (relative tolerance `ktol`), a solver error on factorization failure or
/// when the final relative residual exceeds `rtol`.
SolveReport solve(const LinearSystem& sys, double rtol = 1e-10, double ktol = 1e-8,
                  int direct_limit = 200000);

// --- Bulk assembly (reduced dofs; exact P1 quadrature) ---------------------

/// Diffusion:  + ∫ (D ∇u)·∇φ, D constant per triangle.
void add_bulk_stiffness(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                        const std::function<Eigen::Matrix2d(int)>& D);
/// Convection: + ∫ (b·∇u) φ, b constant per triangle (one-point rule, exact
/// for this integrand).
void add_bulk_convection(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                         const std::function<Vec2(int)>& b);
/// Reaction:   + ∫ w u φ, w constant per triangle (exact P1 x P1 mass).
void add_bulk_mass(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                   const std::function<double(int)>& w);
/// Load ∫ f φ with f constant per triangle.
void add_bulk_load(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                   const std::function<double(int)>& f);
/// Load ∫ f(x) φ with the degree-2 (edge-midpoint) rule, for smooth data.
void add_bulk_load_fn(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                      const std::function<double(const Vec2&)>& f);
/// Load ∫ G·∇φ with G constant per triangle.
void add_bulk_gradient_load(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                            const std::function<Vec2(int)>& G);
/// Vector of ∫ φ_k dy over the fluid region (mean-value constraint row).
Eigen::VectorXd bulk_mass_vector(const CellMesh& mesh, const DofMap& dofs);

// --- Surface assembly (closed P1 loop) --------------------------------------
//
// All surface routines address unknowns through an index map from loop
// position to system dof, so the same code assembles the surface-surface
// block (map k -> offset + k) and the bulk-trace blocks (map k -> bulk dof of
// loop node k).

using LoopDof = std::function<int(int)>;

/// Tangential diffusion: + ∫ w ∂s(u) ∂s(φ) dσ, w constant per segment.
void add_surface_stiffness(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                           const LoopDof& col, const std::function<double(int)>& w);
/// Tangential convection: + ∫ s ∂s(u) φ dσ, speed s constant per segment.
void add_surface_convection(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                            const LoopDof& col, const std::function<double(int)>& speed);
/// Mass: + ∫ w u φ dσ (exact segment P1 x P1), w constant per segment.
void add_surface_mass(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                      const LoopDof& col, const std::function<double(int)>& w);
/// Load ∫ f φ dσ, f constant per segment.
void add_surface_load(Eigen::VectorXd& rhs, const SurfaceMesh& surf, const LoopDof& row,
                      const std::function<double(int)>& f);
/// Load ∫ g ∂s(φ) dσ, g constant per segment.
void add_surface_gradient_load(Eigen::VectorXd& rhs, const SurfaceMesh& surf, const LoopDof& row,
                               const std::function<double(int)>& g);
/// Vector of ∫ ψ_k dσ in loop numbering.
Eigen::VectorXd surface_mass_vector(const SurfaceMesh& surf);

/// Smallest nonzero eigenvalue of the tangential Laplacian on the closed
/// loop (dense generalized eigenproblem; the curve has a few hundred nodes).
double surface_first_eigenvalue(const SurfaceMesh& surf);

/// Dump the assembled (unconstrained) triplets as "row col value" lines.
void write_system(std::ostream& out, const LinearSystem& sys);

}  // namespace displab
