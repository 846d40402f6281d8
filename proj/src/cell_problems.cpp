#include "displab/cell_problems.hpp"

#include <cmath>
#include <limits>

#include "displab/errors.hpp"

namespace displab {

namespace {

void require_spd(const Eigen::Matrix2d& M, const char* what) {
    if (!M.allFinite()) fail(ErrorKind::coefficient, std::string(what) + " has non-finite entries");
    if ((M - M.transpose()).norm() > 1e-12 * std::max(1.0, M.norm()))
        fail(ErrorKind::coefficient, std::string(what) + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M);
    if (!(es.eigenvalues()(0) > 0.0))
        fail(ErrorKind::coefficient, std::string(what) + " must be positive definite");
}

/// Tangential weight t·(Ds t) of the surface diffusion on one segment.
double tangential_weight(const SurfaceMesh& surf, const Eigen::Matrix2d& Ds, int s) {
    const Vec2& t = surf.tangents[static_cast<std::size_t>(s)];
    return t.dot(Ds * t);
}

/// Zero-joint-mean constraint over bulk and (optionally) surface unknowns.
LinearSystem::Constraint joint_mean_constraint(const CellMesh& mesh, const DofMap& dofs,
                                               const SurfaceMesh& surf, int surface_offset) {
    LinearSystem::Constraint c;
    const Eigen::VectorXd bm = bulk_mass_vector(mesh, dofs);
    for (int d = 0; d < dofs.n; ++d) c.coeffs.push_back({d, bm[d]});
    if (surface_offset >= 0 && !surf.empty()) {
        const Eigen::VectorXd sm = surface_mass_vector(surf);
        for (int k = 0; k < surf.num_nodes(); ++k)
            c.coeffs.push_back({surface_offset + k, sm[k]});
    }
    c.value = 0.0;
    return c;
}

/// Relative residual of x in the system described by `sys` (constraints and
/// pins ignored; callers pass systems whose solution satisfies them).
double relative_residual(const LinearSystem& sys, const Eigen::VectorXd& x) {
    SpMat A(sys.n, sys.n);
    A.setFromTriplets(sys.entries.begin(), sys.entries.end());
    // The unit-vector floor keeps the measure meaningful when solution and
    // data are both (numerically) zero, as on the unperforated cell.
    const double denom = sys.rhs.norm() + A.norm() * std::max(x.norm(), 1.0);
    return (A * x - sys.rhs).norm() / denom;
}

}  // namespace

void CoefficientSet::validate() const {
    isotherm.validate();
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        fail(ErrorKind::coefficient, "exchange rate kappa must be positive");
    require_spd(D, "bulk diffusion tensor");
    require_spd(Ds, "surface diffusion tensor");
}

const char* to_string(CellRegime regime) {
    switch (regime) {
        case CellRegime::coupled: return "coupled";
        case CellRegime::vanishing_slope: return "vanishing-slope";
        case CellRegime::fast_surface: return "fast-surface";
        case CellRegime::fast_exchange: return "fast-exchange";
    }
    return "?";
}

LinearSystem assemble_cell_system(const CellMesh& mesh, const SurfaceMesh& surf,
                                  const VelocityField& vel, const CoefficientSet& coeffs,
                                  double fprime, int direction, double surface_row_scale) {
    const DofMap dofs = build_dof_map(mesh);
    const int nb = dofs.n;
    const int m = surf.num_nodes();
    LinearSystem sys(nb + m);

    const Vec2 e = Vec2::Unit(direction);

    // Bulk operator and loads.
    add_bulk_stiffness(sys, mesh, dofs, [&](int) { return coeffs.D; });
    add_bulk_convection(sys, mesh, dofs,
                        [&](int t) { return vel.bulk[static_cast<std::size_t>(t)]; });
    add_bulk_load(sys.rhs, mesh, dofs, [&](int t) {
        return (vel.drift - vel.bulk[static_cast<std::size_t>(t)]).dot(e);
    });
    add_bulk_gradient_load(sys.rhs, mesh, dofs,
                           [&](int) { return Vec2(-(coeffs.D * e)); });

    if (m > 0) {
        const LoopDof trace = [&dofs, &surf](int k) {
            return dofs.dof(surf.nodes[static_cast<std::size_t>(k)]);
        };
        const LoopDof sdof = [nb](int k) { return nb + k; };

        // Exchange coupling: bulk rows carry kappa f', surface rows kappa
        // times the row scale (scale f' recovers the weighted variational
        // form, scale 1 the row-equivalent system that is solved).
        const double wb = coeffs.kappa * fprime;
        const double ws = coeffs.kappa * surface_row_scale;
        add_surface_mass(sys, surf, trace, trace, [wb](int) { return wb; });
        add_surface_mass(sys, surf, trace, sdof, [wb](int) { return -wb; });
        add_surface_mass(sys, surf, sdof, sdof, [ws](int) { return ws; });
        add_surface_mass(sys, surf, sdof, trace, [ws](int) { return -ws; });

        // Tangential transport on the surface rows.
        add_surface_stiffness(sys, surf, sdof, sdof, [&](int s) {
            return surface_row_scale * tangential_weight(surf, coeffs.Ds, s);
        });
        add_surface_convection(sys, surf, sdof, sdof, [&](int s) {
            return surface_row_scale * vel.surface[static_cast<std::size_t>(s)];
        });

        add_surface_load(sys.rhs, surf, sdof, [&](int s) {
            const Vec2 bs = vel.surface[static_cast<std::size_t>(s)] *
                            surf.tangents[static_cast<std::size_t>(s)];
            return surface_row_scale * (vel.drift - bs).dot(e);
        });
        add_surface_gradient_load(sys.rhs, surf, sdof, [&](int s) {
            return surface_row_scale *
                   (-surf.tangents[static_cast<std::size_t>(s)].dot(coeffs.Ds * e));
        });
    }
    return sys;
}

CellSolution solve_cell_at_slope(const CellMesh& mesh, const SurfaceMesh& surf,
                                 const VelocityField& vel, const CoefficientSet& coeffs,
                                 double fprime, bool with_aux) {
    coeffs.validate();
    if (!(fprime >= 0.0) || !std::isfinite(fprime))
        fail(ErrorKind::coefficient, "adsorption slope must be finite and nonnegative");

    const DofMap dofs = build_dof_map(mesh);
    const int nb = dofs.n;
    const int m = surf.num_nodes();

    CellSolution sol;
    sol.fprime = fprime;
    sol.surface_weight = fprime;
    sol.regime = fprime < 1e-9 ? CellRegime::vanishing_slope : CellRegime::coupled;

    for (int i = 0; i < 2; ++i) {
        LinearSystem sys = assemble_cell_system(mesh, surf, vel, coeffs, fprime, i, 1.0);

        // Left kernel of the solved form: constants in the bulk, f' times
        // constants on the surface.
        Eigen::VectorXd k(nb + m);
        k.head(nb).setOnes();
        k.tail(m).setConstant(fprime);
        sys.kernels.push_back(k);
        sys.constraints.push_back(joint_mean_constraint(mesh, dofs, surf, nb));

        const SolveReport rep = solve(sys);
        sol.dir[static_cast<std::size_t>(i)].chi = expand_to_nodes(dofs, rep.x.head(nb));
        sol.dir[static_cast<std::size_t>(i)].omega = rep.x.tail(m);
        sol.iterations[static_cast<std::size_t>(i)] = rep.iterations;

        // Row equivalence: the same solution must satisfy the weighted
        // variational form (surface rows scaled by f').
        const double check_scale = fprime > 0.0 ? fprime : 1.0;
        const LinearSystem weighted =
            assemble_cell_system(mesh, surf, vel, coeffs, fprime, i, check_scale);
        const double res = relative_residual(weighted, rep.x);
        sol.residual[static_cast<std::size_t>(i)] = res;
        if (!(res < 1e-8))
            fail(ErrorKind::solver, "cell corrector violates the weighted variational form");
    }

    if (with_aux) {
        const FluxPotentials aux = solve_flux_potentials(mesh, surf, vel);
        for (int i = 0; i < 2; ++i) {
            sol.dir[static_cast<std::size_t>(i)].xi = aux.xi[static_cast<std::size_t>(i)];
            sol.dir[static_cast<std::size_t>(i)].Xi = aux.Xi[static_cast<std::size_t>(i)];
        }
    }
    return sol;
}

CellSolution solve_cell(const CellMesh& mesh, const SurfaceMesh& surf,
                        const VelocityField& vel, const CoefficientSet& coeffs, double u0,
                        bool with_aux) {
    if (!std::isfinite(u0)) fail(ErrorKind::input, "concentration must be finite");
    CellSolution sol =
        solve_cell_at_slope(mesh, surf, vel, coeffs, coeffs.isotherm.slope(u0), with_aux);
    sol.u0 = u0;
    return sol;
}

CellSolution solve_limit_vanishing_slope(const CellMesh& mesh, const SurfaceMesh& surf,
                                         const VelocityField& vel,
                                         const CoefficientSet& coeffs) {
    CellSolution sol = solve_cell_at_slope(mesh, surf, vel, coeffs, 0.0);
    sol.regime = CellRegime::vanishing_slope;
    sol.u0 = std::numeric_limits<double>::quiet_NaN();
    return sol;
}

CellSolution solve_limit_fast_surface(const CellMesh& mesh, const SurfaceMesh& surf,
                                      const VelocityField& vel, const CoefficientSet& coeffs,
                                      double u0) {
    coeffs.validate();
    if (surf.empty())
        fail(ErrorKind::input, "the fast-surface limit needs an obstacle surface");
    const double fprime = coeffs.isotherm.slope(u0);

    const DofMap dofs = build_dof_map(mesh);
    const int nb = dofs.n;
    const int m = surf.num_nodes();
    const Eigen::VectorXd sm = surface_mass_vector(surf);
    const double total = surf.total_length;

    CellSolution sol;
    sol.regime = CellRegime::fast_surface;
    sol.u0 = u0;
    sol.fprime = fprime;
    sol.surface_weight = fprime;

    for (int i = 0; i < 2; ++i) {
        const Vec2 e = Vec2::Unit(i);
        LinearSystem sys(nb);
        add_bulk_stiffness(sys, mesh, dofs, [&](int) { return coeffs.D; });
        add_bulk_convection(sys, mesh, dofs,
                            [&](int t) { return vel.bulk[static_cast<std::size_t>(t)]; });
        add_bulk_load(sys.rhs, mesh, dofs, [&](int t) {
            return (vel.drift - vel.bulk[static_cast<std::size_t>(t)]).dot(e);
        });
        add_bulk_gradient_load(sys.rhs, mesh, dofs,
                               [&](int) { return Vec2(-(coeffs.D * e)); });

        // The surface corrector is affine along the loop, omega = c - y_i,
        // with c the loop mean of (trace chi + y_i); substituting it into
        // the exchange term leaves a nonlocal rank-one correction on the
        // trace unknowns.
        const LoopDof trace = [&dofs, &surf](int k) {
            return dofs.dof(surf.nodes[static_cast<std::size_t>(k)]);
        };
        const double wb = coeffs.kappa * fprime;
        add_surface_mass(sys, surf, trace, trace, [wb](int) { return wb; });
        for (int k = 0; k < m; ++k)
            for (int l = 0; l < m; ++l)
                sys.entries.emplace_back(trace(k), trace(l), -wb * sm[k] * sm[l] / total);

        // Trace load from the known affine part of omega.
        Eigen::VectorXd y(m);
        for (int k = 0; k < m; ++k)
            y[k] = mesh.nodes[static_cast<std::size_t>(surf.nodes[static_cast<std::size_t>(k)])][i];
        Eigen::VectorXd My = Eigen::VectorXd::Zero(m);
        for (int s = 0; s < m; ++s) {
            const int a = s, b = (s + 1) % m;
            const double L = surf.lengths[static_cast<std::size_t>(s)];
            My[a] += (L / 6.0) * (2.0 * y[a] + y[b]);
            My[b] += (L / 6.0) * (y[a] + 2.0 * y[b]);
        }
        const double sy = sm.dot(y);
        for (int k = 0; k < m; ++k) sys.rhs[trace(k)] -= wb * (My[k] - sm[k] * sy / total);

        sys.kernels.push_back(Eigen::VectorXd::Ones(nb));
        sys.constraints.push_back(joint_mean_constraint(mesh, dofs, surf, -1));

        const SolveReport rep = solve(sys);
        Corrector& c = sol.dir[static_cast<std::size_t>(i)];
        c.chi = expand_to_nodes(dofs, rep.x);
        c.omega.resize(m);
        double trace_mean = 0.0;
        for (int k = 0; k < m; ++k) trace_mean += sm[k] * (c.chi[surf.nodes[static_cast<std::size_t>(k)]] + y[k]);
        trace_mean /= total;
        for (int k = 0; k < m; ++k) c.omega[k] = trace_mean - y[k];
        sol.residual[static_cast<std::size_t>(i)] = rep.residual;
        sol.iterations[static_cast<std::size_t>(i)] = rep.iterations;
    }
    return sol;
}

CellSolution solve_limit_fast_exchange(const CellMesh& mesh, const SurfaceMesh& surf,
                                       const VelocityField& vel,
                                       const CoefficientSet& coeffs) {
    coeffs.validate();
    if (surf.empty())
        fail(ErrorKind::input, "the fast-exchange limit needs an obstacle surface");

    const DofMap dofs = build_dof_map(mesh);
    const int nb = dofs.n;
    const int m = surf.num_nodes();

    CellSolution sol;
    sol.regime = CellRegime::fast_exchange;
    sol.u0 = std::numeric_limits<double>::quiet_NaN();
    sol.fprime = std::numeric_limits<double>::quiet_NaN();
    sol.surface_weight = 1.0;

    const LoopDof trace = [&dofs, &surf](int k) {
        return dofs.dof(surf.nodes[static_cast<std::size_t>(k)]);
    };

    for (int i = 0; i < 2; ++i) {
        const Vec2 e = Vec2::Unit(i);
        LinearSystem sys(nb);
        add_bulk_stiffness(sys, mesh, dofs, [&](int) { return coeffs.D; });
        add_bulk_convection(sys, mesh, dofs,
                            [&](int t) { return vel.bulk[static_cast<std::size_t>(t)]; });
        add_bulk_load(sys.rhs, mesh, dofs, [&](int t) {
            return (vel.drift - vel.bulk[static_cast<std::size_t>(t)]).dot(e);
        });
        add_bulk_gradient_load(sys.rhs, mesh, dofs,
                               [&](int) { return Vec2(-(coeffs.D * e)); });

        // Merged corrector: the surface operator acts directly on the bulk
        // trace, the exchange term disappears.
        add_surface_stiffness(sys, surf, trace, trace,
                              [&](int s) { return tangential_weight(surf, coeffs.Ds, s); });
        add_surface_convection(sys, surf, trace, trace, [&](int s) {
            return vel.surface[static_cast<std::size_t>(s)];
        });
        add_surface_load(sys.rhs, surf, trace, [&](int s) {
            const Vec2 bs = vel.surface[static_cast<std::size_t>(s)] *
                            surf.tangents[static_cast<std::size_t>(s)];
            return (vel.drift - bs).dot(e);
        });
        add_surface_gradient_load(sys.rhs, surf, trace, [&](int s) {
            return -surf.tangents[static_cast<std::size_t>(s)].dot(coeffs.Ds * e);
        });

        sys.kernels.push_back(Eigen::VectorXd::Ones(nb));

        // Same normalization as the coupled problem: zero joint mean of the
        // bulk field and its trace.
        LinearSystem::Constraint c = joint_mean_constraint(mesh, dofs, surf, -1);
        const Eigen::VectorXd smv = surface_mass_vector(surf);
        for (int k = 0; k < m; ++k) c.coeffs.push_back({trace(k), smv[k]});
        sys.constraints.push_back(c);

        const SolveReport rep = solve(sys);
        Corrector& cr = sol.dir[static_cast<std::size_t>(i)];
        cr.chi = expand_to_nodes(dofs, rep.x);
        cr.omega.resize(m);
        for (int k = 0; k < m; ++k)
            cr.omega[k] = cr.chi[surf.nodes[static_cast<std::size_t>(k)]];
        sol.residual[static_cast<std::size_t>(i)] = rep.residual;
        sol.iterations[static_cast<std::size_t>(i)] = rep.iterations;
    }
    return sol;
}

FluxPotentials solve_flux_potentials(const CellMesh& mesh, const SurfaceMesh& surf,
                                     const VelocityField& vel) {
    const DofMap dofs = build_dof_map(mesh);
    const int nb = dofs.n;
    const int m = surf.num_nodes();
    FluxPotentials out;

    for (int i = 0; i < 2; ++i) {
        const Vec2 e = Vec2::Unit(i);

        // Bulk potential: plain Laplacian driven by the velocity
        // fluctuation, natural boundary conditions, zero mean.
        LinearSystem sys(nb);
        add_bulk_stiffness(sys, mesh, dofs, [](int) { return Eigen::Matrix2d::Identity(); });
        add_bulk_load(sys.rhs, mesh, dofs, [&](int t) {
            return (vel.drift - vel.bulk[static_cast<std::size_t>(t)]).dot(e);
        });
        sys.kernels.push_back(Eigen::VectorXd::Ones(nb));
        sys.constraints.push_back(joint_mean_constraint(mesh, dofs, surf, -1));
        out.xi[static_cast<std::size_t>(i)] = expand_to_nodes(dofs, solve(sys).x);

        // Tangential counterpart on the loop.
        if (m > 0) {
            const LoopDof ident = [](int k) { return k; };
            LinearSystem ssys(m);
            add_surface_stiffness(ssys, surf, ident, ident, [](int) { return 1.0; });
            add_surface_load(ssys.rhs, surf, ident, [&](int s) {
                const Vec2 bs = vel.surface[static_cast<std::size_t>(s)] *
                                surf.tangents[static_cast<std::size_t>(s)];
                return (vel.drift - bs).dot(e);
            });
            ssys.kernels.push_back(Eigen::VectorXd::Ones(m));
            LinearSystem::Constraint c;
            const Eigen::VectorXd smv = surface_mass_vector(surf);
            for (int k = 0; k < m; ++k) c.coeffs.push_back({k, smv[k]});
            ssys.constraints.push_back(c);
            out.Xi[static_cast<std::size_t>(i)] = solve(ssys).x;
        }
    }
    return out;
}

}  // namespace displab
