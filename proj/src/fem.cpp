#include "displab/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <ostream>

namespace displab {

DofMap build_dof_map(const CellMesh& mesh) {
    const int nv = mesh.num_nodes();
    DofMap map;
    map.rep.resize(nv);
    for (int v = 0; v < nv; ++v) map.rep[v] = v;

    std::function<int(int)> find = [&](int v) {
        while (map.rep[v] != v) {
            map.rep[v] = map.rep[map.rep[v]];
            v = map.rep[v];
        }
        return v;
    };
    for (const auto& pr : mesh.periodic_pairs) {
        const int a = find(pr[0]);
        const int b = find(pr[1]);
        if (a != b) map.rep[std::max(a, b)] = std::min(a, b);
    }
    for (int v = 0; v < nv; ++v) map.rep[v] = find(v);

    map.index.assign(nv, -1);
    for (int v = 0; v < nv; ++v) {
        if (map.rep[v] == v) {
            map.index[v] = map.n++;
            map.nodes.push_back(v);
        }
    }
    for (int v = 0; v < nv; ++v) map.index[v] = map.index[map.rep[v]];
    return map;
}

Eigen::VectorXd expand_to_nodes(const DofMap& dofs, const Eigen::VectorXd& reduced) {
    Eigen::VectorXd nodal(dofs.rep.size());
    for (int v = 0; v < static_cast<int>(dofs.rep.size()); ++v) nodal[v] = reduced[dofs.index[v]];
    return nodal;
}

Eigen::VectorXd reduce_from_nodes(const DofMap& dofs, const Eigen::VectorXd& nodal) {
    Eigen::VectorXd reduced(dofs.n);
    for (int d = 0; d < dofs.n; ++d) reduced[d] = nodal[dofs.nodes[d]];
    return reduced;
}

P1Element p1_element(const CellMesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& a = mesh.nodes[tri[0]];
    const Vec2& b = mesh.nodes[tri[1]];
    const Vec2& c = mesh.nodes[tri[2]];
    const double twice = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    P1Element el;
    el.area = 0.5 * twice;
    el.grad[0] = Vec2(b.y() - c.y(), c.x() - b.x()) / twice;
    el.grad[1] = Vec2(c.y() - a.y(), a.x() - c.x()) / twice;
    el.grad[2] = Vec2(a.y() - b.y(), b.x() - a.x()) / twice;
    return el;
}

Vec2 p1_gradient(const CellMesh& mesh, int t, const Eigen::VectorXd& nodal) {
    const P1Element el = p1_element(mesh, t);
    const auto& tri = mesh.triangles[t];
    Vec2 g = Vec2::Zero();
    for (int i = 0; i < 3; ++i) g += nodal[tri[i]] * el.grad[i];
    return g;
}

// ---------------------------------------------------------------------------
// Bulk assembly
// ---------------------------------------------------------------------------

void add_bulk_stiffness(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                        const std::function<Eigen::Matrix2d(int)>& D) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const P1Element el = p1_element(mesh, t);
        const Eigen::Matrix2d Dt = D(t);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                sys.entries.emplace_back(dofs.dof(tri[i]), dofs.dof(tri[j]),
                                         el.area * el.grad[i].dot(Dt * el.grad[j]));
    }
}

void add_bulk_convection(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                         const std::function<Vec2(int)>& b) {
    // (b·∇u) is constant per triangle and φ integrates to area/3 per vertex.
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const P1Element el = p1_element(mesh, t);
        const Vec2 bt = b(t);
        const auto& tri = mesh.triangles[t];
        for (int j = 0; j < 3; ++j) {
            const double conv = el.area * bt.dot(el.grad[j]) / 3.0;
            for (int i = 0; i < 3; ++i)
                sys.entries.emplace_back(dofs.dof(tri[i]), dofs.dof(tri[j]), conv);
        }
    }
}

void add_bulk_mass(LinearSystem& sys, const CellMesh& mesh, const DofMap& dofs,
                   const std::function<double(int)>& w) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double scale = w(t) * p1_element(mesh, t).area / 12.0;
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                sys.entries.emplace_back(dofs.dof(tri[i]), dofs.dof(tri[j]),
                                         scale * (i == j ? 2.0 : 1.0));
    }
}

void add_bulk_load(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                   const std::function<double(int)>& f) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double v = f(t) * p1_element(mesh, t).area / 3.0;
        for (int i = 0; i < 3; ++i) rhs[dofs.dof(mesh.triangles[t][i])] += v;
    }
}

void add_bulk_load_fn(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                      const std::function<double(const Vec2&)>& f) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double w = p1_element(mesh, t).area / 3.0;
        const Vec2 m01 = 0.5 * (mesh.nodes[tri[0]] + mesh.nodes[tri[1]]);
        const Vec2 m12 = 0.5 * (mesh.nodes[tri[1]] + mesh.nodes[tri[2]]);
        const Vec2 m20 = 0.5 * (mesh.nodes[tri[2]] + mesh.nodes[tri[0]]);
        const double f01 = f(m01), f12 = f(m12), f20 = f(m20);
        rhs[dofs.dof(tri[0])] += w * 0.5 * (f01 + f20);
        rhs[dofs.dof(tri[1])] += w * 0.5 * (f01 + f12);
        rhs[dofs.dof(tri[2])] += w * 0.5 * (f12 + f20);
    }
}

void add_bulk_gradient_load(Eigen::VectorXd& rhs, const CellMesh& mesh, const DofMap& dofs,
                            const std::function<Vec2(int)>& G) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const P1Element el = p1_element(mesh, t);
        const Vec2 g = G(t);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            rhs[dofs.dof(tri[i])] += el.area * g.dot(el.grad[i]);
    }
}

Eigen::VectorXd bulk_mass_vector(const CellMesh& mesh, const DofMap& dofs) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dofs.n);
    add_bulk_load(v, mesh, dofs, [](int) { return 1.0; });
    return v;
}

// ---------------------------------------------------------------------------
// Surface assembly
// ---------------------------------------------------------------------------

void add_surface_stiffness(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                           const LoopDof& col, const std::function<double(int)>& w) {
    const int m = surf.num_segments();
    for (int k = 0; k < m; ++k) {
        const int a = k, b = (k + 1) % m;
        const double s = w(k) / surf.lengths[k];
        const int ra = row(a), rb = row(b), ca = col(a), cb = col(b);
        sys.entries.emplace_back(ra, ca, s);
        sys.entries.emplace_back(ra, cb, -s);
        sys.entries.emplace_back(rb, ca, -s);
        sys.entries.emplace_back(rb, cb, s);
    }
}

void add_surface_convection(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                            const LoopDof& col, const std::function<double(int)>& speed) {
    // s ∂s(u) is constant per segment; ∫ φ = length/2 at both endpoints.
    const int m = surf.num_segments();
    for (int k = 0; k < m; ++k) {
        const int a = k, b = (k + 1) % m;
        const double half = 0.5 * speed(k);
        const int ra = row(a), rb = row(b), ca = col(a), cb = col(b);
        sys.entries.emplace_back(ra, ca, -half);
        sys.entries.emplace_back(ra, cb, half);
        sys.entries.emplace_back(rb, ca, -half);
        sys.entries.emplace_back(rb, cb, half);
    }
}

void add_surface_mass(LinearSystem& sys, const SurfaceMesh& surf, const LoopDof& row,
                      const LoopDof& col, const std::function<double(int)>& w) {
    const int m = surf.num_segments();
    for (int k = 0; k < m; ++k) {
        const int a = k, b = (k + 1) % m;
        const double s = w(k) * surf.lengths[k] / 6.0;
        const int ra = row(a), rb = row(b), ca = col(a), cb = col(b);
        sys.entries.emplace_back(ra, ca, 2.0 * s);
        sys.entries.emplace_back(ra, cb, s);
        sys.entries.emplace_back(rb, ca, s);
        sys.entries.emplace_back(rb, cb, 2.0 * s);
    }
}

void add_surface_load(Eigen::VectorXd& rhs, const SurfaceMesh& surf, const LoopDof& row,
                      const std::function<double(int)>& f) {
    const int m = surf.num_segments();
    for (int k = 0; k < m; ++k) {
        const double v = 0.5 * f(k) * surf.lengths[k];
        rhs[row(k)] += v;
        rhs[row((k + 1) % m)] += v;
    }
}

void add_surface_gradient_load(Eigen::VectorXd& rhs, const SurfaceMesh& surf, const LoopDof& row,
                               const std::function<double(int)>& g) {
    const int m = surf.num_segments();
    for (int k = 0; k < m; ++k) {
        const double v = g(k);
        rhs[row(k)] -= v;
        rhs[row((k + 1) % m)] += v;
    }
}

Eigen::VectorXd surface_mass_vector(const SurfaceMesh& surf) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(surf.num_nodes());
    add_surface_load(v, surf, [](int k) { return k; }, [](int) { return 1.0; });
    return v;
}

double surface_first_eigenvalue(const SurfaceMesh& surf) {
    const int m = surf.num_nodes();
    if (m < 3) fail(ErrorKind::input, "surface eigenvalue needs a closed loop");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        const int a = k, b = (k + 1) % m;
        const double len = surf.lengths[k];
        const double s = 1.0 / len;
        K(a, a) += s;
        K(b, b) += s;
        K(a, b) -= s;
        K(b, a) -= s;
        M(a, a) += len / 3.0;
        M(b, b) += len / 3.0;
        M(a, b) += len / 6.0;
        M(b, a) += len / 6.0;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
    if (es.info() != Eigen::Success)
        fail(ErrorKind::solver, "surface eigenvalue solve failed");
    return es.eigenvalues()[1];  // [0] is the constant mode at ~0
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

namespace {

struct Assembled {
    SpMat A;
    Eigen::VectorXd b;
    int n_total;
};

Assembled assemble_constrained(const LinearSystem& sys) {
    const int nc = static_cast<int>(sys.constraints.size());
    const int n_total = sys.n + nc;

    std::vector<char> pinned(sys.n, 0);
    Eigen::VectorXd pin_value = Eigen::VectorXd::Zero(sys.n);
    for (const auto& [dof, value] : sys.dirichlet) {
        if (dof < 0 || dof >= sys.n) fail(ErrorKind::input, "Dirichlet pin out of range");
        pinned[dof] = 1;
        pin_value[dof] = value;
    }

    Eigen::VectorXd b(n_total);
    b.head(sys.n) = sys.rhs;
    std::vector<Triplet> trip;
    trip.reserve(sys.entries.size() + 8 * nc + sys.dirichlet.size());
    for (const auto& e : sys.entries) {
        if (pinned[e.row()]) continue;
        if (pinned[e.col()]) {
            b[e.row()] -= e.value() * pin_value[e.col()];
            continue;
        }
        trip.emplace_back(e.row(), e.col(), e.value());
    }
    for (const auto& [dof, value] : sys.dirichlet) {
        trip.emplace_back(dof, dof, 1.0);
        b[dof] = value;
    }
    for (int k = 0; k < nc; ++k) {
        const auto& c = sys.constraints[k];
        double shift = 0.0;
        for (const auto& [dof, coeff] : c.coeffs) {
            if (dof < 0 || dof >= sys.n) fail(ErrorKind::input, "constraint dof out of range");
            if (pinned[dof]) {
                shift += coeff * pin_value[dof];
                continue;
            }
            trip.emplace_back(sys.n + k, dof, coeff);
            trip.emplace_back(dof, sys.n + k, coeff);
        }
        b[sys.n + k] = c.value - shift;
    }

    Assembled out;
    out.n_total = n_total;
    out.A.resize(n_total, n_total);
    out.A.setFromTriplets(trip.begin(), trip.end());
    out.b = std::move(b);
    return out;
}

}  // namespace

SolveReport solve(const LinearSystem& sys, double rtol, double ktol, int direct_limit) {
    if (sys.rhs.size() != sys.n) fail(ErrorKind::input, "rhs size does not match system");
    for (const auto& k : sys.kernels) {
        const double proj = std::abs(k.dot(sys.rhs));
        const double scale = k.norm() * sys.rhs.norm();
        if (proj > ktol * std::max(scale, 1e-300) && proj > 1e-14)
            fail(ErrorKind::compatibility,
                 "right-hand side is not orthogonal to the operator kernel (|k.b| = " +
                     std::to_string(proj) + ", scale = " + std::to_string(scale) + ")");
    }

    Assembled as = assemble_constrained(sys);
    if (!as.b.allFinite()) fail(ErrorKind::numeric, "non-finite right-hand side");

    SolveReport report;
    Eigen::VectorXd x;
    if (as.n_total <= direct_limit) {
        Eigen::SparseLU<SpMat> lu;
        lu.analyzePattern(as.A);
        lu.factorize(as.A);
        if (lu.info() != Eigen::Success)
            fail(ErrorKind::solver, "sparse LU factorization failed (singular system?)");
        x = lu.solve(as.b);
    } else {
        Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> krylov;
        krylov.setTolerance(rtol * 1e-2);
        krylov.setMaxIterations(2000);
        krylov.compute(as.A);
        x = krylov.solve(as.b);
        report.iterations = static_cast<int>(krylov.iterations());
        if (krylov.info() != Eigen::Success)
            fail(ErrorKind::solver, "iterative solve did not converge");
    }
    if (!x.allFinite()) fail(ErrorKind::numeric, "solver produced non-finite values");

    const double rnorm = (as.A * x - as.b).norm();
    const double scale = as.b.norm() + as.A.norm() * x.norm();
    report.residual = rnorm / std::max(scale, 1e-300);
    if (report.residual > rtol)
        fail(ErrorKind::solver,
             "linear solve residual " + std::to_string(report.residual) + " exceeds tolerance");

    report.x = x.head(sys.n);
    report.multipliers = x.tail(as.n_total - sys.n);
    return report;
}

void write_system(std::ostream& out, const LinearSystem& sys) {
    char buf[64];
    for (const auto& e : sys.entries) {
        std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", e.row(), e.col(), e.value());
        out << buf;
    }
}

}  // namespace displab
