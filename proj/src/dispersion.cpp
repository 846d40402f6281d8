#include "displab/dispersion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "displab/errors.hpp"

namespace displab {

double smallest_eigenvalue_sym(const Eigen::Matrix2d& A) {
    const double a = A(0, 0);
    const double d = A(1, 1);
    const double off = 0.5 * (A(0, 1) + A(1, 0));
    return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + off * off);
}

DispersionTensor assemble_dispersion(const CellMesh& mesh, const SurfaceMesh& surf,
                                     const VelocityField& vel, const CoefficientSet& coeffs,
                                     const CellSolution& sol) {
    const double w = sol.surface_weight;
    const int m = surf.num_nodes();

    DispersionTensor out;
    for (auto& g : out.groups) g.setZero();

    // Per-triangle corrector gradients.
    std::array<std::vector<Vec2>, 2> grad;
    for (int i = 0; i < 2; ++i) {
        grad[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(mesh.num_triangles()));
        for (int t = 0; t < mesh.num_triangles(); ++t)
            grad[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] =
                p1_gradient(mesh, t, sol.dir[static_cast<std::size_t>(i)].chi);
    }

    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double area = mesh.triangle_area(t);
        const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2& b = vel.bulk[static_cast<std::size_t>(t)];
        for (int i = 0; i < 2; ++i) {
            const Vec2 gi = grad[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
            const Vec2 di = gi + Vec2::Unit(i);
            for (int j = 0; j < 2; ++j) {
                const Vec2 gj = grad[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
                const Vec2 dj = gj + Vec2::Unit(j);
                out.groups[0](i, j) += area * (coeffs.D * di).dot(dj);
                out.groups[3](i, j) +=
                    area * ((coeffs.D * gj)(i) - (coeffs.D * gi)(j));
                // One-point rule, exact: the integrand is linear.
                const double mean_j = (sol.dir[static_cast<std::size_t>(j)].chi[tri[0]] +
                                       sol.dir[static_cast<std::size_t>(j)].chi[tri[1]] +
                                       sol.dir[static_cast<std::size_t>(j)].chi[tri[2]]) /
                                      3.0;
                out.groups[5](i, j) += area * b.dot(gi) * mean_j;
            }
        }
    }

    for (int s = 0; s < m; ++s) {
        const int a = s, bpos = (s + 1) % m;
        const double L = surf.lengths[static_cast<std::size_t>(s)];
        const Vec2& tg = surf.tangents[static_cast<std::size_t>(s)];
        const double wd = tg.dot(coeffs.Ds * tg);
        const double speed = vel.surface[static_cast<std::size_t>(s)];
        for (int i = 0; i < 2; ++i) {
            const Corrector& ci = sol.dir[static_cast<std::size_t>(i)];
            const double dia = ci.chi[surf.nodes[static_cast<std::size_t>(a)]] - ci.omega[a];
            const double dib = ci.chi[surf.nodes[static_cast<std::size_t>(bpos)]] - ci.omega[bpos];
            const double doi = (ci.omega[bpos] - ci.omega[a]) / L;
            for (int j = 0; j < 2; ++j) {
                const Corrector& cj = sol.dir[static_cast<std::size_t>(j)];
                const double dja = cj.chi[surf.nodes[static_cast<std::size_t>(a)]] - cj.omega[a];
                const double djb = cj.chi[surf.nodes[static_cast<std::size_t>(bpos)]] - cj.omega[bpos];
                const double doj = (cj.omega[bpos] - cj.omega[a]) / L;
                // Exact P1 x P1 segment quadrature of the mismatch product.
                out.groups[1](i, j) += coeffs.kappa * w * (L / 6.0) *
                                       (2.0 * dia * dja + dia * djb + dib * dja +
                                        2.0 * dib * djb);
                out.groups[2](i, j) += w * wd * L * (doi + tg[i]) * (doj + tg[j]);
                out.groups[4](i, j) += w * wd * L * (doj * tg[i] - doi * tg[j]);
                out.groups[5](i, j) +=
                    w * speed * doi * L * 0.5 * (cj.omega[a] + cj.omega[bpos]);
            }
        }
    }

    out.A_sym = out.groups[0] + out.groups[1] + out.groups[2];
    out.A = out.A_sym + out.groups[3] + out.groups[4] + out.groups[5];
    out.lambda_min = smallest_eigenvalue_sym(out.A);
    const double scale = out.A.norm();
    out.sym_gap =
        (0.5 * (out.A + out.A.transpose()) - out.A_sym).norm() / (scale > 0.0 ? scale : 1.0);
    return out;
}

Eigen::Matrix2d assemble_dispersion_flux(const CellMesh& mesh, const SurfaceMesh& surf,
                                         const CoefficientSet& coeffs,
                                         const CellSolution& sol) {
    const int m = surf.num_nodes();
    for (const Corrector& c : sol.dir)
        if (c.xi.size() == 0 || (m > 0 && c.Xi.size() == 0))
            fail(ErrorKind::input, "flux-based tensor needs the auxiliary potentials");

    const double w = sol.surface_weight;
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();

    double area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double at = mesh.triangle_area(t);
        area += at;
        for (int i = 0; i < 2; ++i) {
            const Vec2 gxi = p1_gradient(mesh, t, sol.dir[static_cast<std::size_t>(i)].xi);
            for (int j = 0; j < 2; ++j) {
                const Vec2 gchi = p1_gradient(mesh, t, sol.dir[static_cast<std::size_t>(j)].chi);
                A(i, j) += at * ((coeffs.D * gchi)(i) + gxi.dot(gchi));
            }
        }
    }
    A += area * coeffs.D;

    for (int s = 0; s < m; ++s) {
        const int a = s, bpos = (s + 1) % m;
        const double L = surf.lengths[static_cast<std::size_t>(s)];
        const Vec2& tg = surf.tangents[static_cast<std::size_t>(s)];
        const double wd = tg.dot(coeffs.Ds * tg);
        for (int i = 0; i < 2; ++i) {
            const Corrector& ci = sol.dir[static_cast<std::size_t>(i)];
            const double dXi = (ci.Xi[bpos] - ci.Xi[a]) / L;
            for (int j = 0; j < 2; ++j) {
                const Corrector& cj = sol.dir[static_cast<std::size_t>(j)];
                const double doj = (cj.omega[bpos] - cj.omega[a]) / L;
                A(i, j) += w * L * (wd * tg[i] * tg[j] + wd * doj * tg[i] + dXi * doj);
            }
        }
    }
    return A;
}

std::vector<double> default_concentration_grid(int linear_count, int log_count,
                                               double u_max) {
    if (linear_count < 1 || log_count < 1 || !(u_max > 1.0))
        fail(ErrorKind::input, "concentration grid needs positive counts and u_max > 1");
    std::vector<double> grid;
    grid.push_back(0.0);
    for (int k = 1; k <= linear_count; ++k)
        grid.push_back(static_cast<double>(k) / static_cast<double>(linear_count));
    for (int k = 1; k <= log_count; ++k)
        grid.push_back(std::pow(u_max, static_cast<double>(k) / static_cast<double>(log_count)));
    return grid;
}

DispersionTable build_dispersion_table(const CellMesh& mesh, const SurfaceMesh& surf,
                                       const VelocityField& vel,
                                       const CoefficientSet& coeffs,
                                       const std::vector<double>& u_values, int jobs) {
    coeffs.validate();
    if (u_values.empty()) fail(ErrorKind::input, "dispersion table needs sample points");
    for (std::size_t k = 0; k + 1 < u_values.size(); ++k)
        if (!(u_values[k] < u_values[k + 1]) || u_values[k] < 0.0)
            fail(ErrorKind::input,
                 "sample concentrations must be nonnegative and strictly increasing");

    DispersionTable table;
    table.coeffs = coeffs;
    table.u0 = u_values;
    table.fprime.resize(u_values.size());
    table.rows.resize(u_values.size());

    // Worker pool over sample indices; results land in their slot, so the
    // table is identical for any job count.
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_lock;
    auto work = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= u_values.size() || failed.load()) break;
            try {
                const CellSolution sol = solve_cell(mesh, surf, vel, coeffs, u_values[k]);
                table.fprime[k] = sol.fprime;
                table.rows[k] = assemble_dispersion(mesh, surf, vel, coeffs, sol);
            } catch (...) {
                std::lock_guard<std::mutex> hold(error_lock);
                if (!failed.exchange(true)) {
                    try {
                        throw;
                    } catch (const std::exception& e) {
                        error_message = e.what();
                    }
                }
            }
        }
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(u_values.size())));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) fail(ErrorKind::solver, "dispersion table: " + error_message);

    const CellSolution lim = solve_limit_vanishing_slope(mesh, surf, vel, coeffs);
    table.limit = assemble_dispersion(mesh, surf, vel, coeffs, lim);
    return table;
}

Eigen::Matrix2d DispersionTable::eval_at_slope(double fp) const {
    if (rows.empty()) fail(ErrorKind::input, "empty dispersion table");
    if (!(fp >= 0.0)) fail(ErrorKind::input, "adsorption slope must be nonnegative");

    // Samples are descending in f' (ascending in u0); the limit anchors 0.
    if (fp >= fprime.front()) return rows.front().A;
    const std::size_t nrows = rows.size();
    for (std::size_t k = 0; k + 1 < nrows; ++k) {
        if (fp >= fprime[k + 1]) {
            const double span = fprime[k] - fprime[k + 1];
            const double s = span > 0.0 ? (fp - fprime[k + 1]) / span : 0.0;
            return s * rows[k].A + (1.0 - s) * rows[k + 1].A;
        }
    }
    const double tail = fprime.back();
    const double s = tail > 0.0 ? fp / tail : 0.0;
    return s * rows.back().A + (1.0 - s) * limit.A;
}

Eigen::Matrix2d DispersionTable::eval(double u) const {
    return eval_at_slope(coeffs.isotherm.slope(std::max(u, 0.0)));
}

}  // namespace displab
