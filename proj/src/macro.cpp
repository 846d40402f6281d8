#include "displab/macro.hpp"

#include <cmath>

#include "displab/errors.hpp"
#include "displab/fem.hpp"

namespace displab {

namespace {

/// One grid face with the linear combination of cell values giving the
/// normal component of A grad(u) there (tensor lagged at the previous time
/// level).  `left` and `right` are the adjacent cells in the face-normal
/// direction; the flux enters their balance with opposite signs.
struct Face {
    int left = 0;
    int right = 0;
    int ncoef = 0;
    std::array<std::pair<int, double>, 6> coef;

    void add(int cell, double w) {
        for (int k = 0; k < ncoef; ++k)
            if (coef[static_cast<std::size_t>(k)].first == cell) {
                coef[static_cast<std::size_t>(k)].second += w;
                return;
            }
        coef[static_cast<std::size_t>(ncoef++)] = {cell, w};
    }
};

int wrap(int i, int n) { return (i % n + n) % n; }

/// Build all faces with flux coefficients from the lagged concentrations.
std::vector<Face> build_faces(const MacroState& st, const DispersionTable& table) {
    const int n = st.n;
    const double dx = st.dx;
    std::vector<Face> faces;

    if (st.dim == 1) {
        faces.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int j = wrap(i + 1, n);
            Face f;
            f.left = i;
            f.right = j;
            const double a = table.eval(0.5 * (st.u[i] + st.u[j]))(0, 0);
            f.add(j, a / dx);
            f.add(i, -a / dx);
            faces.push_back(f);
        }
        return faces;
    }

    const auto cell = [n](int ix, int iy) { return wrap(ix, n) + n * wrap(iy, n); };
    faces.reserve(static_cast<std::size_t>(2 * n * n));
    for (int d = 0; d < 2; ++d) {
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const int i = cell(ix, iy);
                const int j = d == 0 ? cell(ix + 1, iy) : cell(ix, iy + 1);
                Face f;
                f.left = i;
                f.right = j;
                const Eigen::Matrix2d A = table.eval(0.5 * (st.u[i] + st.u[j]));
                // Normal derivative across the face.
                f.add(j, A(d, d) / dx);
                f.add(i, -A(d, d) / dx);
                // Tangential derivative: average of the central differences
                // of the two adjacent cells.
                const int k = 1 - d;
                const double w = A(d, k) / (4.0 * dx);
                const auto shift = [&](int base_x, int base_y, int off) {
                    return k == 0 ? cell(base_x + off, base_y) : cell(base_x, base_y + off);
                };
                const int jx = d == 0 ? ix + 1 : ix;
                const int jy = d == 0 ? iy : iy + 1;
                f.add(shift(ix, iy, +1), w);
                f.add(shift(ix, iy, -1), -w);
                f.add(shift(jx, jy, +1), w);
                f.add(shift(jx, jy, -1), -w);
                faces.push_back(f);
            }
        }
    }
    return faces;
}

double face_flux(const Face& f, const Eigen::VectorXd& u) {
    double s = 0.0;
    for (int k = 0; k < f.ncoef; ++k)
        s += f.coef[static_cast<std::size_t>(k)].second * u[f.coef[static_cast<std::size_t>(k)].first];
    return s;
}

}  // namespace

void MacroConfig::validate() const {
    if (dim != 1 && dim != 2) fail(ErrorKind::input, "macro grid dimension must be 1 or 2");
    if (cells < 4) fail(ErrorKind::input, "macro grid needs at least 4 cells per dimension");
    if (!(length > 0.0)) fail(ErrorKind::input, "macro domain length must be positive");
    if (!(dt >= 0.0) || !std::isfinite(dt)) fail(ErrorKind::input, "time step must be nonnegative");
    if (!(t_end > 0.0)) fail(ErrorKind::input, "final time must be positive");
    if (initial != "gaussian" && initial != "cosine" && initial != "constant" &&
        initial != "explicit")
        fail(ErrorKind::input, "initial profile must be gaussian, cosine, constant or explicit");
    if (surface_init != "equilibrium" && surface_init != "well-prepared" &&
        surface_init != "constant")
        fail(ErrorKind::input,
             "surface initial data must be equilibrium, well-prepared or constant");
    const std::size_t total = dim == 1 ? static_cast<std::size_t>(cells)
                                       : static_cast<std::size_t>(cells) * cells;
    if (initial == "explicit" && u_in.size() != total)
        fail(ErrorKind::input, "explicit initial data needs one bulk value per cell");
    if (!v_in.empty() && v_in.size() != total)
        fail(ErrorKind::input, "explicit surface data needs one value per cell or none");
    if (!(width > 0.0)) fail(ErrorKind::input, "profile width must be positive");
    if (!std::isfinite(baseline) || !std::isfinite(amplitude) || !std::isfinite(surface_value))
        fail(ErrorKind::input, "profile parameters must be finite");
}

double initial_profile(const MacroConfig& cfg, const Vec2& x) {
    if (cfg.initial == "constant") return cfg.baseline + cfg.amplitude;
    if (cfg.initial == "cosine") {
        double v = std::cos(2.0 * M_PI * x.x() / cfg.length);
        if (cfg.dim == 2) v *= std::cos(2.0 * M_PI * x.y() / cfg.length);
        return cfg.baseline + cfg.amplitude * v;
    }
    // Periodic gaussian bump centered in the box.
    double r2 = 0.0;
    for (int d = 0; d < cfg.dim; ++d) {
        double dd = std::abs(x[d] - 0.5 * cfg.length);
        dd = std::min(dd, cfg.length - dd);
        r2 += dd * dd;
    }
    return cfg.baseline + cfg.amplitude * std::exp(-r2 / (2.0 * cfg.width * cfg.width));
}

MacroState initial_state(const MacroConfig& cfg, const Isotherm& iso,
                         const MacroMeasures& meas) {
    cfg.validate();
    iso.validate();
    if (!(meas.bulk > 0.0) || !(meas.surface >= 0.0))
        fail(ErrorKind::coefficient, "cell measures must satisfy bulk > 0, surface >= 0");

    MacroState st;
    st.dim = cfg.dim;
    st.n = cfg.cells;
    st.dx = cfg.length / cfg.cells;
    const int total = cfg.dim == 1 ? cfg.cells : cfg.cells * cfg.cells;
    st.u.resize(total);
    st.z.resize(total);

    for (int c = 0; c < total; ++c) {
        const auto [u_in, v_in] = initial_pair(cfg, iso, meas, c);
        st.z[c] = meas.bulk * u_in + meas.surface * v_in;
        st.u[c] = invert_capacity(iso, meas.bulk, meas.surface, st.z[c]);
    }
    return st;
}

std::pair<double, double> initial_pair(const MacroConfig& cfg, const Isotherm& iso,
                                       const MacroMeasures& meas, int cell) {
    const double dx = cfg.length / cfg.cells;
    const int ix = cell % cfg.cells;
    const int iy = cell / cfg.cells;
    const Vec2 x((ix + 0.5) * dx, cfg.dim == 2 ? (iy + 0.5) * dx : 0.0);
    const double u_in = cfg.initial == "explicit" ? cfg.u_in[static_cast<std::size_t>(cell)]
                                                  : initial_profile(cfg, x);
    double v_in;
    if (!cfg.v_in.empty())
        v_in = cfg.v_in[static_cast<std::size_t>(cell)];
    else if (cfg.surface_init == "constant")
        v_in = cfg.surface_value;
    else if (cfg.surface_init == "well-prepared")
        v_in = well_prepared_surface(iso, meas.surface / meas.bulk, u_in).vin;
    else
        v_in = iso.value(u_in);
    return {u_in, v_in};
}

double default_time_step(const MacroConfig& cfg, const Isotherm& iso,
                         const MacroMeasures& meas, const DispersionTable& table) {
    const Eigen::Matrix2d A0 = table.eval(0.0);
    const double a = A0(0, 0), d = A0(1, 1);
    const double off = 0.5 * (A0(0, 1) + A0(1, 0));
    const double lam_max = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + off * off);
    const double dx = cfg.length / cfg.cells;
    return dx * dx * (meas.bulk + iso.alpha * meas.surface) / (4.0 * lam_max);
}

int macro_step(MacroState& st, const Isotherm& iso, const MacroMeasures& meas,
               const DispersionTable& table, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::input, "macro step needs a positive time step");
    const int total = static_cast<int>(st.u.size());
    const std::vector<Face> faces = build_faces(st, table);

    // Divergence operator L: (L u)_c = sum of signed face fluxes / dx.
    std::vector<Triplet> lt;
    lt.reserve(faces.size() * 12);
    for (const Face& f : faces)
        for (int k = 0; k < f.ncoef; ++k) {
            const auto& [c, w] = f.coef[static_cast<std::size_t>(k)];
            lt.emplace_back(f.left, c, w / st.dx);
            lt.emplace_back(f.right, c, -w / st.dx);
        }
    SpMat L(total, total);
    L.setFromTriplets(lt.begin(), lt.end());

    // Newton for capacity(u) - z^n - dt L u = 0.
    const auto capacity = [&](double u) { return meas.bulk * u + meas.surface * iso.value(u); };
    const auto residual = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd r = -st.z - dt * (L * u);
        for (int c = 0; c < total; ++c) r[c] += capacity(u[c]);
        return r;
    };

    const double tol = 1e-12 * std::max(1.0, st.z.lpNorm<Eigen::Infinity>());
    Eigen::VectorXd u = st.u;
    Eigen::VectorXd r = residual(u);
    int iterations = 0;
    while (r.lpNorm<Eigen::Infinity>() > tol) {
        if (++iterations > 50) fail(ErrorKind::solver, "macro Newton did not converge");
        std::vector<Triplet> jt;
        jt.reserve(lt.size() + static_cast<std::size_t>(total));
        for (const Triplet& t : lt) jt.emplace_back(t.row(), t.col(), -dt * t.value());
        for (int c = 0; c < total; ++c)
            jt.emplace_back(c, c, meas.bulk + meas.surface * iso.slope(u[c]));
        SpMat J(total, total);
        J.setFromTriplets(jt.begin(), jt.end());
        Eigen::SparseLU<SpMat> lu(J);
        if (lu.info() != Eigen::Success)
            fail(ErrorKind::solver, "macro Jacobian factorization failed");
        const Eigen::VectorXd du = lu.solve(-r);

        double s = 1.0;
        const double r0 = r.lpNorm<Eigen::Infinity>();
        for (;;) {
            const Eigen::VectorXd u_try = u + s * du;
            const Eigen::VectorXd r_try = residual(u_try);
            if (r_try.lpNorm<Eigen::Infinity>() <= (1.0 - 1e-4 * s) * r0 || s < 1e-4) {
                u = u_try;
                r = r_try;
                break;
            }
            s *= 0.5;
        }
    }

    // Conservative update: advance the density by face fluxes (each flux
    // enters two cells with opposite signs), then recover concentrations.
    for (const Face& f : faces) {
        const double flux = dt / st.dx * face_flux(f, u);
        st.z[f.left] += flux;
        st.z[f.right] -= flux;
    }
    for (int c = 0; c < total; ++c)
        st.u[c] = invert_capacity(iso, meas.bulk, meas.surface, st.z[c]);
    st.time += dt;
    return iterations;
}

TimeSample measure_state(const MacroState& st, const Isotherm& iso,
                         const MacroMeasures& meas) {
    TimeSample s;
    s.t = st.time;
    const double vol = std::pow(st.dx, st.dim);
    s.mass = vol * st.z.sum();
    double energy = 0.0;
    for (int c = 0; c < st.u.size(); ++c) {
        const double f = iso.value(st.u[c]);
        energy += meas.bulk * iso.primitive(st.u[c]) + 0.5 * meas.surface * f * f;
    }
    s.stored_energy = vol * energy;
    s.min_u = st.u.minCoeff();
    s.max_u = st.u.maxCoeff();
    return s;
}

MacroRun run_macro(const MacroConfig& cfg, const Isotherm& iso, const MacroMeasures& meas,
                   const DispersionTable& table) {
    MacroRun run;
    run.state = initial_state(cfg, iso, meas);

    double dt = cfg.dt > 0.0 ? cfg.dt : default_time_step(cfg, iso, meas, table);
    run.steps = std::max(1, static_cast<int>(std::ceil(cfg.t_end / dt - 1e-12)));
    dt = cfg.t_end / run.steps;
    run.dt = dt;

    run.series.push_back(measure_state(run.state, iso, meas));
    for (int k = 0; k < run.steps; ++k) {
        run.newton_iterations += macro_step(run.state, iso, meas, table, dt);
        run.series.push_back(measure_state(run.state, iso, meas));
    }
    return run;
}

}  // namespace displab
