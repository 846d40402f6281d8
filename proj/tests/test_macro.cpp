#include <doctest.h>

#include <cmath>

#include "displab/errors.hpp"
#include "displab/macro.hpp"

using namespace displab;

namespace {

/// Table that evaluates to one fixed tensor for every concentration.
DispersionTable constant_table(const Isotherm& iso, const Eigen::Matrix2d& A) {
    DispersionTable t;
    t.coeffs.isotherm = iso;
    t.u0 = {0.0};
    t.fprime = {iso.slope(0.0)};
    DispersionTensor row;
    row.A = A;
    row.A_sym = 0.5 * (A + A.transpose());
    t.rows = {row};
    t.limit = row;
    return t;
}

}  // namespace

TEST_CASE("linear adsorption: implicit step reproduces the discrete decay factor") {
    const Isotherm iso{2.0, 0.0};
    const MacroMeasures meas{0.8743362938564083, 1.2566370614359172};
    const double a11 = 0.77;
    const DispersionTable table = constant_table(iso, a11 * Eigen::Matrix2d::Identity());

    MacroConfig cfg;
    cfg.dim = 1;
    cfg.cells = 64;
    cfg.initial = "cosine";
    cfg.baseline = 1.0;
    cfg.amplitude = 0.5;
    cfg.dt = 2e-4;
    cfg.t_end = 50 * cfg.dt;

    const MacroRun run = run_macro(cfg, iso, meas, table);
    CHECK(run.steps == 50);

    // With a linear capacity and a constant tensor the cosine mode is an
    // exact eigenvector of the scheme: amplitude shrinks by
    // w / (w + dt lambda_k) per step with the discrete symbol lambda_k.
    const double w = meas.bulk + iso.alpha * meas.surface;
    const double dx = cfg.length / cfg.cells;
    const double sin_half = std::sin(M_PI * dx / cfg.length);  // sin(k dx / 2), k = 2 pi / L
    const double lambda = a11 * 4.0 / (dx * dx) * sin_half * sin_half;
    const double g = w / (w + run.dt * lambda);
    const double factor = std::pow(g, run.steps);
    double worst = 0.0;
    for (int c = 0; c < cfg.cells; ++c) {
        const double x = (c + 0.5) * dx;
        const double expected = 1.0 + 0.5 * factor * std::cos(2.0 * M_PI * x);
        worst = std::max(worst, std::abs(run.state.u[c] - expected));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("conservative update keeps the total density fixed") {
    const Isotherm iso{1.0, 1.0};
    const MacroMeasures meas{0.8743362938564083, 1.2566370614359172};
    Eigen::Matrix2d A;
    A << 0.8, 0.05, -0.03, 0.7;  // includes off-diagonal transport
    const DispersionTable table = constant_table(iso, A);

    MacroConfig cfg;
    cfg.dim = 2;
    cfg.cells = 16;
    cfg.initial = "gaussian";
    cfg.amplitude = 2.0;
    cfg.width = 0.15;
    cfg.dt = 1e-3;
    cfg.t_end = 20e-3;

    const MacroRun run = run_macro(cfg, iso, meas, table);
    const double mass0 = run.series.front().mass;
    for (const TimeSample& s : run.series)
        CHECK(std::abs(s.mass - mass0) <= 1e-12 * std::max(1.0, std::abs(mass0)));
}

TEST_CASE("diffusive step is monotone: bounds, max decay, energy decay") {
    const Isotherm iso{1.0, 1.0};
    const MacroMeasures meas{0.8743362938564083, 1.2566370614359172};
    const DispersionTable table = constant_table(iso, 0.8 * Eigen::Matrix2d::Identity());

    MacroConfig cfg;
    cfg.dim = 1;
    cfg.cells = 100;
    cfg.initial = "gaussian";
    cfg.amplitude = 3.0;
    cfg.width = 0.08;
    cfg.dt = 5e-4;
    cfg.t_end = 40 * cfg.dt;

    const MacroRun run = run_macro(cfg, iso, meas, table);
    for (std::size_t k = 0; k < run.series.size(); ++k) {
        CHECK(run.series[k].min_u >= -1e-12);
        if (k > 0) {
            CHECK(run.series[k].max_u <= run.series[k - 1].max_u + 1e-12);
            CHECK(run.series[k].stored_energy <= run.series[k - 1].stored_energy + 1e-14);
        }
    }
    // The bump actually spread.
    CHECK(run.series.back().max_u < 0.9 * run.series.front().max_u);
}

TEST_CASE("equilibrium surface data starts at the bulk profile exactly") {
    const Isotherm iso{1.0, 1.0};
    const MacroMeasures meas{0.9, 1.1};
    MacroConfig cfg;
    cfg.dim = 1;
    cfg.cells = 32;
    cfg.initial = "gaussian";
    const MacroState st = initial_state(cfg, iso, meas);
    for (int c = 0; c < cfg.cells; ++c) {
        const double x = (c + 0.5) / cfg.cells;
        const double u_in = initial_profile(cfg, Vec2(x, 0.0));
        CHECK(std::abs(st.u[c] - u_in) < 1e-12 * std::max(1.0, u_in));
    }

    // A non-equilibrium surface load shifts the merged start value upward.
    MacroConfig loaded = cfg;
    loaded.surface_init = "constant";
    loaded.surface_value = 2.0;
    const MacroState st2 = initial_state(loaded, iso, meas);
    for (int c = 0; c < cfg.cells; ++c) CHECK(st2.u[c] > st.u[c]);
}

TEST_CASE("constant initial data stays constant") {
    const Isotherm iso{1.0, 1.0};
    const MacroMeasures meas{0.9, 1.1};
    const DispersionTable table = constant_table(iso, Eigen::Matrix2d::Identity());
    MacroConfig cfg;
    cfg.dim = 2;
    cfg.cells = 8;
    cfg.initial = "constant";
    cfg.baseline = 0.75;
    cfg.amplitude = 0.5;
    cfg.dt = 1e-3;
    cfg.t_end = 2e-2;
    const MacroRun run = run_macro(cfg, iso, meas, table);
    const TimeSample& first = run.series.front();
    CHECK(first.min_u == doctest::Approx(1.25).epsilon(1e-12));
    for (const TimeSample& s : run.series) {
        CHECK(s.mass == first.mass);
        CHECK(s.stored_energy == first.stored_energy);
        CHECK(s.min_u == first.min_u);
        CHECK(s.max_u == first.max_u);
    }
}

TEST_CASE("macro configuration validation") {
    const Isotherm iso{1.0, 1.0};
    const MacroMeasures meas{1.0, 0.0};
    MacroConfig cfg;
    cfg.dim = 3;
    CHECK_THROWS_AS(initial_state(cfg, iso, meas), Error);
    cfg.dim = 1;
    cfg.initial = "step";
    CHECK_THROWS_AS(initial_state(cfg, iso, meas), Error);
    cfg.initial = "gaussian";
    cfg.t_end = -1.0;
    CHECK_THROWS_AS(initial_state(cfg, iso, meas), Error);
}
