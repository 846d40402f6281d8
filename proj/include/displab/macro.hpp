#pragma once

#include <string>
#include <utility>
#include <vector>

#include "displab/dispersion.hpp"
#include "displab/isotherm.hpp"

namespace displab {

/// Configuration of the homogenized (macroscopic) evolution on a periodic
/// box [0, length]^dim discretized by a uniform finite-volume grid.
struct MacroConfig {
    int dim = 1;            ///< 1 or 2
    int cells = 200;        ///< cells per dimension
    double length = 1.0;    ///< box edge
    double dt = 0.0;        ///< time step; 0 selects the accuracy heuristic
    double t_end = 0.05;    ///< final time
    std::string initial = "gaussian";  ///< gaussian | cosine | constant | explicit
    double baseline = 0.0;             ///< additive offset of the profile
    double amplitude = 1.0;            ///< bump / mode amplitude
    double width = 0.1;                ///< gaussian width
    std::string surface_init = "equilibrium";  ///< equilibrium | well-prepared | constant
    double surface_value = 0.0;                ///< used by surface_init = constant
    std::vector<double> u_in;  ///< per-cell bulk start values (initial = explicit)
    std::vector<double> v_in;  ///< per-cell surface start values (optional with explicit)

    void validate() const;
};

/// Cell measures entering the capacity |bulk| u + |surface| f(u).
struct MacroMeasures {
    double bulk = 1.0;
    double surface = 0.0;
};

/// Finite-volume state: cell-average concentrations and the conservative
/// density they correspond to.
struct MacroState {
    int dim = 1;
    int n = 0;
    double dx = 0.0;
    double time = 0.0;
    Eigen::VectorXd u;  ///< cell averages, length n^dim
    Eigen::VectorXd z;  ///< conservative density per cell
};

struct TimeSample {
    double t = 0.0;
    double mass = 0.0;           ///< integral of the conservative density
    double stored_energy = 0.0;  ///< bulk free energy + surface quadratic part
    double min_u = 0.0;
    double max_u = 0.0;
};

struct MacroRun {
    std::vector<TimeSample> series;  ///< one row per time level, t = 0 first
    MacroState state;                ///< final state
    double dt = 0.0;
    int steps = 0;
    int newton_iterations = 0;  ///< grand total over all steps
};

/// Initial profile value at a point (dim-dependent).
double initial_profile(const MacroConfig& cfg, const Vec2& x);

/// Bulk / surface start values of one cell (row-major cell index) under the
/// configured recipes.  The conserved density of the cell combines them as
/// bulk measure * u_in + surface measure * v_in.
std::pair<double, double> initial_pair(const MacroConfig& cfg, const Isotherm& iso,
                                       const MacroMeasures& meas, int cell);

/// Build the initial state: project the bulk/surface initial data onto the
/// conservative density, then recover cell concentrations from it.
MacroState initial_state(const MacroConfig& cfg, const Isotherm& iso,
                         const MacroMeasures& meas);

/// Accuracy-balancing default time step dx^2 (|bulk| + alpha |surface|) /
/// (4 max-eigenvalue of the zero-concentration tensor).
double default_time_step(const MacroConfig& cfg, const Isotherm& iso,
                         const MacroMeasures& meas, const DispersionTable& table);

/// One implicit Euler step with the tensor lagged at the current
/// concentrations.  Newton on the capacity; afterwards the conservative
/// density is advanced by face fluxes (telescoping mass) and concentrations
/// are recovered from it.  Returns the Newton iteration count.
int macro_step(MacroState& state, const Isotherm& iso, const MacroMeasures& meas,
               const DispersionTable& table, double dt);

TimeSample measure_state(const MacroState& state, const Isotherm& iso,
                         const MacroMeasures& meas);

MacroRun run_macro(const MacroConfig& cfg, const Isotherm& iso, const MacroMeasures& meas,
                   const DispersionTable& table);

}  // namespace displab
