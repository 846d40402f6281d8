#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "displab/cell_problems.hpp"
#include "displab/dispersion.hpp"

namespace displab {

/// Which coefficient a dispersion sweep varies.
enum class SweepParameter {
    u0,     ///< concentration the adsorption slope is taken at
    ds,     ///< scale multiplying the surface diffusion tensor
    kappa,  ///< bulk <-> surface exchange rate
};
const char* to_string(SweepParameter p);
SweepParameter sweep_parameter_from_string(const std::string& name);

/// Parameter grid: `count` values from min to max, linearly or
/// geometrically spaced.
struct SweepRange {
    double min = 0.0;
    double max = 1.0;
    int count = 2;
    bool log_spacing = false;

    void validate() const;
    std::vector<double> points() const;
};

/// A dispersion sweep over one parameter with everything else held fixed.
/// `u0` is the fixed evaluation concentration for the ds / kappa sweeps
/// (ignored when the parameter is u0 itself).
struct SweepSpec {
    SweepParameter parameter = SweepParameter::u0;
    SweepRange range;
    CoefficientSet coeffs;
    double u0 = 2.5;
};

/// One evaluated parameter point.  A failed solve records the message and
/// leaves the tensor empty; the sweep itself continues.
struct SweepPoint {
    double value = 0.0;
    bool ok = false;
    std::string error;
    DispersionTensor tensor;
    double fprime = 0.0;
    std::array<double, 2> residual = {0.0, 0.0};
    std::array<int, 2> iterations = {0, 0};
};

struct SweepResult {
    std::vector<SweepPoint> points;  ///< one per grid value, grid order
    SweepPoint limit;                ///< limit-regime reference row
    int failures() const;
};

/// Evaluate the sweep with a pool of `jobs` workers.  Results are stored by
/// grid index, so the output is identical for any job count.
SweepResult run_sweep(const CellMesh& mesh, const SurfaceMesh& surf,
                      const VelocityField& vel, const SweepSpec& spec, int jobs = 1);

/// CSV with one row per successful point, the varied parameter first, and
/// the limit reference appended as a row tagged `limit`.
void write_sweep_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result);

}  // namespace displab
