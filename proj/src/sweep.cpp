#include "displab/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include "displab/errors.hpp"

namespace displab {

const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::u0: return "u0";
        case SweepParameter::ds: return "Ds";
        case SweepParameter::kappa: return "kappa";
    }
    return "?";
}

SweepParameter sweep_parameter_from_string(const std::string& name) {
    if (name == "u0") return SweepParameter::u0;
    if (name == "Ds" || name == "ds") return SweepParameter::ds;
    if (name == "kappa") return SweepParameter::kappa;
    fail(ErrorKind::input, "unknown sweep parameter: " + name);
}

void SweepRange::validate() const {
    if (!(min < max)) fail(ErrorKind::input, "sweep range needs min < max");
    if (count < 2) fail(ErrorKind::input, "sweep range needs at least 2 points");
    if (log_spacing && !(min > 0.0))
        fail(ErrorKind::input, "log spacing needs a positive range minimum");
    if (!std::isfinite(min) || !std::isfinite(max))
        fail(ErrorKind::input, "sweep range must be finite");
}

std::vector<double> SweepRange::points() const {
    validate();
    std::vector<double> p(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double s = static_cast<double>(k) / (count - 1);
        p[static_cast<std::size_t>(k)] =
            log_spacing ? min * std::pow(max / min, s) : min + s * (max - min);
    }
    p.front() = min;
    p.back() = max;
    return p;
}

int SweepResult::failures() const {
    int n = limit.ok ? 0 : 1;
    for (const SweepPoint& p : points) n += p.ok ? 0 : 1;
    return n;
}

namespace {

/// Solve one parameter point.  The varied value overrides its slot in an
/// otherwise fixed coefficient set.
SweepPoint evaluate_point(const CellMesh& mesh, const SurfaceMesh& surf,
                          const VelocityField& vel, const SweepSpec& spec, double value) {
    SweepPoint pt;
    pt.value = value;
    CoefficientSet c = spec.coeffs;
    double u0 = spec.u0;
    switch (spec.parameter) {
        case SweepParameter::u0: u0 = value; break;
        case SweepParameter::ds: c.Ds = value * spec.coeffs.Ds; break;
        case SweepParameter::kappa: c.kappa = value; break;
    }
    const CellSolution sol = solve_cell(mesh, surf, vel, c, u0);
    pt.tensor = assemble_dispersion(mesh, surf, vel, c, sol);
    pt.fprime = sol.fprime;
    pt.residual = sol.residual;
    pt.iterations = sol.iterations;
    pt.ok = true;
    return pt;
}

SweepPoint evaluate_limit(const CellMesh& mesh, const SurfaceMesh& surf,
                          const VelocityField& vel, const SweepSpec& spec) {
    SweepPoint pt;
    pt.value = std::numeric_limits<double>::infinity();
    CellSolution sol;
    switch (spec.parameter) {
        case SweepParameter::u0:
            sol = solve_limit_vanishing_slope(mesh, surf, vel, spec.coeffs);
            break;
        case SweepParameter::ds:
            sol = solve_limit_fast_surface(mesh, surf, vel, spec.coeffs, spec.u0);
            break;
        case SweepParameter::kappa:
            sol = solve_limit_fast_exchange(mesh, surf, vel, spec.coeffs);
            break;
    }
    pt.tensor = assemble_dispersion(mesh, surf, vel, spec.coeffs, sol);
    pt.fprime = sol.fprime;
    pt.residual = sol.residual;
    pt.iterations = sol.iterations;
    pt.ok = true;
    return pt;
}

std::string describe(const std::exception_ptr& err) {
    try {
        std::rethrow_exception(err);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

}  // namespace

SweepResult run_sweep(const CellMesh& mesh, const SurfaceMesh& surf,
                      const VelocityField& vel, const SweepSpec& spec, int jobs) {
    spec.coeffs.validate();
    if (spec.parameter != SweepParameter::u0 && !(spec.u0 >= 0.0))
        fail(ErrorKind::input, "fixed sweep concentration must be nonnegative");
    const std::vector<double> values = spec.range.points();

    SweepResult result;
    result.points.resize(values.size());

    // Worker pool over grid indices; a failed point records its message and
    // the remaining points still run.  Slot-indexed storage keeps the result
    // independent of the job count.
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= values.size()) break;
            try {
                result.points[k] = evaluate_point(mesh, surf, vel, spec, values[k]);
            } catch (...) {
                result.points[k].value = values[k];
                result.points[k].ok = false;
                result.points[k].error = describe(std::current_exception());
            }
        }
    };
    const int workers = std::max(1, jobs);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (std::thread& t : pool) t.join();

    try {
        result.limit = evaluate_limit(mesh, surf, vel, spec);
    } catch (...) {
        result.limit.ok = false;
        result.limit.error = describe(std::current_exception());
    }
    return result;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_row(std::ostream& out, const std::string& tag, const DispersionTensor& t) {
    out << tag << ',' << num(t.A(0, 0)) << ',' << num(t.A(0, 1)) << ',' << num(t.A(1, 0))
        << ',' << num(t.A(1, 1)) << ',' << num(t.A_sym(0, 0)) << ',' << num(t.A_sym(1, 1))
        << ',' << num(t.lambda_min) << '\n';
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result) {
    out << to_string(spec.parameter) << ",A11,A12,A21,A22,A11_sym,A22_sym,lambda_min\n";
    for (const SweepPoint& p : result.points)
        if (p.ok) write_row(out, num(p.value), p.tensor);
    if (result.limit.ok) write_row(out, "limit", result.limit.tensor);
}

}  // namespace displab
