#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "displab/errors.hpp"
#include "displab/geometry.hpp"
#include "displab/sweep.hpp"
#include "displab/velocity.hpp"
#include "doctest.h"

using namespace displab;

namespace {

struct SweepFixture {
    CellGeometry geom;
    CellMesh mesh;
    SurfaceMesh surf;
    VelocityField vel;

    explicit SweepFixture(double h = 1.0 / 12.0)
        : geom{},
          mesh(build_cell_mesh(geom, h)),
          surf(extract_surface_mesh(mesh, geom)),
          vel(build_velocity(VelocityRecipe::symmetric, mesh, surf)) {}
};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

double leading_number(const std::string& line) { return std::stod(line); }

}  // namespace

TEST_CASE("sweep range: linear and geometric grids pin both endpoints") {
    SweepRange lin{0.0, 10.0, 5, false};
    const auto pl = lin.points();
    REQUIRE(pl.size() == 5);
    CHECK(pl.front() == 0.0);
    CHECK(pl.back() == 10.0);
    CHECK(pl[2] == doctest::Approx(5.0));

    SweepRange geo{0.01, 100.0, 5, true};
    const auto pg = geo.points();
    REQUIRE(pg.size() == 5);
    CHECK(pg.front() == 0.01);
    CHECK(pg.back() == 100.0);
    // successive ratios equal for geometric spacing
    const double r0 = pg[1] / pg[0];
    for (std::size_t i = 2; i < pg.size(); ++i)
        CHECK(pg[i] / pg[i - 1] == doctest::Approx(r0).epsilon(1e-12));
}

TEST_CASE("sweep range: malformed grids are rejected") {
    const SweepRange too_few{0.0, 1.0, 1, false};
    const SweepRange reversed{2.0, 1.0, 4, false};
    const SweepRange log_at_zero{0.0, 1.0, 4, true};
    const SweepRange log_negative{-1.0, 1.0, 4, true};
    CHECK_THROWS_AS(too_few.validate(), Error);
    CHECK_THROWS_AS(reversed.validate(), Error);
    CHECK_THROWS_AS(log_at_zero.validate(), Error);
    CHECK_THROWS_AS(log_negative.validate(), Error);
}

TEST_CASE("sweep parameter names round-trip") {
    for (auto p : {SweepParameter::u0, SweepParameter::ds, SweepParameter::kappa})
        CHECK(sweep_parameter_from_string(to_string(p)) == p);
    CHECK_THROWS_AS(sweep_parameter_from_string("viscosity"), Error);
}

TEST_CASE("sweep output is byte-identical for any worker count") {
    SweepFixture fx;
    SweepSpec spec;
    spec.parameter = SweepParameter::u0;
    spec.range = {0.0, 8.0, 5, false};

    const SweepResult serial = run_sweep(fx.mesh, fx.surf, fx.vel, spec, 1);
    const SweepResult pooled = run_sweep(fx.mesh, fx.surf, fx.vel, spec, 4);

    std::ostringstream a, b;
    write_sweep_csv(a, spec, serial);
    write_sweep_csv(b, spec, pooled);
    CHECK(a.str() == b.str());
    CHECK(serial.failures() == 0);
}

TEST_CASE("sweep CSV: header names the varied parameter and tags the limit row") {
    SweepFixture fx;
    SweepSpec spec;
    spec.parameter = SweepParameter::kappa;
    spec.range = {0.1, 10.0, 3, true};
    spec.u0 = 1.0;

    const SweepResult result = run_sweep(fx.mesh, fx.surf, fx.vel, spec, 2);
    std::ostringstream out;
    write_sweep_csv(out, spec, result);
    const auto lines = split_lines(out.str());

    REQUIRE(lines.size() == 1 + 3 + 1);  // header, points, limit
    CHECK(lines[0] == "kappa,A11,A12,A21,A22,A11_sym,A22_sym,lambda_min");
    CHECK(lines.back().rfind("limit,", 0) == 0);
    CHECK(leading_number(lines[1]) == doctest::Approx(0.1));
    CHECK(leading_number(lines[3]) == doctest::Approx(10.0));
}

TEST_CASE("sweep isolates a failing point and keeps the rest") {
    SweepFixture fx;
    SweepSpec spec;
    spec.parameter = SweepParameter::kappa;
    spec.range = {0.0, 2.0, 3, false};  // kappa = 0 is not a valid exchange rate
    spec.u0 = 1.0;

    const SweepResult result = run_sweep(fx.mesh, fx.surf, fx.vel, spec, 2);
    REQUIRE(result.points.size() == 3);
    CHECK(result.failures() == 1);
    CHECK_FALSE(result.points[0].ok);
    CHECK(result.points[0].error.find("kappa") != std::string::npos);
    CHECK(result.points[1].ok);
    CHECK(result.points[2].ok);
    CHECK(result.limit.ok);

    // failed rows stay out of the CSV body
    std::ostringstream out;
    write_sweep_csv(out, spec, result);
    CHECK(split_lines(out.str()).size() == 1 + 2 + 1);
}

TEST_CASE("sweep physics: concentration sweep decays toward its limit row") {
    SweepFixture fx;
    SweepSpec spec;
    spec.parameter = SweepParameter::u0;
    spec.range = {0.0, 50.0, 6, false};

    const SweepResult result = run_sweep(fx.mesh, fx.surf, fx.vel, spec, 4);
    REQUIRE(result.failures() == 0);

    // adsorption slope decreases with concentration, and the leading tensor
    // entry decreases with it
    for (std::size_t i = 1; i < result.points.size(); ++i) {
        CHECK(result.points[i].fprime < result.points[i - 1].fprime);
        CHECK(result.points[i].tensor.A(0, 0) <= result.points[i - 1].tensor.A(0, 0) + 1e-12);
    }
    const double last = result.points.back().tensor.A(0, 0);
    const double lim = result.limit.tensor.A(0, 0);
    CHECK(last >= lim - 1e-12);
    CHECK(std::abs(last - lim) / lim < 0.05);
    for (const auto& pt : result.points) CHECK(pt.tensor.lambda_min > 0.0);
}
