#include <doctest.h>

#include <cmath>

#include "displab/errors.hpp"
#include "displab/isotherm.hpp"

using namespace displab;

TEST_CASE("adsorption law closed-form values") {
    const Isotherm iso{1.0, 1.0};
    CHECK(iso.value(1.0) == 0.5);
    CHECK(iso.value(3.0) == 0.75);
    CHECK(iso.slope(1.0) == 0.25);
    CHECK(iso.slope(0.0) == 1.0);
    CHECK(std::abs(iso.primitive(1.0) - (1.0 - std::log(2.0))) < 1e-15);

    // Linear law.
    const Isotherm lin{2.0, 0.0};
    CHECK(lin.value(1.3) == 2.6);
    CHECK(lin.slope(7.0) == 2.0);
    CHECK(lin.primitive(3.0) == 9.0);

    // Linear extension below zero keeps slope alpha.
    CHECK(iso.value(-0.5) == -0.5);
    CHECK(iso.slope(-0.5) == 1.0);
    CHECK(iso.primitive(-2.0) == 2.0);

    const Isotherm bad_alpha{-1.0, 1.0};
    CHECK_THROWS_AS(bad_alpha.validate(), Error);
    const Isotherm bad_beta{1.0, -0.1};
    CHECK_THROWS_AS(bad_beta.validate(), Error);
}

TEST_CASE("adsorption primitive is smooth across the series branch") {
    const Isotherm iso{1.7, 0.9};
    // F' = f, verified with central differences on both sides of the branch
    // switch at beta*u = 1e-3.
    for (const double u : {1e-5, 5e-4, 1e-3 / 0.9, 5e-3, 0.3, 4.0}) {
        const double du = 1e-6 * std::max(1.0, u);
        const double fd = (iso.primitive(u + du) - iso.primitive(u - du)) / (2.0 * du);
        CHECK(std::abs(fd - iso.value(u)) < 1e-8 * std::max(1.0, iso.value(u)));
    }
    // Continuity at the switch itself.
    const double us = 1e-3 / 0.9;
    CHECK(std::abs(iso.primitive(us * (1.0 - 1e-9)) - iso.primitive(us * (1.0 + 1e-9))) <
          1e-14);
}

TEST_CASE("capacity inversion round-trips") {
    const Isotherm iso{1.0, 1.0};
    const double a = 0.8743;
    const double b = 1.2566;
    for (const double u : {-3.0, -1e-4, 0.0, 1e-6, 0.2, 1.0, 47.0, 1e4}) {
        const double z = a * u + b * iso.value(u);
        const double back = invert_capacity(iso, a, b, z);
        CHECK(std::abs(a * back + b * iso.value(back) - z) <= 1e-12 * std::max(1.0, std::abs(z)));
        CHECK(std::abs(back - u) < 1e-9 * std::max(1.0, std::abs(u)));
    }
    // Linear law inverts exactly.
    const Isotherm lin{2.0, 0.0};
    const double u = invert_capacity(lin, 1.0, 3.0, 14.0);
    CHECK(std::abs(u - 2.0) < 1e-11);
}

TEST_CASE("well-prepared surface value equals the adsorbed bulk value") {
    const double eta = 1.2566370614359172 / 0.87433629385640829;
    const Isotherm iso{1.0, 1.0};
    for (const double u_in : {0.0, 0.5, 3.0, 50.0}) {
        const PreparedState st = well_prepared_surface(iso, eta, u_in);
        CHECK(std::abs(st.vin - iso.value(u_in)) <= 1e-10 * std::max(1.0, u_in));
        CHECK(std::abs(st.u0 - u_in) <= 1e-10 * std::max(1.0, u_in));
        const double scale = std::max(1.0, iso.primitive(u_in) + 0.5 * eta * st.vin * st.vin);
        CHECK(std::abs(st.energy) <= 1e-12 * scale);
    }

    const Isotherm lin{2.0, 0.0};
    const PreparedState st = well_prepared_surface(lin, eta, 1.3);
    CHECK(std::abs(st.vin - 2.0 * 1.3) <= 1e-10);

    // Without a surface there is nothing to prepare.
    const PreparedState flat = well_prepared_surface(iso, 0.0, 2.0);
    CHECK(flat.u0 == 2.0);
    CHECK(flat.energy == 0.0);
}
