#include "displab/isotherm.hpp"

#include <cmath>
#include <string>

#include "displab/errors.hpp"

namespace displab {

void Isotherm::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        fail(ErrorKind::coefficient, "adsorption rate alpha must be positive");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        fail(ErrorKind::coefficient, "saturation coefficient beta must be nonnegative");
}

double Isotherm::value(double u) const {
    if (u < 0.0 || beta == 0.0) return alpha * u;
    return alpha * u / (1.0 + beta * u);
}

double Isotherm::slope(double u) const {
    if (u < 0.0 || beta == 0.0) return alpha;
    const double d = 1.0 + beta * u;
    return alpha / (d * d);
}

double Isotherm::primitive(double u) const {
    if (u < 0.0 || beta == 0.0) return 0.5 * alpha * u * u;
    const double x = beta * u;
    if (x < 1e-3) {
        // x - log1p(x) cancels; use its series, x^2 * sum (-x)^k / (k+2).
        double sum = 0.0;
        double pw = 1.0;
        for (int k = 0; k < 8; ++k) {
            sum += pw / static_cast<double>(k + 2);
            pw *= -x;
        }
        return alpha * u * u * sum;
    }
    return (alpha / beta) * (u - std::log1p(x) / beta);
}

double invert_capacity(const Isotherm& iso, double a, double b, double z) {
    if (!(a > 0.0) || !(b >= 0.0))
        fail(ErrorKind::coefficient, "capacity weights must satisfy a > 0, b >= 0");
    const auto cap = [&](double u) { return a * u + b * iso.value(u); };
    const double tol = 1e-12 * std::max(1.0, std::abs(z));

    // cap is strictly increasing with slope >= a, so u = z / cap'(0) brackets
    // the root together with u = z / a.
    double lo = std::min(z / (a + b * iso.alpha), z / a);
    double hi = std::max(z / (a + b * iso.alpha), z / a);
    // Rounding can push the root onto (or just past) a bracket end; widen
    // outward until the bracket is strict.  cap grows at least linearly, so
    // a few doublings always suffice.
    for (int guard = 0; guard < 64 && cap(lo) > z; ++guard)
        lo -= std::max(1.0, std::abs(lo));
    for (int guard = 0; guard < 64 && cap(hi) < z; ++guard)
        hi += std::max(1.0, std::abs(hi));

    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double r = cap(u) - z;
        if (std::abs(r) <= tol) return u;
        (r > 0.0 ? hi : lo) = u;
        const double du = r / (a + b * iso.slope(u));
        double next = u - du;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        u = next;
    }
    if (std::abs(cap(u) - z) <= 1e3 * tol) return u;  // stagnated at rounding level
    fail(ErrorKind::numeric, "capacity inversion did not converge");
}

PreparedState well_prepared_surface(const Isotherm& iso, double eta, double u_in) {
    if (!(eta >= 0.0) || !std::isfinite(eta))
        fail(ErrorKind::coefficient, "measure ratio eta must be nonnegative");
    iso.validate();

    PreparedState out;
    if (eta == 0.0) {
        // No surface: nothing to prepare.
        out.vin = iso.value(u_in);
        out.u0 = u_in;
        out.energy = 0.0;
        return out;
    }

    // Stationarity of the relative free energy in the surface value reads
    // v = f(u0(v)) with u0(v) the merged concentration of the pair, which
    // solves u0 + eta f(u0) = u_in + eta v.  g(v) = v - f(u0(v)) is strictly
    // increasing with slope 1 / (1 + eta f'(u0)).
    const auto merged = [&](double v) {
        return invert_capacity(iso, 1.0, eta, u_in + eta * v);
    };
    const auto g = [&](double v) { return v - iso.value(merged(v)); };

    double lo = std::min(0.0, iso.alpha * u_in);
    double hi = std::max(0.0, iso.alpha * u_in);
    for (int guard = 0; guard < 64 && g(lo) > 0.0; ++guard) lo -= std::max(1.0, std::abs(lo));
    for (int guard = 0; guard < 64 && g(hi) < 0.0; ++guard) hi += std::max(1.0, std::abs(hi));

    double v = hi;
    const double tol = 1e-13 * std::max(1.0, std::abs(iso.alpha * u_in));
    for (int it = 0; it < 100; ++it) {
        const double u0 = merged(v);
        const double r = v - iso.value(u0);
        if (std::abs(r) <= tol) break;
        (r > 0.0 ? hi : lo) = v;
        double next = v - r * (1.0 + eta * iso.slope(u0));
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        v = next;
    }

    out.vin = v;
    out.u0 = merged(v);
    out.energy = iso.primitive(u_in) + 0.5 * eta * v * v -
                 (iso.primitive(out.u0) + 0.5 * eta * iso.value(out.u0) * iso.value(out.u0));
    return out;
}

}  // namespace displab
