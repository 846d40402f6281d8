#pragma once

namespace displab {

/// Saturating adsorption law  f(u) = alpha u / (1 + beta u)  with alpha > 0,
/// beta >= 0 (beta = 0 is the linear law alpha u).  Extended linearly with
/// slope alpha to u < 0 so Newton iterations that overshoot stay defined.
struct Isotherm {
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const;

    double value(double u) const;      ///< f(u)
    double slope(double u) const;      ///< f'(u), in (0, alpha]
    double primitive(double u) const;  ///< F(u) with F' = f, F(0) = 0
};

/// Solve  a u + b f(u) = z  for u (a > 0, b >= 0).  The left side is
/// strictly increasing; Newton with a bisection safeguard drives the
/// residual below 1e-12 * max(1, |z|).
double invert_capacity(const Isotherm& iso, double a, double b, double z);

/// Equilibrium initial data.  `eta` is the surface-to-bulk measure ratio of
/// the cell.  Given an initial bulk concentration, find the surface
/// concentration at which the relative free energy of the initial pair is
/// stationary; the merged start concentration then coincides with the bulk
/// value and the free-energy defect vanishes.
struct PreparedState {
    double vin = 0.0;     ///< surface concentration
    double u0 = 0.0;      ///< merged concentration used at t = 0
    double energy = 0.0;  ///< free-energy defect at the stationary point
};
PreparedState well_prepared_surface(const Isotherm& iso, double eta, double u_in);

}  // namespace displab
