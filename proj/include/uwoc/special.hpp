#ifndef UWOC_SPECIAL_HPP
#define UWOC_SPECIAL_HPP

#include <functional>

namespace uwoc::special {

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, double abs_tol = 0.0);

/// Integral over [a, inf) via the map t = a + u/(1-u).
double integrate_to_infinity(const std::function<double(double)>& f, double a,
                             double rel_tol = 1e-12, double abs_tol = 0.0);

// Modified Bessel functions of the first kind: power series for x < 15,
// Hankel asymptotic expansion beyond.
double bessel_i0(double x);
double bessel_i1(double x);
/// exp(-|x|) I0(x); finite for any x.
double bessel_i0_scaled(double x);
/// exp(-|x|) I1(x).
double bessel_i1_scaled(double x);

/// Modified Bessel function of the second kind K_nu(x), real nu, x > 0,
/// from K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
double bessel_k(double nu, double x);
/// exp(x) K_nu(x).
double bessel_k_scaled(double nu, double x);

} // namespace uwoc::special

#endif
