#pragma once

#include <complex>

namespace pbsurf {

using Complex = std::complex<double>;

// Weierstrass elliptic function of the square lattice L(Z + iZ).
//
// Each lattice row is summed in closed form,
//   sum_m 1/(w - m)^2 = pi^2 csc^2(pi w),
// which leaves a series over rows that converges like exp(-2 pi |n|). The row
// count is chosen from an explicit bound on the dropped rows.

/// p(z). Throws invalid_argument within 1e-6 of a lattice point.
Complex weierstrass_p(Complex z, double side);

/// p'(z). Same domain as weierstrass_p.
Complex weierstrass_p_prime(Complex z, double side);

/// e1 = p(L/2). For the square lattice p(iL/2) = -e1, p((1+i)L/2) = 0 and
/// g2 = 4 e1^2, g3 = 0.
double weierstrass_e1(double side);

/// Bound on the dropped rows used by the evaluators above, for z reduced to
/// the cell |Re|, |Im| <= L/2 around its nearest lattice point.
double weierstrass_tail_bound(double side);

/// Values that stay finite through the poles: 1/p and p'/p^2.
struct WeierstrassLocal {
  Complex reciprocal;
  Complex prime_over_square;
};
WeierstrassLocal weierstrass_local(Complex z, double side);

}  // namespace pbsurf
