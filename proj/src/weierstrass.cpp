#include "pbsurf/weierstrass.hpp"

#include <cmath>
#include <numbers>

#include "pbsurf/error.hpp"

namespace pbsurf {

namespace {

constexpr double kPi = std::numbers::pi;

// Rows |n| <= kRows. With |Im u| <= 1/2 a dropped row is bounded by
// 4 e^{-2 pi (|n| - 1/2)} / (1 - e^{-pi})^2 + 4 e^{-2 pi |n|} / (1 - e^{-2 pi})^2.
constexpr int kRows = 7;

double row_bound(int n) {
  const double a = std::exp(-2 * kPi * (n - 0.5));
  const double b = std::exp(-2 * kPi * n);
  const double qa = 1 - std::exp(-kPi);
  const double qb = 1 - std::exp(-2 * kPi);
  return 4 * a / (qa * qa) + 4 * b / (qb * qb);
}

double dropped_rows_bound() {
  // Both signs of n, geometric ratio e^{-2 pi} between consecutive rows.
  return 2 * row_bound(kRows + 1) / (1 - std::exp(-2 * kPi));
}

// Offset from the nearest lattice point, in lattice units.
Complex reduce(Complex z, double side) {
  const Complex u = z / side;
  return {u.real() - std::nearbyint(u.real()), u.imag() - std::nearbyint(u.imag())};
}

// csc^2(x) - 1/x^2 and cot(x) csc^2(x) - 1/x^3, with Taylor series near 0.
Complex csc2_regular(Complex x) {
  if (std::abs(x) < 0.2) {
    const Complex x2 = x * x;
    return 1.0 / 3 +
           x2 * (1.0 / 15 +
                 x2 * (2.0 / 189 +
                       x2 * (1.0 / 675 +
                             x2 * (2.0 / 10395 + x2 * (1382.0 / 58046625 + x2 * (4.0 / 1403325))))));
  }
  const Complex s = std::sin(x);
  return 1.0 / (s * s) - 1.0 / (x * x);
}

Complex cotcsc2_regular(Complex x) {
  if (std::abs(x) < 0.2) {
    const Complex x2 = x * x;
    return -x * (1.0 / 15 +
                 x2 * (4.0 / 189 +
                       x2 * (1.0 / 225 +
                             x2 * (8.0 / 10395 + x2 * (1382.0 / 11609325 + x2 * (8.0 / 467775))))));
  }
  const Complex s = std::sin(x);
  return std::cos(x) / (s * s * s) - 1.0 / (x * x * x);
}

Complex csc2(Complex x) {
  const Complex s = std::sin(x);
  return 1.0 / (s * s);
}

Complex cotcsc2(Complex x) {
  const Complex s = std::sin(x);
  return std::cos(x) / (s * s * s);
}

// p(z) - 1/zeta^2 and its derivative, zeta = L u the offset from the
// nearest lattice point.
struct Regular {
  Complex value;
  Complex derivative;
};

Regular regular_part(Complex u, double side) {
  Complex r = csc2_regular(kPi * u) - 1.0 / 3;
  Complex dr = cotcsc2_regular(kPi * u);
  for (int n = 1; n <= kRows; ++n) {
    const double sh = std::sinh(kPi * n);
    const double c0 = 1.0 / (sh * sh);
    for (int sgn : {-1, 1}) {
      const Complex w = kPi * (u - Complex(0.0, sgn * n));
      r += csc2(w) + c0;
      dr += cotcsc2(w);
    }
  }
  const double k = kPi / side;
  return {k * k * r, -2.0 * k * k * k * dr};
}

void require_off_lattice(Complex u, double side) {
  if (std::abs(u) * side < 1e-6) {
    throw Error(ErrorCode::invalid_argument, "weierstrass_p evaluated at a lattice point");
  }
}

void require_side(double side) {
  if (!(side > 0) || !std::isfinite(side)) {
    throw Error(ErrorCode::invalid_argument, "lattice side must be positive");
  }
}

}  // namespace

Complex weierstrass_p(Complex z, double side) {
  require_side(side);
  const Complex u = reduce(z, side);
  require_off_lattice(u, side);
  const Complex zeta = u * side;
  return 1.0 / (zeta * zeta) + regular_part(u, side).value;
}

Complex weierstrass_p_prime(Complex z, double side) {
  require_side(side);
  const Complex u = reduce(z, side);
  require_off_lattice(u, side);
  const Complex zeta = u * side;
  return -2.0 / (zeta * zeta * zeta) + regular_part(u, side).derivative;
}

double weierstrass_e1(double side) { return weierstrass_p({0.5 * side, 0.0}, side).real(); }

double weierstrass_tail_bound(double side) {
  require_side(side);
  const double k = kPi / side;
  return k * k * dropped_rows_bound();
}

WeierstrassLocal weierstrass_local(Complex z, double side) {
  require_side(side);
  const Complex u = reduce(z, side);
  const Complex zeta = u * side;
  const Regular reg = regular_part(u, side);
  const Complex z2 = zeta * zeta;
  const Complex denom = 1.0 + z2 * reg.value;
  const Complex recip = z2 / denom;
  // p' / p^2 = (-2/zeta^3 + R') zeta^4 / (1 + zeta^2 R)^2.
  const Complex pos = (-2.0 * zeta + reg.derivative * z2 * z2) / (denom * denom);
  return {recip, pos};
}

}  // namespace pbsurf
