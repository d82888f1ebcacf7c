"""Continuum kernels on the upper half-plane H and the unit disk U.

Every quantity is evaluated in H from its closed form and transported to
other domains through an explicit conformal map ``phi: domain -> H`` with the
appropriate powers of ``|phi'|``.  Harmonic measure uses the convention in
which the whole boundary has mass ``2 pi``; divide by ``HARMONIC_MASS`` to get
a probability.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

HARMONIC_MASS = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)

_EDGE_TOL = 1e-13


class SingularPointError(ValueError):
    """A kernel was evaluated at a boundary or marked point where it blows up."""


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelValue:
    """A kernel value together with the product of |phi'| powers applied."""

    value: float
    weight: float


@dataclass(frozen=True)
class ContinuumPolygon:
    """A simply connected domain with an explicit map ``phi`` onto H.

    kind "H": phi is the identity (or a real Mobius map with coefficients
    ``mobius``).  kind "U": phi(w) = i (1 + rho w) / (1 - rho w) with
    |rho| = 1, which sends the boundary point 1/rho to infinity and traverses
    the circle counterclockwise as the real line left to right.
    """

    kind: str
    marks: tuple = ()
    rho: complex = 1.0
    mobius: tuple = (1.0, 0.0, 0.0, 1.0)

    @classmethod
    def half_plane(cls, marks=()) -> "ContinuumPolygon":
        return cls("H", tuple(float(x) for x in marks))

    @classmethod
    def half_plane_mobius(cls, a, b, c, d, marks=()) -> "ContinuumPolygon":
        if a * d - b * c <= 0:
            raise ValueError("Mobius map must have positive determinant to preserve H")
        return cls("H", tuple(float(x) for x in marks), mobius=(a, b, c, d))

    @classmethod
    def unit_disk(cls, marks=(), angles=None) -> "ContinuumPolygon":
        """Unit disk with marked boundary points, sent to H with the pole in
        the middle of the counterclockwise arc from the last mark to the first."""
        if angles is not None:
            marks = tuple(cmath.exp(1j * a) for a in angles)
        marks = tuple(complex(m) for m in marks)
        if marks:
            a_first = cmath.phase(marks[0])
            a_last = cmath.phase(marks[-1])
            gap = (a_first - a_last) % (2 * math.pi)
            if gap == 0:
                gap = 2 * math.pi
            pole = a_last + gap / 2
        else:
            pole = 0.0
        return cls("U", marks, rho=cmath.exp(-1j * pole))

    # map and derivative ------------------------------------------------------
    def phi(self, z) -> complex:
        z = complex(z)
        if self.kind == "U":
            w = self.rho * z
            if abs(1 - w) < _EDGE_TOL:
                raise SingularPointError("point maps to infinity")
            return 1j * (1 + w) / (1 - w)
        a, b, c, d = self.mobius
        return (a * z + b) / (c * z + d)

    def dphi(self, z) -> complex:
        z = complex(z)
        if self.kind == "U":
            w = self.rho * z
            return 2j * self.rho / (1 - w) ** 2
        a, b, c, d = self.mobius
        return (a * d - b * c) / (c * z + d) ** 2

    def boundary_image(self, x) -> float:
        return self.phi(x).real

    def interior_image(self, z) -> complex:
        zeta = self.phi(z)
        if zeta.imag <= _EDGE_TOL:
            raise SingularPointError(f"{z} is not an interior point")
        return zeta

    @property
    def mark_images(self) -> tuple[float, ...]:
        return tuple(self.boundary_image(x) for x in self.marks)


# Half-plane closed forms -----------------------------------------------------

def cr_h(z: complex) -> float:
    return 2.0 * complex(z).imag


def poisson_h(z: complex, x: float) -> float:
    z = complex(z)
    return 2.0 * z.imag / abs(z - x) ** 2


def boundary_poisson_h(x: float, y: float) -> float:
    if x == y:
        raise SingularPointError("boundary Poisson kernel at coincident points")
    return 2.0 / (y - x) ** 2


def green_h(z: complex, w: complex) -> float:
    z, w = complex(z), complex(w)
    if z == w:
        raise SingularPointError("Green's function on the diagonal")
    return math.log(abs(z - w.conjugate()) / abs(z - w))


def hmeasure_h(z: complex, a: float, b: float) -> float:
    """Harmonic measure (mass 2 pi) of the boundary arc from a to b, left to
    right through infinity when b < a."""
    z = complex(z)
    return (2.0 * (cmath.phase(z - b) - cmath.phase(z - a))) % HARMONIC_MASS


def hmeasure_boundary_h(x: float, a: float, b: float) -> float:
    """Renormalised harmonic measure of the arc from a to b seen from x."""
    if x in (a, b) or (a < x < b) or (b < a and (x > a or x < b)):
        raise SingularPointError("boundary point lies on the arc")
    return 2.0 / (a - x) - 2.0 / (b - x)


def _ordered_product(x1, x2, x3) -> float:
    return (x2 - x1) * (x3 - x2) * (x3 - x1)


def z_tri_h(x1: float, x2: float, x3: float, z: complex) -> float:
    z = complex(z)
    if z.imag <= 0:
        raise SingularPointError("z must lie in the open upper half-plane")
    den = abs((z - x1) * (z - x2) * (z - x3)) ** 4
    return 4.0 * SQRT2 * _ordered_product(x1, x2, x3) * z.imag ** 4 / den


def density_h(x1: float, x2: float, x3: float, z: complex) -> float:
    z = complex(z)
    if z.imag <= 0:
        raise SingularPointError("z must lie in the open upper half-plane")
    num = _ordered_product(x1, x2, x3) ** 2 * z.imag ** 4
    return 8.0 / (3.0 * math.pi) * num / abs((z - x1) * (z - x2) * (z - x3)) ** 4


def dpoisson_dz_h(z: complex, x: float) -> complex:
    return -1j / (complex(z) - x) ** 2


def dpoisson_dzbar_h(z: complex, x: float) -> complex:
    return 1j / (complex(z).conjugate() - x) ** 2


def dhmeasure_dz_h(z: complex, a: float, b: float) -> complex:
    z = complex(z)
    return 1j * (1.0 / (b - z) - 1.0 / (a - z))


def dhmeasure_dzbar_h(z: complex, a: float, b: float) -> complex:
    zb = complex(z).conjugate()
    return 1j * (1.0 / (a - zb) - 1.0 / (b - zb))


# Transported kernels ----------------------------------------------------------

def _check_boundary_points(poly: ContinuumPolygon, *xs) -> list[float]:
    out = []
    for x in xs:
        if poly.kind == "U" and abs(abs(complex(x)) - 1.0) > 1e-9:
            raise ValueError(f"{x} is not on the unit circle")
        out.append(poly.boundary_image(x))
    return out


def cr(poly: ContinuumPolygon, z, detail: bool = False):
    zeta = poly.interior_image(z)
    w = abs(poly.dphi(z))
    v = cr_h(zeta) / w
    return KernelValue(v, 1.0 / w) if detail else v


def poisson(poly: ContinuumPolygon, z, x, detail: bool = False):
    (X,) = _check_boundary_points(poly, x)
    w = abs(poly.dphi(x))
    v = w * poisson_h(poly.interior_image(z), X)
    return KernelValue(v, w) if detail else v


def boundary_poisson(poly: ContinuumPolygon, x, y, detail: bool = False):
    X, Y = _check_boundary_points(poly, x, y)
    w = abs(poly.dphi(x) * poly.dphi(y))
    v = w * boundary_poisson_h(X, Y)
    return KernelValue(v, w) if detail else v


def green_c(poly: ContinuumPolygon, z, w) -> float:
    return green_h(poly.interior_image(z), poly.interior_image(w))


def hmeasure(poly: ContinuumPolygon, z, arc) -> float:
    """Harmonic measure (mass 2 pi) of the counterclockwise arc from arc[0] to arc[1]."""
    a, b = _check_boundary_points(poly, *arc)
    return hmeasure_h(poly.interior_image(z), a, b)


def hmeasure_boundary(poly: ContinuumPolygon, x, arc, detail: bool = False):
    X, a, b = _check_boundary_points(poly, x, *arc)
    w = abs(poly.dphi(x))
    v = w * hmeasure_boundary_h(X, a, b)
    return KernelValue(v, w) if detail else v


def _marks3(poly: ContinuumPolygon):
    if len(poly.marks) != 3:
        raise ValueError("three marked points required")
    return poly.mark_images


def z_tri(poly: ContinuumPolygon, z) -> float:
    """Tripod partition function, transported from the half-plane closed form."""
    x1, x2, x3 = _marks3(poly)
    weight = np.prod([abs(poly.dphi(x)) for x in poly.marks]) * abs(poly.dphi(z)) ** 2
    return float(weight * z_tri_h(x1, x2, x3, poly.interior_image(z)))


def z_tri_from_kernels(poly: ContinuumPolygon, z) -> float:
    """Tripod partition function assembled from CR and Poisson kernels."""
    x1, x2, x3 = poly.marks
    pz = poisson(poly, z, x1) * poisson(poly, z, x2) * poisson(poly, z, x3)
    pb = boundary_poisson(poly, x1, x2) * boundary_poisson(poly, x2, x3) * boundary_poisson(poly, x3, x1)
    return pz ** 2 / (cr(poly, z) ** 2 * math.sqrt(pb))


def z_tri_integral_closed(poly: ContinuumPolygon) -> float:
    x1, x2, x3 = poly.marks
    pb = boundary_poisson(poly, x1, x2) * boundary_poisson(poly, x2, x3) * boundary_poisson(poly, x3, x1)
    return 0.75 * math.pi * math.sqrt(pb)


def density_p(poly: ContinuumPolygon, z) -> float:
    x1, x2, x3 = _marks3(poly)
    return float(density_h(x1, x2, x3, poly.interior_image(z)) * abs(poly.dphi(z)) ** 2)


def density_from_kernels(poly: ContinuumPolygon, z) -> float:
    x1, x2, x3 = poly.marks
    pz = poisson(poly, z, x1) * poisson(poly, z, x2) * poisson(poly, z, x3)
    pb = boundary_poisson(poly, x1, x2) * boundary_poisson(poly, x2, x3) * boundary_poisson(poly, x3, x1)
    return 4.0 / (3.0 * math.pi) * pz ** 2 / (cr(poly, z) ** 2 * pb)


def _poisson_rows(poly: ContinuumPolygon, z, x) -> np.ndarray:
    """(d/dz P, -i d/dzbar P, P) at z for the boundary point x."""
    (X,) = _check_boundary_points(poly, x)
    zeta = poly.interior_image(z)
    dz = poly.dphi(z)
    s = abs(poly.dphi(x))
    return np.array([s * dpoisson_dz_h(zeta, X) * dz,
                     -1j * s * dpoisson_dzbar_h(zeta, X) * dz.conjugate(),
                     s * poisson_h(zeta, X)])


def det_M(poly: ContinuumPolygon, z) -> float:
    if len(poly.marks) != 3:
        raise ValueError("three marked points required")
    m = np.column_stack([_poisson_rows(poly, z, x) for x in poly.marks])
    d = np.linalg.det(m)
    if abs(d.imag) > 1e-8 * max(1.0, abs(d)):
        raise ArithmeticError(f"det M has imaginary part {d.imag:.3e}")
    return float(d.real)


def det_N(poly: ContinuumPolygon, x1, x3, z) -> float:
    a, b = _check_boundary_points(poly, x1, x3)
    zeta = poly.interior_image(z)
    dz = poly.dphi(z)
    h13 = hmeasure_h(zeta, a, b)
    middle = np.array([2.0 * dhmeasure_dz_h(zeta, a, b) * dz,
                       -2j * dhmeasure_dzbar_h(zeta, a, b) * dz.conjugate(),
                       2.0 * h13 - HARMONIC_MASS])
    m = np.column_stack([_poisson_rows(poly, z, x1), middle, _poisson_rows(poly, z, x3)])
    d = np.linalg.det(m)
    if abs(d.imag) > 1e-8 * max(1.0, abs(d)):
        raise ArithmeticError(f"det N has imaginary part {d.imag:.3e}")
    return float(d.real)


def q_via_det_N(poly: ContinuumPolygon, x1, x3, z) -> float:
    return det_N(poly, x1, x3, z) / (HARMONIC_MASS * boundary_poisson(poly, x1, x3))


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < math.pi:
        raise ValueError("theta must lie in (0, pi)")


def q_closed(r: float, theta: float) -> float:
    """q(H; 0, infinity; r e^{i theta}) in a form regular at theta = pi/2."""
    _check_theta(theta)
    if r <= 0:
        raise ValueError("r must be positive")
    s = math.sin(theta)
    return 2.0 / (math.pi * r * r) * (2.0 * s * s + (math.pi / 2 - theta) * math.sin(2 * theta))


def q_tangent_form(r: float, theta: float) -> float:
    """Same function written with tan(theta); singular at theta = pi/2."""
    return 2.0 * math.sin(2 * theta) / (math.pi * r * r) * (math.tan(theta) - theta + math.pi / 2)


def g_closed(theta: float) -> float:
    if not 0.0 <= theta <= math.pi:
        raise ValueError("theta must lie in [0, pi]")
    s, c = math.sin(theta), math.cos(theta)
    return 4.0 / (3.0 * math.pi) * (theta * (math.pi - theta) + (math.pi / 2 - theta) * s * c + 2.0 * s * s)


def _to_zero_infinity(poly: ContinuumPolygon, x1, x3, z) -> tuple[complex, complex]:
    """Image of z under a map onto (H; 0, infinity) sending x1 -> 0, x3 -> infinity,
    together with the derivative of that map at z."""
    a, b = _check_boundary_points(poly, x1, x3)
    zeta = poly.interior_image(z)
    if a < b:
        m, dm = (zeta - a) / (b - zeta), (b - a) / (b - zeta) ** 2
    else:
        # the arc from x1 to x3 passes through infinity
        m, dm = (zeta - a) / (zeta - b), (a - b) / (zeta - b) ** 2
    return m, dm * poly.dphi(z)


def q_general(poly: ContinuumPolygon, x1, x3, z) -> float:
    w, dw = _to_zero_infinity(poly, x1, x3, z)
    return abs(dw) ** 2 * q_closed(abs(w), cmath.phase(w))


def g_general(poly: ContinuumPolygon, x1, x3, z) -> float:
    w, _ = _to_zero_infinity(poly, x1, x3, z)
    return g_closed(min(max(cmath.phase(w), 0.0), math.pi))


# Quadrature -------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    tail_bound: float = 0.0


def integrate_half_plane(f, epsrel: float = 1e-10) -> QuadratureResult:
    """Integrate f over H by pulling back to the unit disk with the Cayley map
    w -> i (1 + w) / (1 - w), whose Jacobian is 4 / |1 - w|^4.  Integrands
    decaying faster than |zeta|^-4 become bounded on the disk, so no
    truncation of H is needed."""
    def g(w):
        if abs(w) >= 1.0:
            return 0.0
        zeta = 1j * (1 + w) / (1 - w)
        return f(zeta) * 4.0 / abs(1 - w) ** 4

    return integrate_disk(g, epsrel)


def integrate_disk(f, epsrel: float = 1e-10) -> QuadratureResult:
    val, err = integrate.dblquad(lambda r, t: f(r * cmath.exp(1j * t)) * r, 0.0, 2 * math.pi,
                                 0.0, 1.0, epsabs=1e-13, epsrel=epsrel)
    return QuadratureResult(val, err)


def integrate_z_tri(poly: ContinuumPolygon, epsrel: float = 1e-10) -> QuadratureResult:
    """Numerical integral of Z_tri over the domain."""
    if poly.kind == "U":
        res = integrate_disk(lambda w: z_tri(poly, w) if abs(w) < 1 else 0.0, epsrel)
    else:
        if poly.mobius != (1.0, 0.0, 0.0, 1.0):
            raise ValueError("integrate over H only with the identity map")
        x1, x2, x3 = poly.mark_images
        res = integrate_half_plane(lambda w: z_tri_h(x1, x2, x3, w) if w.imag > 0 else 0.0, epsrel)
    if not math.isfinite(res.value):
        raise QuadratureError("quadrature did not converge")
    return res


def integrate_I0(epsrel: float = 1e-11) -> QuadratureResult:
    """The scale-free integral of Im(u)^4 / |u (u - 1)|^4 over H."""
    def f(u):
        return u.imag ** 4 / abs(u * (u - 1)) ** 4 if u.imag > 0 else 0.0

    return integrate_half_plane(f, epsrel)


def integrate_density(poly: ContinuumPolygon, epsrel: float = 1e-10) -> QuadratureResult:
    if poly.kind == "U":
        return integrate_disk(lambda w: density_p(poly, w) if abs(w) < 1 else 0.0, epsrel)
    x1, x2, x3 = poly.mark_images
    return integrate_half_plane(lambda w: density_h(x1, x2, x3, w) if w.imag > 0 else 0.0, epsrel)


def g_via_green_integral(theta: float, epsrel: float = 1e-9, r_max: float | None = None,
                         log_span: float = 60.0) -> QuadratureResult:
    """(2 / 3 pi) times the integral of G(H; z, w) q(w) over H at z = e^{i theta}.

    In logarithmic polar coordinates w = e^{s + i t} the measure q dA becomes
    (2 / pi) f(t) ds dt, so the integral runs over a strip.  The Green's
    function decays like e^{-|s|} at both ends, so |s| <= log_span loses
    nothing at double precision; ``r_max`` truncates at |w| = r_max instead.
    """
    _check_theta(theta)
    z = cmath.exp(1j * theta)
    s_hi = log_span if r_max is None else math.log(r_max)

    def f_t(t):
        s = math.sin(t)
        return 2.0 / math.pi * (2.0 * s * s + (math.pi / 2 - t) * math.sin(2 * t))

    def h(s, t):
        w = cmath.exp(s + 1j * t)
        return 0.0 if w == z else green_h(z, w)

    def inner(t):
        # log singularity at s = 0 when t = theta
        a, _ = integrate.quad(h, -log_span, 0.0, args=(t,), epsabs=1e-13, epsrel=epsrel, limit=400)
        b, _ = integrate.quad(h, 0.0, s_hi, args=(t,), epsabs=1e-13, epsrel=epsrel, limit=400)
        return f_t(t) * (a + b)

    val, err = integrate.quad(inner, 0.0, math.pi, points=[theta], epsabs=1e-12, epsrel=epsrel, limit=400)
    return QuadratureResult(2.0 / (3.0 * math.pi) * val, 2.0 / (3.0 * math.pi) * err)
