"""Radial Loewner chains and radial SLE_kappa(rho1, rho2) in the unit disk.

A driver is stored as a piecewise-constant angle on its time grid: on the
step [t_k, t_{k+1}) the angle is ``xi[k]``.  With a constant angle the radial
Loewner flow integrates in closed form, since w = g e^{-i xi} satisfies
w / (1 + w)^2 = C e^t.  Every map here (forward flow, trace, inverse flow,
capacity oracle) is a composition of these exact slit maps, so the only
discretisation error is the piecewise-constant driver.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import continuum
from ._walks import njit
from .ustsim import RngState, as_generator

TWO_PI = 2.0 * math.pi
COLLISION_TOL = 1e-12
GAP_FACTOR = 10.0
DT_FACTOR = 1e-3
_BOUNDARY_TOL = 1e-9


class PhaseCollisionError(RuntimeError):
    """A force point gap fell below COLLISION_TOL."""


class SwallowedPointError(ValueError):
    """A tracked point was absorbed into the hull."""


class MapDegenerationError(RuntimeError):
    def __init__(self, message: str, achieved_cr: float):
        self.achieved_cr = achieved_cr
        super().__init__(f"{message} (achieved conformal radius {achieved_cr:.3g})")


@dataclass(frozen=True)
class SleParams:
    kappa: float = 2.0
    rho1: float = 2.0
    rho2: float = 2.0
    theta1: float = 0.0
    theta2: float = 2.0 * math.pi / 3.0
    theta3: float = 4.0 * math.pi / 3.0

    def __post_init__(self):
        if not 0.0 < self.kappa <= 4.0:
            raise ValueError("kappa must lie in (0, 4]")
        if not self.theta1 < self.theta2 < self.theta3 < self.theta1 + TWO_PI:
            raise ValueError("angles must satisfy theta1 < theta2 < theta3 < theta1 + 2 pi")

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta3)

    def min_gap(self) -> float:
        """Smallest gap between the driving angle and a force point with rho != 0."""
        gaps = [math.inf]
        if self.rho1 != 0.0:
            gaps.append(self.theta1 + TWO_PI - self.theta3)
        if self.rho2 != 0.0:
            gaps.append(self.theta3 - self.theta2)
        return min(gaps)

    def max_dt(self) -> float:
        g = self.min_gap()
        return math.inf if math.isinf(g) else DT_FACTOR * g * g / self.kappa


@dataclass(frozen=True)
class Driver:
    """Driving angle and force points on the grid ``t``; V1 is stored unlifted,
    so the ordering reads V2 < xi < V1 + 2 pi.  ``log_dv`` holds log h_t'(theta_j)."""

    t: np.ndarray
    xi: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    log_dv1: np.ndarray
    log_dv2: np.ndarray
    params: SleParams
    dt: float
    dt_policy: str

    def __len__(self):
        return len(self.t)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def ordered(self) -> bool:
        return bool(np.all(self.V2 < self.xi) and np.all(self.xi < self.V1 + TWO_PI))

    def prefix(self, k: int) -> "Driver":
        """The driver restricted to its first k + 1 grid points."""
        s = slice(0, k + 1)
        return Driver(self.t[s], self.xi[s], self.V1[s], self.V2[s], self.log_dv1[s],
                      self.log_dv2[s], self.params, self.dt, self.dt_policy)

    def refine(self, m: int) -> "Driver":
        """The same chain on a grid with each step split into ``m``; the driver
        is piecewise constant, so this only samples the curve more finely."""
        if m < 1:
            raise ValueError("m must be at least 1")
        if m == 1:
            return self
        n = len(self.t) - 1
        frac = np.arange(m) / m
        t = np.append((self.t[:-1, None] + np.diff(self.t)[:, None] * frac).ravel(), self.t[-1])

        def hold(a):
            return np.append(np.repeat(a[:-1], m), a[-1]) if n else a.copy()
        return Driver(t, hold(self.xi), hold(self.V1), hold(self.V2), hold(self.log_dv1),
                      hold(self.log_dv2), self.params, self.dt / m, self.dt_policy)

    @classmethod
    def constant(cls, angle: float, T: float, n_steps: int, params: SleParams | None = None) -> "Driver":
        t = np.linspace(0.0, T, n_steps + 1)
        xi = np.full_like(t, angle)
        nan = np.full_like(t, np.nan)
        params = params or SleParams(rho1=0.0, rho2=0.0)
        return cls(t, xi, nan, nan, nan, nan, params, T / n_steps, "constant")


@dataclass(frozen=True)
class Trace:
    points: np.ndarray
    times: np.ndarray
    warnings: tuple = ()

    def __len__(self):
        return len(self.points)

    def first_hit(self, radius: float) -> complex | None:
        """Linearly interpolated first crossing of the circle |z| = radius."""
        r = np.abs(self.points)
        inside = np.flatnonzero(r <= radius)
        if inside.size == 0:
            return None
        k = int(inside[0])
        if k == 0:
            return complex(self.points[0])
        a, b = self.points[k - 1], self.points[k]
        s = (r[k - 1] - radius) / (r[k - 1] - r[k])
        return complex(a + s * (b - a))


@dataclass(frozen=True)
class FlowState:
    """Images and derivative moduli of tracked points at time ``t``."""

    t: float
    xi: float
    g: np.ndarray
    dg: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    swallowed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def dg0(self) -> float:
        return math.exp(self.t)


# compiled kernels -------------------------------------------------------------

@njit(cache=True)
def _cot_half(x):
    return math.cos(0.5 * x) / math.sin(0.5 * x)


@njit(cache=True)
def _drive_kernel(kappa, rho_up, rho_down, xi0, up0, down0, T, dt, noise, rng):
    """Euler-Maruyama for (xi, up, down) with up = V1 lifted above xi.

    A step whose new gap to a rho != 0 force point would shrink below
    GAP_FACTOR sqrt(kappa h) is split in two halves with a Brownian bridge,
    so the increment over every base step is unchanged.  Returns the status
    (0 ok, 1 collision) and the recorded arrays.
    """
    cap = int(T / dt) + 16
    t_out = np.empty(cap)
    xi_out = np.empty(cap)
    up_out = np.empty(cap)
    dn_out = np.empty(cap)
    l1_out = np.empty(cap)
    l2_out = np.empty(cap)
    t, xi, up, dn, l1, l2 = 0.0, xi0, up0, down0, 0.0, 0.0
    t_out[0], xi_out[0], up_out[0], dn_out[0], l1_out[0], l2_out[0] = t, xi, up, dn, l1, l2
    n = 1
    sk = math.sqrt(kappa)
    h_min = dt * 2.0 ** -40
    hs = np.empty(128)
    bs = np.empty(128)
    n_base = int(math.ceil(T / dt - 1e-9))
    for k in range(n_base):
        h0 = min(dt, T - k * dt)
        if h0 <= 0.0:
            break
        b0 = math.sqrt(h0) * rng.standard_normal() if noise else 0.0
        hs[0] = h0
        bs[0] = b0
        top = 1
        while top > 0:
            top -= 1
            h = hs[top]
            b = bs[top]
            c1 = _cot_half(up - xi)
            c2 = _cot_half(dn - xi)
            nxi = xi + sk * b - 0.5 * rho_up * c1 * h - 0.5 * rho_down * c2 * h
            nup = up + c1 * h
            ndn = dn + c2 * h
            gap = math.inf
            old = math.inf
            if rho_up != 0.0:
                gap = min(gap, nup - nxi)
                old = min(old, up - xi)
            if rho_down != 0.0:
                gap = min(gap, nxi - ndn)
                old = min(old, xi - dn)
            thr = GAP_FACTOR * math.sqrt(kappa * h)
            split = gap <= 0.0 or (gap < thr and gap < old)
            if split and h > h_min and top < 126:
                b1 = 0.5 * b + (0.5 * math.sqrt(h) * rng.standard_normal() if noise else 0.0)
                hs[top] = 0.5 * h
                bs[top] = b - b1
                hs[top + 1] = 0.5 * h
                bs[top + 1] = b1
                top += 2
                continue
            if gap <= COLLISION_TOL:
                return 1, t_out[:n], xi_out[:n], up_out[:n], dn_out[:n], l1_out[:n], l2_out[:n]
            s1 = math.sin(0.5 * (up - xi))
            s2 = math.sin(0.5 * (dn - xi))
            l1 -= 0.5 * h / (s1 * s1)
            l2 -= 0.5 * h / (s2 * s2)
            xi, up, dn = nxi, nup, ndn
            t += h
            if n == t_out.shape[0]:
                m = 2 * n
                t_out = _grow_f(t_out, m)
                xi_out = _grow_f(xi_out, m)
                up_out = _grow_f(up_out, m)
                dn_out = _grow_f(dn_out, m)
                l1_out = _grow_f(l1_out, m)
                l2_out = _grow_f(l2_out, m)
            t_out[n], xi_out[n], up_out[n], dn_out[n], l1_out[n], l2_out[n] = t, xi, up, dn, l1, l2
            n += 1
    return 0, t_out[:n], xi_out[:n], up_out[:n], dn_out[:n], l1_out[:n], l2_out[:n]


@njit(cache=True)
def _grow_f(buf, size):
    out = np.empty(size)
    out[: buf.shape[0]] = buf
    return out


@njit(cache=True)
def _solve(c, side):
    """Root of c w^2 + (2c - 1) w + c = 0 inside the disk; the two roots have
    product 1, so on the circle take the one on the given side of the axis."""
    s = cmath.sqrt(1.0 - 4.0 * c)
    a1 = (1.0 - 2.0 * c) + s
    a2 = (1.0 - 2.0 * c) - s
    big = a1 if abs(a1) >= abs(a2) else a2
    small = 2.0 * c / big
    if abs(abs(small) - 1.0) > _BOUNDARY_TOL or small.imag * side >= 0.0:
        return small
    return big / (2.0 * c)


@njit(cache=True)
def _forward(z, rot, eh):
    """Radial slit map of capacity log(eh) at direction rot = e^{i xi}, and its derivative."""
    u = z / rot
    if u == 0:
        return 0j, eh + 0j
    w = _solve(eh * u / (1.0 + u) ** 2, u.imag)
    return w * rot, eh * (1.0 - u) / (1.0 + u) ** 3 * (1.0 + w) ** 3 / (1.0 - w)


@njit(cache=True)
def _inverse(w, rot, emh):
    u = w / rot
    if u == 0:
        return 0j
    return _solve(emh * u / (1.0 + u) ** 2, u.imag) * rot


@njit(cache=True)
def _step_data(t, xi, k):
    return cmath.exp(1j * xi[k]), math.exp(t[k + 1] - t[k])


@njit(cache=True)
def _flow_points(t, xi, z, k_end):
    out = z.copy()
    dz = np.ones(z.shape[0], dtype=np.complex128)
    swallowed = np.zeros(z.shape[0], dtype=np.bool_)
    for k in range(k_end):
        rot, eh = _step_data(t, xi, k)
        for i in range(z.shape[0]):
            if swallowed[i]:
                continue
            w, d = _forward(out[i], rot, eh)
            out[i] = w
            dz[i] *= d
            if abs(w) >= 1.0 - 1e-12:
                swallowed[i] = True
    return out, dz, swallowed


@njit(cache=True)
def _flow_angles(t, xi, theta, k_end):
    out = theta.copy()
    dh = np.ones(theta.shape[0])
    for k in range(k_end):
        e = math.exp(-0.5 * (t[k + 1] - t[k]))
        for i in range(theta.shape[0]):
            x = (out[i] - xi[k]) % (2.0 * math.pi)
            nx = 2.0 * math.acos(math.cos(0.5 * x) * e)
            s = math.sin(0.5 * nx)
            dh[i] *= e * math.sin(0.5 * x) / s if s > 0.0 else 0.0
            out[i] = xi[k] + nx
            if out[i] - theta[i] > math.pi:
                out[i] -= 2.0 * math.pi
    return out, dh


@njit(cache=True)
def _inverse_points(t, xi, w, k_end):
    out = w.copy()
    for k in range(k_end - 1, -1, -1):
        rot, eh = _step_data(t, xi, k)
        emh = 1.0 / eh
        for i in range(out.shape[0]):
            out[i] = _inverse(out[i], rot, emh)
    return out


@njit(cache=True)
def _tips(t, xi, idx):
    """gamma(t_k) = G_1^{-1} o ... o G_k^{-1}(e^{i xi_{k-1}}) for each k in idx,
    pulled back together so every step's data is computed once."""
    n = idx.shape[0]
    pts = np.empty(n, dtype=np.complex128)
    top = n - 1
    k_max = idx[n - 1] if n else 0
    for m in range(k_max - 1, -1, -1):
        rot, eh = _step_data(t, xi, m)
        emh = 1.0 / eh
        while top >= 0 and idx[top] == m + 1:
            pts[top] = rot
            top -= 1
        for j in range(top + 1, n):
            pts[j] = _inverse(pts[j], rot, emh)
    while top >= 0:
        pts[top] = cmath.exp(1j * xi[0])
        top -= 1
    return pts


@njit(cache=True)
def _first_hit(t, xi, radius):
    """Index k of the first tip with |gamma(t_k)| <= radius, and that tip; -1 if none."""
    for k in range(1, t.shape[0]):
        p = cmath.exp(1j * xi[k - 1])
        for m in range(k - 1, -1, -1):
            p = _inverse(p, cmath.exp(1j * xi[m]), math.exp(t[m] - t[m + 1]))
        if abs(p) <= radius:
            return k, p
    return -1, 0j


@njit(cache=True)
def _zipper_capacity(points):
    """Capacity of the hull through ``points`` (points[0] on the circle), built
    from successive radial slits through the mapped vertices."""
    p = points.copy()
    total = 0.0
    for k in range(1, p.shape[0]):
        q = p[k]
        r = abs(q)
        if r >= 1.0:
            continue
        a = math.atan2(q.imag, q.real)
        h = math.log((1.0 + r) ** 2 / (4.0 * r))
        total += h
        rot, eh = cmath.exp(1j * a), math.exp(h)
        for m in range(k + 1, p.shape[0]):
            p[m] = _forward(p[m], rot, eh)[0]
    return total


# drivers -----------------------------------------------------------------------

def _drive(kappa, rho_up, rho_down, xi0, up0, down0, T, dt, noise, gen):
    status, t, xi, up, dn, l1, l2 = _drive_kernel(
        float(kappa), float(rho_up), float(rho_down), float(xi0), float(up0), float(down0),
        float(T), float(dt), bool(noise), gen)
    if status:
        raise PhaseCollisionError(f"force point gap below {COLLISION_TOL:g} at t={t[-1]:.6g}")
    return t, xi, up, dn, l1, l2


def drive_radial(params: SleParams, T: float, dt: float, rng, zero_noise: bool = False) -> Driver:
    """Radial SLE_kappa(rho1, rho2) driver from e^{i theta3} with force points
    e^{i theta1}, e^{i theta2}.  A dt above the gap bound is clamped to it."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    bound = params.max_dt()
    policy = "fixed"
    if dt > bound:
        dt, policy = bound, "clamped"
    gen = None if zero_noise else as_generator(rng)
    if T == 0:
        z = np.zeros(1)
        return Driver(z, np.array([params.theta3]), np.array([params.theta1]),
                      np.array([params.theta2]), z.copy(), z.copy(), params, dt, policy)
    if gen is None:
        gen = np.random.Generator(np.random.Philox(0))
    t, xi, up, dn, l1, l2 = _drive(params.kappa, params.rho1, params.rho2, params.theta3,
                                   params.theta1 + TWO_PI, params.theta2, T, dt, not zero_noise, gen)
    return Driver(t, xi, up - TWO_PI, dn, l1, l2, params, dt, policy + "+bridge-halving")


# flows --------------------------------------------------------------------------

def _k_end(driver: Driver, t_end: float | None) -> int:
    if t_end is None:
        return len(driver.t) - 1
    k = int(np.searchsorted(driver.t, t_end + 1e-12, side="right")) - 1
    if abs(driver.t[k] - t_end) > 1e-9:
        raise ValueError("t_end must be a grid time of the driver")
    return k


def radial_flow(driver: Driver, points=(), angles=(), t_end: float | None = None) -> FlowState:
    """g_t of interior points and the covering flow h_t of boundary angles."""
    k = _k_end(driver, t_end)
    z = np.asarray(points, dtype=np.complex128).ravel()
    if np.any(np.abs(z) >= 1.0):
        raise ValueError("interior points must lie in the open unit disk")
    g, dg, sw = _flow_points(driver.t, driver.xi, z, k)
    h, dh = _flow_angles(driver.t, driver.xi, np.asarray(angles, dtype=float).ravel(), k)
    return FlowState(float(driver.t[k]), float(driver.xi[k]), g, np.abs(dg), h, dh, sw)


def flow_segment(driver: Driver, state: FlowState, k0: int, k1: int) -> FlowState:
    """Continue a flow state from grid index k0 to k1."""
    t, xi = driver.t[k0:k1 + 1], driver.xi[k0:k1 + 1]
    g, dg, sw = _flow_points(t, xi, state.g.astype(np.complex128), k1 - k0)
    h, dh = _flow_angles(t, xi, state.h.astype(float), k1 - k0)
    return FlowState(float(driver.t[k1]), float(driver.xi[k1]), g, state.dg * np.abs(dg), h,
                     state.dh * dh, state.swallowed | sw)


def driver_state(driver: Driver, k: int | None = None) -> FlowState:
    """Flow state of the force points and of 0, read off the driver itself."""
    k = len(driver.t) - 1 if k is None else k
    return FlowState(float(driver.t[k]), float(driver.xi[k]), np.zeros(1, dtype=np.complex128),
                     np.array([math.exp(driver.t[k])]),
                     np.array([driver.V1[k], driver.V2[k]]),
                     np.exp([driver.log_dv1[k], driver.log_dv2[k]]))


def inverse_flow(driver: Driver, points, t_end: float | None = None) -> np.ndarray:
    """g_t^{-1} of points of the closed disk."""
    k = _k_end(driver, t_end)
    return _inverse_points(driver.t, driver.xi, np.asarray(points, dtype=np.complex128).ravel(), k)


def _trace_indices(n: int, resolution: int | None) -> np.ndarray:
    if resolution is None or resolution >= n:
        return np.arange(n, dtype=np.int64)
    return np.unique(np.linspace(0, n - 1, resolution).round().astype(np.int64))


def trace(driver: Driver, resolution: int | None = None, max_spacing: float | None = None) -> Trace:
    """Tips gamma(t_k) at ``resolution`` grid times.  A single slit step of
    capacity dt already has length about 2 sqrt(dt), so the default spacing
    warning threshold is max(0.05, 3 sqrt(dt))."""
    idx = _trace_indices(len(driver.t), resolution)
    pts = _tips(driver.t, driver.xi, idx)
    if max_spacing is None:
        max_spacing = max(0.05, 3.0 * math.sqrt(float(np.max(np.diff(driver.t), initial=0.0))))
    notes = []
    if len(pts) > 1 and np.max(np.abs(np.diff(pts))) > max_spacing:
        notes.append(f"trace spacing exceeds {max_spacing:g}; raise the resolution")
    return Trace(pts, driver.t[idx].copy(), tuple(notes))


def first_hit(driver: Driver, radius: float) -> tuple[float, complex] | None:
    """Time and position of the first trace tip inside |z| <= radius."""
    k, p = _first_hit(driver.t, driver.xi, float(radius))
    return None if k < 0 else (float(driver.t[k]), complex(p))


def hull_capacity(points) -> float:
    """Capacity -log CR(U minus hull; 0) of the curve through ``points``."""
    return float(_zipper_capacity(np.asarray(points, dtype=np.complex128)))


def _segments_cross(a0, a1, b0, b1) -> np.ndarray:
    def orient(p, q, r):
        return np.sign((q - p).real * (r - p).imag - (q - p).imag * (r - p).real)
    return ((orient(a0, a1, b0) * orient(a0, a1, b1) < 0)
            & (orient(b0, b1, a0) * orient(b0, b1, a1) < 0))


def self_intersections(points, separation: int = 2) -> int:
    """Proper crossings between polyline segments at least ``separation`` apart.

    Tips of a piecewise-constant chain are joined by chords, while the curve
    between them is a mapped slit that may start beside the previous tip;
    chords k and k + 2 can then cross without the curve doing so.
    """
    if separation < 2:
        raise ValueError("separation must be at least 2")
    p = np.asarray(points, dtype=np.complex128)
    a0, a1 = p[:-1], p[1:]
    count = 0
    for i in range(len(a0) - separation):
        count += int(_segments_cross(a0[i], a1[i], a0[i + separation:], a1[i + separation:]).sum())
    return count


def crossings(p, q, exclude_radius: float = 0.0) -> int:
    """Proper crossings between two polylines, ignoring segments inside |z| < exclude_radius."""
    p = np.asarray(p, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    qa, qb = q[:-1], q[1:]
    keep = np.minimum(np.abs(qa), np.abs(qb)) >= exclude_radius
    qa, qb = qa[keep], qb[keep]
    count = 0
    for i in range(len(p) - 1):
        if min(abs(p[i]), abs(p[i + 1])) < exclude_radius:
            continue
        count += int(_segments_cross(p[i], p[i + 1], qa, qb).sum())
    return count


# partition functions ---------------------------------------------------------------

def exponents_1rad(kappa: float) -> tuple[float, float]:
    return (6 - kappa) * (kappa - 2) / (8 * kappa), (6 - kappa) / (2 * kappa)


def exponents_3rad(kappa: float) -> tuple[float, float, float]:
    """Powers of the Poisson kernels, the conformal radius and the boundary kernels."""
    return (10 - kappa) / (2 * kappa), (10 - kappa) * (kappa + 2) / (8 * kappa), 1.0 / kappa


def partition_1rad(kappa: float, poly: continuum.ContinuumPolygon, x, z) -> float:
    a, b = exponents_1rad(kappa)
    return continuum.cr(poly, z) ** (-a) * continuum.poisson(poly, z, x) ** b


def partition_3rad(kappa: float, poly: continuum.ContinuumPolygon, z) -> float:
    x1, x2, x3 = poly.marks
    ep, ec, eb = exponents_3rad(kappa)
    pz = continuum.poisson(poly, z, x1) * continuum.poisson(poly, z, x2) * continuum.poisson(poly, z, x3)
    pb = (continuum.boundary_poisson(poly, x1, x2) * continuum.boundary_poisson(poly, x2, x3)
          * continuum.boundary_poisson(poly, x3, x1))
    return pz ** ep / (continuum.cr(poly, z) ** ec * pb ** eb)


def _z1_disk(kappa, angle, w) -> float:
    a, b = exponents_1rad(kappa)
    cr_w = 1.0 - abs(w) ** 2
    return cr_w ** (-a) * (cr_w / abs(cmath.exp(1j * angle) - w) ** 2) ** b


def _z3_disk(kappa, angles, w) -> float:
    ep, ec, eb = exponents_3rad(kappa)
    xs = [cmath.exp(1j * a) for a in angles]
    cr_w = 1.0 - abs(w) ** 2
    pz = np.prod([cr_w / abs(x - w) ** 2 for x in xs])
    pb = np.prod([2.0 / abs(xs[i] - xs[(i + 1) % 3]) ** 2 for i in range(3)])
    return pz ** ep / (cr_w ** ec * pb ** eb)


def _require_alive(state: FlowState, *idx):
    if state.swallowed.size and any(state.swallowed[i] for i in idx):
        raise SwallowedPointError("tracked point swallowed by the hull")


def rn_ratio_1rad(state: FlowState, kappa: float, i1: int, i2: int) -> float:
    """Ratio for targets g(i1) and g(i2): |g'(z1)/g'(z2)|^a Z1(e^{i xi}; g z1) / Z1(e^{i xi}; g z2)."""
    _require_alive(state, i1, i2)
    a, _ = exponents_1rad(kappa)
    return ((state.dg[i1] / state.dg[i2]) ** a * _z1_disk(kappa, state.xi, state.g[i1])
            / _z1_disk(kappa, state.xi, state.g[i2]))


def rn_ratio_3rad(state: FlowState, kappa: float, j1: int = 0, j2: int = 1, i: int = 0) -> float:
    """Three-sided versus one-sided ratio with force points h[j1], h[j2] and target g[i]."""
    _require_alive(state, i)
    _, b = exponents_1rad(kappa)
    w = state.g[i]
    z3 = _z3_disk(kappa, (state.h[j1], state.h[j2], state.xi), w)
    return (z3 / _z1_disk(kappa, state.xi, w) * state.dg[i] ** (4.0 / kappa)
            * (state.dh[j1] * state.dh[j2]) ** b)


def rn_path_3rad(driver: Driver, kappa: float | None = None) -> np.ndarray:
    """rn_ratio_3rad with target 0 at every grid point, from the driver's own force points."""
    kappa = driver.params.kappa if kappa is None else kappa
    _, b = exponents_1rad(kappa)
    ep, ec, eb = exponents_3rad(kappa)
    x = [np.exp(1j * driver.V1), np.exp(1j * driver.V2), np.exp(1j * driver.xi)]
    pb = np.prod([2.0 / np.abs(x[k] - x[(k + 1) % 3]) ** 2 for k in range(3)], axis=0)
    return pb ** (-eb) * np.exp(4.0 / kappa * driver.t + b * (driver.log_dv1 + driver.log_dv2))


# three-sided sampler -----------------------------------------------------------------

def _stage_generators(rng, n: int = 3):
    if isinstance(rng, RngState):
        return [np.random.Generator(np.random.Philox(np.random.SeedSequence(
            [rng.seed & (2**64 - 1), rng.stream, k + 1]))) for k in range(n)]
    return as_generator(rng).spawn(n)


@dataclass(frozen=True)
class ThreeSided:
    gamma3: Trace
    gamma1: Trace
    gamma2: Trace
    drivers: tuple

    def __iter__(self):
        return iter((self.gamma3, self.gamma1, self.gamma2))


def _lift_above(a, base):
    """The representative of angle a in (base, base + 2 pi]."""
    return base + (a - base) % TWO_PI


def _stage_params(start, up, down, rho_up) -> SleParams:
    """Parameters for a driver at ``start`` whose ccw neighbours are up then down."""
    up = _lift_above(up, start)
    down = _lift_above(down, up) - TWO_PI
    return SleParams(2.0, rho1=rho_up, rho2=0.0, theta1=up - TWO_PI, theta2=down, theta3=start)


def sample_three_sided_truncated(params: SleParams, stop_cr: float, rng, dt: float | None = None,
                                 resolution: int | None = 400) -> ThreeSided:
    """Truncated three-sided radial SLE_2 with target 0.

    gamma3 is radial SLE_2(2, 2) from theta3.  In its image, gamma1 runs from
    the image of theta1 with a rho = 2 force point at the image of theta2;
    in the doubly slit image gamma2 runs from the image of theta2 with no
    force point.  Each stage runs for capacity log(1/stop_cr) in its own
    coordinates and is pulled back through the earlier flows.  Each stage
    draws from its own child stream, so gamma3 for a smaller stop_cr extends
    gamma3 for a larger one.
    """
    if not 0.0 < stop_cr < 0.5:
        raise ValueError("stop_cr must lie in (0, 0.5)")
    if params.kappa != 2.0:
        raise ValueError("the three-sided sampler is implemented for kappa = 2")
    T = math.log(1.0 / stop_cr)
    gens = _stage_generators(rng)
    step = params.max_dt() if dt is None else dt

    d3 = drive_radial(params, T, step, gens[0])
    s1 = radial_flow(d3, angles=[params.theta1, params.theta2])
    a1, a2 = s1.h
    tip3 = d3.xi[-1]

    p1 = _stage_params(a1, a2, tip3, rho_up=2.0)
    d1 = drive_radial(p1, T, step, gens[1])
    s2 = radial_flow(d1, angles=[a2, tip3])
    b2, b3 = s2.h
    tip1 = d1.xi[-1]

    p2 = SleParams(2.0, 0.0, 0.0, *_stage_params(b2, b3, tip1, 0.0).angles)
    d2 = drive_radial(p2, T, step, gens[2])

    g3 = trace(d3, resolution)
    r1 = trace(d1, resolution)
    r2 = trace(d2, resolution)
    pts1 = inverse_flow(d3, r1.points)
    pts2 = inverse_flow(d3, inverse_flow(d1, r2.points))
    for pts, name in ((pts1, "gamma1"), (pts2, "gamma2")):
        if not np.all(np.isfinite(pts)) or np.any(np.abs(pts) > 1.0 + 1e-9):
            raise MapDegenerationError(f"pull-back of {name} left the disk", stop_cr)
    g1 = Trace(pts1, r1.times, r1.warnings)
    g2 = Trace(pts2, r2.times, r2.warnings)
    return ThreeSided(g3, g1, g2, (d3, d1, d2))
