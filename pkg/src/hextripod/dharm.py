"""Discrete harmonic analysis for simple random walk on a HexDomain.

All solves go through the symmetric positive-definite matrix ``3I - A``
restricted to interior vertices, where ``A`` is the adjacency matrix.  Its
sparse LU factorisation is computed once per domain and cached.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hexgeom import HexDomain

DEFAULT_TOL = 1e-10


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSolveReport:
    residual_norm: float
    method: str


@dataclass
class Field:
    """Real values on every vertex of a domain (boundary values included)."""

    domain: HexDomain
    values: np.ndarray
    report: LinearSolveReport | None = None

    def __getitem__(self, v):
        return self.values[v]

    def __len__(self):
        return len(self.values)


class _Solver:
    """Cached factorisation of the interior Dirichlet operator."""

    def __init__(self, domain: HexDomain):
        iv = domain.interior_vertices
        self.interior = iv
        self.slot = -np.ones(domain.n_vertices, dtype=np.int64)
        self.slot[iv] = np.arange(len(iv))
        rows, cols = [], []
        for i, v in enumerate(iv):
            for w in domain.neighbors[v]:
                j = self.slot[w]
                if j >= 0:
                    rows.append(i)
                    cols.append(j)
        m = len(iv)
        adj = sp.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        self.matrix = (3.0 * sp.identity(m, format="csc") - adj).tocsc()
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:  # exactly singular
            raise SolveError(f"singular Dirichlet system: {exc}") from exc
        self.lock = threading.Lock()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        with self.lock:
            x = self.lu.solve(np.asarray(rhs, dtype=float))
        return x


def solver(domain: HexDomain) -> _Solver:
    cache = domain._cache
    if "solver" not in cache:
        cache["solver"] = _Solver(domain)
    return cache["solver"]


def _lift(domain: HexDomain, interior_values: np.ndarray) -> np.ndarray:
    """Extend interior values (columns allowed) by zero to all vertices."""
    iv = domain.interior_vertices
    shape = (domain.n_vertices,) + interior_values.shape[1:]
    out = np.zeros(shape)
    out[iv] = interior_values
    return out


def _checked(domain: HexDomain, rhs: np.ndarray, x: np.ndarray, tol: float) -> LinearSolveReport:
    s = solver(domain)
    res = float(np.max(np.abs(s.matrix @ x - rhs))) if len(rhs) else 0.0
    scale = max(1.0, float(np.max(np.abs(rhs))) if len(rhs) else 1.0)
    if res > tol * scale:
        raise SolveError(f"residual {res:.3e} exceeds tolerance {tol:.1e}")
    return LinearSolveReport(residual_norm=res, method="sparse-lu")


def laplacian_apply(field: Field | np.ndarray, v: int, domain: HexDomain | None = None) -> float:
    """(1/3) * sum over neighbours w of (f(w) - f(v)) at an interior vertex."""
    if isinstance(field, Field):
        domain, f = field.domain, field.values
    else:
        f = np.asarray(field)
    if not domain.interior[v]:
        raise ValueError(f"vertex {v} is not interior")
    return float(sum(f[w] - f[v] for w in domain.neighbors[v]) / 3.0)


def laplacian(domain: HexDomain, values: np.ndarray) -> np.ndarray:
    """Discrete Laplacian at every interior vertex (zero elsewhere)."""
    out = np.zeros(domain.n_vertices)
    for v in domain.interior_vertices:
        out[v] = sum(values[w] for w in domain.neighbors[v]) / 3.0 - values[v]
    return out


def green_matrix_columns(domain: HexDomain, sources) -> np.ndarray:
    """G(., u) for each u in ``sources`` as columns over all vertices."""
    s = solver(domain)
    sources = list(sources)
    rhs = np.zeros((len(s.interior), len(sources)))
    for j, u in enumerate(sources):
        if s.slot[u] < 0:
            raise ValueError(f"vertex {u} is not interior")
        rhs[s.slot[u], j] = 3.0
    return _lift(domain, s.solve(rhs))


def green(domain: HexDomain, u: int, tol: float = DEFAULT_TOL) -> Field:
    """Expected number of visits to u of a walk started at each vertex."""
    s = solver(domain)
    if s.slot[u] < 0:
        raise ValueError(f"vertex {u} is not interior")
    rhs = np.zeros(len(s.interior))
    rhs[s.slot[u]] = 3.0
    x = s.solve(rhs)
    rep = _checked(domain, rhs, x, tol)
    return Field(domain, _lift(domain, x), rep)


def poisson_kernel(domain: HexDomain, e_out: tuple[int, int], tol: float = DEFAULT_TOL) -> Field:
    """Probability of exiting through ``e_out``: H(., e) = G(., e_inner) / 3."""
    inner, outer = e_out
    if domain.interior[outer] or not domain.interior[inner] or outer not in domain.neighbors[inner]:
        raise ValueError(f"{e_out} is not a boundary edge")
    g = green(domain, inner, tol)
    return Field(domain, g.values / 3.0, g.report)


def exit_indicator_rhs(domain: HexDomain, edges) -> np.ndarray:
    """Right-hand side of ``(3I - A) h = b`` whose solution is the
    probability of exiting through one of ``edges``."""
    s = solver(domain)
    rhs = np.zeros(len(s.interior))
    for inner, _ in edges:
        rhs[s.slot[inner]] += 1.0
    return rhs


def exit_probability(domain: HexDomain, edges, tol: float = DEFAULT_TOL) -> Field:
    """Sum of Poisson kernels over a set of boundary edges."""
    rhs = exit_indicator_rhs(domain, edges)
    x = solver(domain).solve(rhs)
    rep = _checked(domain, rhs, x, tol)
    return Field(domain, _lift(domain, x), rep)


def arc_edges(domain: HexDomain, arc) -> list[tuple[int, int]]:
    arc = set(int(a) for a in arc)
    return [e for e in domain.boundary_edges if e[1] in arc]


def harmonic_measure(domain: HexDomain, v: int, arc, tol: float = DEFAULT_TOL) -> float:
    """Probability that the walk from v exits through an edge ending in ``arc``."""
    if not domain.interior[v]:
        raise ValueError(f"vertex {v} is not interior")
    edges = arc_edges(domain, arc)
    if not edges:
        return 0.0
    return float(exit_probability(domain, edges, tol).values[v])


def poisson_derivative(domain: HexDomain, v: int, e_out: tuple[int, int], k: int,
                       kernel: Field | np.ndarray | None = None) -> float:
    """delta^-1 (H(v_k, e) - H(v, e)) for the k-th ccw neighbour, k in {1, 2, 3}."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if not domain.interior[v]:
        raise ValueError(f"vertex {v} is not interior")
    if kernel is None:
        kernel = poisson_kernel(domain, e_out)
    h = kernel.values if isinstance(kernel, Field) else np.asarray(kernel)
    vk = domain.neighbors[v][k - 1]
    return float((h[vk] - h[v]) / domain.delta)


def solve_poisson_problem(domain: HexDomain, source, tol: float = DEFAULT_TOL) -> Field:
    """g with -Laplacian(g) = source on interior vertices and g = 0 on the boundary."""
    src = source.values if isinstance(source, Field) else np.asarray(source, dtype=float)
    s = solver(domain)
    if len(src) == domain.n_vertices:
        src = src[s.interior]
    if len(src) != len(s.interior):
        raise ValueError("source must be given on all interior vertices")
    rhs = 3.0 * src
    x = s.solve(rhs)
    rep = _checked(domain, rhs, x, tol)
    return Field(domain, _lift(domain, x), rep)


def solve_dirichlet(domain: HexDomain, boundary_values: np.ndarray, tol: float = DEFAULT_TOL) -> Field:
    """Harmonic extension of boundary data given on all vertices."""
    s = solver(domain)
    b = np.asarray(boundary_values, dtype=float)
    rhs = np.zeros(len(s.interior))
    for i, v in enumerate(s.interior):
        for w in domain.neighbors[v]:
            if not domain.interior[w]:
                rhs[i] += b[w]
    x = s.solve(rhs)
    rep = _checked(domain, rhs, x, tol)
    out = b.copy()
    out[s.interior] = x
    return Field(domain, out, rep)


def absorbing_chain_green(domain: HexDomain) -> np.ndarray:
    """Dense (I - Q)^-1 over interior vertices; a direct oracle for small domains."""
    iv = domain.interior_vertices
    slot = {int(v): i for i, v in enumerate(iv)}
    q = np.zeros((len(iv), len(iv)))
    for v in iv:
        for w in domain.neighbors[v]:
            if int(w) in slot:
                q[slot[int(v)], slot[int(w)]] += 1.0 / 3.0
    return np.linalg.inv(np.eye(len(iv)) - q)
