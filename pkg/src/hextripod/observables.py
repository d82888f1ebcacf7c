"""Determinant observables for trifurcations and exact small-graph oracles.

The 3x3 matrices have one row per neighbour u_k of a vertex u (counterclockwise
in the vertex's orientation case) and one column per marked edge.  A row whose
neighbour is a boundary vertex w records whether the step (u, w) is that
column's edge: exiting along (u, w) is certain if it is, impossible otherwise.

Normalisation used throughout: for a counterclockwise triple of marked edges
the determinant equals three times P[A1, A2, trifurcation = u], the factor
being the probability 1/3 that the walk from u takes the tree step chosen in
the surgery from u's neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix

from . import dharm
from .hexgeom import HexDomain, MarkedEdges

NEGATIVE_TOL = 1e-12
DEFAULT_TREE_CAP = 10**8


class OrientationError(ValueError):
    """A determinant that should be a probability is clearly negative."""


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class Fomin3Matrix:
    u: int
    neighbors: tuple[int, int, int]
    edges: tuple[tuple[int, int], ...]
    matrix: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class ExactProbability:
    numerator: int
    denominator: int

    @property
    def value(self) -> float:
        return self.numerator / self.denominator

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)


def _edge_columns(domain: HexDomain, edges) -> np.ndarray:
    """Poisson kernels H(., e) for each edge as columns, from one factorisation."""
    return dharm.green_matrix_columns(domain, [e[0] for e in edges]) / 3.0


def _boundary_row_tensor(domain: HexDomain, interior_cols: np.ndarray, edge_sets) -> np.ndarray:
    """Stack of 3x3 matrices for every interior vertex.

    ``interior_cols`` has one column field per matrix column; ``edge_sets[j]``
    maps a boundary step (u, w) to the entry used in column j.
    """
    iv = domain.interior_vertices
    out = np.empty((len(iv), 3, 3))
    for i, u in enumerate(iv):
        for k, w in enumerate(domain.neighbors[u]):
            if domain.interior[w]:
                out[i, k] = interior_cols[w]
            else:
                out[i, k] = [s.get((int(u), int(w)), 0.0) for s in edge_sets]
    return out


def fomin_matrix(domain: HexDomain, u: int, edges, kernels: np.ndarray | None = None) -> Fomin3Matrix:
    if not domain.interior[u]:
        raise ValueError(f"vertex {u} is not interior")
    edges = tuple(tuple(int(a) for a in e) for e in edges)
    cols = _edge_columns(domain, edges) if kernels is None else kernels
    m = np.empty((3, 3))
    for k, w in enumerate(domain.neighbors[u]):
        if domain.interior[w]:
            m[k] = cols[w]
        else:
            m[k] = [1.0 if (int(u), int(w)) == e else 0.0 for e in edges]
    return Fomin3Matrix(int(u), tuple(domain.neighbors[u]), edges, m)


def fomin_determinant(domain: HexDomain, u: int, edges) -> float:
    """Raw determinant for any ordered triple of boundary edges."""
    return fomin_matrix(domain, u, edges).det


def fomin_determinants(domain: HexDomain, edges) -> np.ndarray:
    """Raw determinants at every vertex (zero on the boundary)."""
    edges = tuple(tuple(int(a) for a in e) for e in edges)
    cols = _edge_columns(domain, edges)
    sets = [{e: 1.0} for e in edges]
    dets = np.zeros(domain.n_vertices)
    dets[domain.interior_vertices] = np.linalg.det(_boundary_row_tensor(domain, cols, sets))
    return dets


def _as_probability(raw: np.ndarray) -> np.ndarray:
    p = np.asarray(raw, dtype=float) / 3.0
    worst = float(np.min(p)) if p.size else 0.0
    if worst < -NEGATIVE_TOL:
        raise OrientationError(f"determinant {3 * worst:.3e} is negative; marked edges not counterclockwise?")
    return np.where(p < 0.0, 0.0, p)


def _require_distinct(marked: MarkedEdges) -> None:
    if len(set(marked.edges)) != 3:
        raise ValueError("marked edges must be distinct")


def fomin_trifurcation_probability(domain: HexDomain, u: int, marked: MarkedEdges) -> float:
    """P[A1, A2, trifurcation = u] from the determinant of Poisson kernels."""
    _require_distinct(marked)
    return float(_as_probability(fomin_determinant(domain, u, marked.edges)))


def fomin_diagnostics(domain: HexDomain, marked: MarkedEdges) -> dict:
    """Raw determinants, probabilities and their sum at every interior vertex."""
    _require_distinct(marked)
    raw = fomin_determinants(domain, marked.edges)
    prob = _as_probability(raw)
    return {"raw": raw, "probability": prob, "pair_probability": float(prob.sum())}


def _arc_positions(domain: HexDomain, a: int, b: int) -> set[int]:
    """Boundary vertices strictly counterclockwise between vertices a and b."""
    pos = domain.boundary_position()
    n = len(domain.boundary_cycle)
    pa, pb = pos[a], pos[b]
    return {domain.boundary_cycle[(pa + j) % n] for j in range(1, (pb - pa) % n)}


def open_arcs(domain: HexDomain, e1, e3) -> tuple[list, list]:
    """Boundary edges in the open arcs (x1 x3) and (x3 x1); e1 and e3 excluded."""
    a13 = _arc_positions(domain, e1[1], e3[1])
    a31 = _arc_positions(domain, e3[1], e1[1])
    edges = [e for e in domain.boundary_edges if e not in (tuple(e1), tuple(e3))]
    return [e for e in edges if e[1] in a13], [e for e in edges if e[1] in a31]


def _q_determinants(domain: HexDomain, e1, e3) -> np.ndarray:
    e1, e3 = tuple(e1), tuple(e3)
    a13, a31 = open_arcs(domain, e1, e3)
    ends = _edge_columns(domain, [e1, e3])
    s = dharm.solver(domain)
    rhs = dharm.exit_indicator_rhs(domain, a13) - dharm.exit_indicator_rhs(domain, a31)
    middle = np.zeros(domain.n_vertices)
    middle[s.interior] = s.solve(rhs)
    cols = np.column_stack([ends[:, 0], middle, ends[:, 1]])
    sign = {e: 1.0 for e in a13} | {e: -1.0 for e in a31}
    tensor = _boundary_row_tensor(domain, cols, [{e1: 1.0}, sign, {e3: 1.0}])
    dets = np.zeros(domain.n_vertices)
    dets[domain.interior_vertices] = np.linalg.det(tensor)
    return dets


def q_discrete_all(domain: HexDomain, e1, e3, pA1: float | None = None) -> np.ndarray:
    """q at every vertex, with -Laplacian of P[v -> e3 | A1] equal to delta^2 q."""
    e1, e3 = tuple(e1), tuple(e3)
    if pA1 is None:
        pA1 = float(_edge_columns(domain, [e3])[e1[0], 0])
    if pA1 <= 0:
        raise ValueError("pA1 must be positive")
    d2 = domain.delta ** 2
    q = _q_determinants(domain, e1, e3) / (9.0 * d2 * pA1)
    if e1 != e3:
        # the two marked branches start at x1 and x3: each vertex carries an extra 1/3
        q[e1[0]] += 1.0 / (3.0 * d2)
        q[e3[0]] += 1.0 / (3.0 * d2)
    return q


def q_discrete(domain: HexDomain, u: int, e1, e3, pA1: float) -> float:
    if pA1 <= 0:
        raise ValueError("pA1 must be positive")
    if not domain.interior[u]:
        raise ValueError(f"vertex {u} is not interior")
    if tuple(e1) == tuple(e3):
        return 0.0
    return float(q_discrete_all(domain, e1, e3, pA1)[u])


def reconstruct_g_discrete(domain: HexDomain, e1, e3) -> dharm.Field:
    """g(v) = sum_u G(v, u) delta^2 q(u), i.e. P[v -> e3 | x1 -> e3]."""
    if tuple(e1) == tuple(e3):
        raise ValueError("marked edges must be distinct")
    q = q_discrete_all(domain, e1, e3)
    return dharm.solve_poisson_problem(domain, domain.delta ** 2 * q)


# Exact oracles --------------------------------------------------------------

def _integer_det(rows: list[list[int]]) -> int:
    if not rows:
        return 1
    return int(DomainMatrix(rows, (len(rows), len(rows)), ZZ).det())


def count_spanning_trees_graph(n: int, edges) -> int:
    """Kirchhoff count for a multigraph on vertices 0..n-1."""
    lap = [[0] * n for _ in range(n)]
    for a, b in edges:
        if a == b:
            continue
        lap[a][a] += 1
        lap[b][b] += 1
        lap[a][b] -= 1
        lap[b][a] -= 1
    return _integer_det([row[1:] for row in lap[1:]])


def count_spanning_trees(domain: HexDomain) -> int:
    """Spanning trees of the graph with all boundary vertices wired together."""
    iv = [int(v) for v in domain.interior_vertices]
    slot = {v: i for i, v in enumerate(iv)}
    rows = [[0] * len(iv) for _ in iv]
    for v in iv:
        rows[slot[v]][slot[v]] = 3
        for w in domain.neighbors[v]:
            if w in slot:
                rows[slot[v]][slot[int(w)]] -= 1
    return _integer_det(rows)


def enumerate_spanning_trees(domain: HexDomain, cap: int = DEFAULT_TREE_CAP):
    """Yield every wired spanning tree as a parent array.

    Each interior vertex picks one of its three edges toward the root; the
    depth-first search prunes choices that close a cycle.
    """
    from .ustsim import SpanningTree

    total = count_spanning_trees(domain)
    if total > cap:
        raise EnumerationCapError(f"{total} spanning trees exceed the cap {cap}; use a smaller domain")
    iv = [int(v) for v in domain.interior_vertices]
    parent = -np.ones(domain.n_vertices, dtype=np.int64)

    def closes_cycle(v: int) -> bool:
        u = parent[v]
        while u >= 0 and domain.interior[u]:
            if u == v:
                return True
            u = parent[u]
        return False

    def rec(i: int):
        if i == len(iv):
            yield SpanningTree(domain, parent.copy())
            return
        v = iv[i]
        for w in domain.neighbors[v]:
            parent[v] = w
            if not closes_cycle(v):
                yield from rec(i + 1)
        parent[v] = -1

    yield from rec(0)


def enumerate_event_probability(domain: HexDomain, event: Callable, cap: int = DEFAULT_TREE_CAP) -> ExactProbability:
    hits = total = 0
    for tree in enumerate_spanning_trees(domain, cap):
        total += 1
        hits += bool(event(tree))
    return ExactProbability(hits, total)


def _exit_edge(domain: HexDomain, parent: np.ndarray, v: int) -> tuple[int, int]:
    while domain.interior[parent[v]]:
        v = parent[v]
    return int(v), int(parent[v])


def exact_tripod_statistics(domain: HexDomain, marked: MarkedEdges, cap: int = DEFAULT_TREE_CAP) -> dict:
    """One enumeration pass: exact P[A1], P[A1 A2], P[A1 A2, trifurcation = u]
    and P[v -> e3 | A1] for every interior v."""
    e1, e2, e3 = marked.edges
    iv = [int(v) for v in domain.interior_vertices]
    total = a1 = a12 = 0
    tri = dict.fromkeys(iv, 0)
    joins = dict.fromkeys(iv, 0)
    for tree in enumerate_spanning_trees(domain, cap):
        total += 1
        p = tree.parent
        if _exit_edge(domain, p, e1[0]) != e3:
            continue
        a1 += 1
        for v in iv:
            joins[v] += _exit_edge(domain, p, v) == e3
        if _exit_edge(domain, p, e2[0]) != e3:
            continue
        a12 += 1
        on1 = set()
        v = e1[0]
        while domain.interior[v]:
            on1.add(v)
            v = int(p[v])
        v = e2[0]
        while v not in on1:
            v = int(p[v])
        tri[v] += 1
    return {
        "trees": total,
        "A1": ExactProbability(a1, total),
        "A1A2": ExactProbability(a12, total),
        "trifurcation": {v: ExactProbability(c, total) for v, c in tri.items()},
        "g": {v: ExactProbability(c, a1) for v, c in joins.items()} if a1 else {},
    }
