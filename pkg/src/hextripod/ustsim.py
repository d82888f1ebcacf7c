"""Uniform spanning trees, loop-erased walks and conditioned tripods.

Randomness comes from ``RngState`` (a seed plus a stream id mapped to a Philox
counter-based generator) or from an explicit ``numpy.random.Generator``.  An
``RngState`` always yields a fresh generator, so calling a sampler twice with
the same state returns the same sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _walks
from . import dharm
from .hexgeom import HexDomain, MarkedEdges


class AbsorbedByConditioningError(RuntimeError):
    """Every allowed step of an h-weighted walk has zero weight."""


class RejectionBudgetError(RuntimeError):
    def __init__(self, trials: int, accepted: int):
        self.trials = trials
        self.accepted = accepted
        self.acceptance_rate = accepted / trials if trials else 0.0
        super().__init__(
            f"rejection budget of {trials} trials exhausted after {accepted} acceptances "
            f"(estimated acceptance rate {self.acceptance_rate:.3g}); try strategy='htransform'")


@dataclass(frozen=True)
class RngState:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([self.seed & (2**64 - 1), self.stream])
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngState or numpy Generator")


@dataclass(frozen=True)
class Walk:
    vertices: np.ndarray

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(int(v) for v in self.vertices)

    @property
    def start(self) -> int:
        return int(self.vertices[0])

    @property
    def end(self) -> int:
        return int(self.vertices[-1])

    def is_self_avoiding(self) -> bool:
        return len(set(self.vertices.tolist())) == len(self.vertices)


@dataclass
class SpanningTree:
    """Wired spanning tree stored as the tree step from each interior vertex."""

    domain: HexDomain
    parent: np.ndarray

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(v), int(self.parent[v])) for v in self.domain.interior_vertices]

    def is_valid(self) -> bool:
        d = self.domain
        state = np.where(d.interior, 0, 2)  # 0 unknown, 1 on current path, 2 reaches root
        for v in d.interior_vertices:
            path = []
            u = v
            while state[u] == 0:
                if self.parent[u] not in d.neighbors[u]:
                    return False
                state[u] = 1
                path.append(u)
                u = self.parent[u]
            if state[u] == 1:
                return False
            state[path] = 2
        return True


@dataclass(frozen=True)
class Tripod:
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    trifurcation: int

    def to_record(self, domain: HexDomain, seed: int | None = None, stream: int | None = None) -> dict:
        x, y = domain.coords[self.trifurcation]
        return {"trifurcation": {"x": float(x), "y": float(y)},
                "gamma1": self.gamma1.tolist(), "gamma2": self.gamma2.tolist(),
                "gamma3": self.gamma3.tolist(), "seed": seed, "stream": stream}


def _tables(domain: HexDomain):
    cache = domain._cache
    if "walk_tables" not in cache:
        n = domain.n_vertices
        nbr = np.tile(np.arange(n, dtype=np.int64)[:, None], (1, 3))
        for v in domain.interior_vertices:
            nbr[v] = domain.neighbors[v]
        uniform = np.tile(np.array([1 / 3, 2 / 3, 1.0]), (n, 1))
        cache["walk_tables"] = (nbr, uniform, np.ascontiguousarray(domain.interior))
    return cache["walk_tables"]


def _cumulative(weights: np.ndarray, interior: np.ndarray) -> np.ndarray:
    """Row-normalised cumulative weights with zero-weight steps unreachable."""
    w = np.where(interior[:, None], weights, 1.0)
    total = w.sum(axis=1)
    if np.any(total[interior] <= 0):
        bad = int(np.flatnonzero(interior & (total <= 0))[0])
        raise AbsorbedByConditioningError(f"all steps from vertex {bad} have zero weight")
    cum = np.cumsum(w, axis=1) / np.where(total > 0, total, 1.0)[:, None]
    last = 2 - np.argmax(w[:, ::-1] > 0, axis=1)
    for k in range(3):
        cum[last <= k, k] = 1.0
    return cum


def step_weights(domain: HexDomain, h: np.ndarray, target_edges=()) -> np.ndarray:
    """Weight of each step v -> nbr[v, k]: h at interior targets, h at boundary
    targets unless the step is one of ``target_edges`` (weight 1)."""
    nbr, _, interior = _tables(domain)
    w = np.asarray(h, dtype=float)[nbr]
    for inner, outer in target_edges:
        k = list(domain.neighbors[inner]).index(outer)
        w[inner, k] = 1.0
    return w


def loop_erase(walk: Walk | Sequence) -> Walk:
    """Loop erasure by the last-exit recursion."""
    seq = list(walk.vertices if isinstance(walk, Walk) else walk)
    if not seq:
        return Walk(np.array([], dtype=np.int64))
    last = {v: i for i, v in enumerate(seq)}
    out = [seq[0]]
    i = last[seq[0]]
    while i < len(seq) - 1:
        v = seq[i + 1]
        out.append(v)
        i = last[v]
    return Walk(np.asarray(out))


def simple_random_walk(domain: HexDomain, start: int, rng, h_weight=None,
                       target_edges=(), stop=None) -> Walk:
    """Walk from ``start`` until it reaches the boundary or the ``stop`` set.

    With ``h_weight`` the step to neighbour u has probability proportional to
    h(u); steps along ``target_edges`` get weight 1 instead of the boundary
    value of h.
    """
    nbr, uniform, interior = _tables(domain)
    if not interior[start]:
        raise ValueError(f"start {start} is not interior")
    stop_mask = ~interior.copy()
    if stop is not None:
        stop_mask[np.asarray(list(stop), dtype=np.int64)] = True
    if h_weight is None:
        cum = uniform
    else:
        h = h_weight.values if isinstance(h_weight, dharm.Field) else np.asarray(h_weight)
        if h[start] <= 0:
            raise AbsorbedByConditioningError("h vanishes at the starting vertex")
        cum = _cumulative(step_weights(domain, h, target_edges), interior & ~stop_mask)
    return Walk(_walks.walk_until(nbr, cum, stop_mask, int(start), as_generator(rng)))


def exit_edges(domain: HexDomain, start: int, n_walks: int, rng) -> np.ndarray:
    """(last interior, boundary) pairs of ``n_walks`` independent uniform walks."""
    nbr, uniform, interior = _tables(domain)
    return _walks.exit_batch(nbr, uniform, ~interior, int(start), int(n_walks), as_generator(rng))


def _sweep_order(domain: HexDomain, first: Sequence[int] = ()) -> np.ndarray:
    first = [int(v) for v in first]
    rest = [int(v) for v in domain.interior_vertices if int(v) not in first]
    return np.asarray(first + rest, dtype=np.int64)


def wilson_ust(domain: HexDomain, rng, first: Sequence[int] = ()) -> SpanningTree:
    """Uniform wired spanning tree; the sweep visits ``first`` and then index order."""
    nbr, _, interior = _tables(domain)
    parent = _walks.wilson(nbr, interior, _sweep_order(domain, first), as_generator(rng))
    return SpanningTree(domain, parent)


def wilson_tree_codes(domain: HexDomain, n_samples: int, rng) -> np.ndarray:
    """Sample trees and encode each by its base-3 digits of parent directions."""
    nbr, _, interior = _tables(domain)
    if len(domain.interior_vertices) > 39:
        raise ValueError("tree codes overflow 64 bits beyond 39 interior vertices")
    return _walks.wilson_codes(nbr, interior, _sweep_order(domain), int(n_samples), as_generator(rng))


def decode_tree(domain: HexDomain, code: int) -> SpanningTree:
    iv = domain.interior_vertices
    parent = -np.ones(domain.n_vertices, dtype=np.int64)
    for v in iv[::-1]:
        code, k = divmod(int(code), 3)
        parent[v] = domain.neighbors[v][k]
    return SpanningTree(domain, parent)


def boundary_branch(tree: SpanningTree, v: int) -> tuple[Walk, tuple[int, int]]:
    d = tree.domain
    if not d.interior[v]:
        raise ValueError(f"vertex {v} is not interior")
    path = [int(v)]
    while d.interior[path[-1]]:
        path.append(int(tree.parent[path[-1]]))
    return Walk(np.asarray(path)), (path[-2], path[-1])


def _assemble(eta1: np.ndarray, eta2: np.ndarray) -> Tripod:
    t = int(eta2[-1])
    j = int(np.flatnonzero(eta1 == t)[0])
    return Tripod(gamma1=eta1[: j + 1].copy(), gamma2=eta2.copy(),
                  gamma3=eta1[j:][::-1].copy(), trifurcation=t)


@dataclass
class TripodBatch:
    """Conditioned tripods stored as flat branch arrays with offsets."""

    eta1: np.ndarray
    off1: np.ndarray
    eta2: np.ndarray
    off2: np.ndarray
    trials: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.off1) - 1

    def tripod(self, i: int) -> Tripod:
        return _assemble(self.eta1[self.off1[i]: self.off1[i + 1]],
                         self.eta2[self.off2[i]: self.off2[i + 1]])

    @property
    def trifurcations(self) -> np.ndarray:
        return self.eta2[self.off2[1:] - 1]


def _h1_table(domain: HexDomain, marked: MarkedEdges) -> np.ndarray:
    key = ("h1_table", marked.e3)
    cache = domain._cache
    if key not in cache:
        _, _, interior = _tables(domain)
        h1 = dharm.poisson_kernel(domain, marked.e3).values
        cache[key] = _cumulative(step_weights(domain, h1, [marked.e3]), interior)
    return cache[key]


def _h2_field(domain: HexDomain, eta1: np.ndarray) -> np.ndarray:
    """Probability of reaching eta1 before the rest of the boundary."""
    nbr, _, interior = _tables(domain)
    on = np.zeros(domain.n_vertices, dtype=bool)
    on[eta1[:-1]] = True
    free = np.flatnonzero(interior & ~on)
    slot = -np.ones(domain.n_vertices, dtype=np.int64)
    slot[free] = np.arange(len(free))
    nb = nbr[free]
    rows = np.repeat(np.arange(len(free)), 3)
    cols = slot[nb].ravel()
    keep = cols >= 0
    m = len(free)
    a = sp.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(m, m))
    rhs = on[nb].sum(axis=1).astype(float)
    h = np.zeros(domain.n_vertices)
    h[on] = 1.0
    if m:
        h[free] = spla.spsolve((3.0 * sp.identity(m, format="csr") - a).tocsc(), rhs)
    return h


def _solve_route_pair(domain: HexDomain, cum1: np.ndarray, x1: int, x2: int, gen, max_trials: int):
    nbr, _, interior = _tables(domain)
    n = domain.n_vertices
    for trial in range(1, max_trials + 1):
        eta1 = _walks.loop_erase(_walks.walk_until(nbr, cum1, ~interior, x1, gen), n)
        if x2 in eta1[:-1]:
            return eta1, np.array([x2]), trial
        h2 = _h2_field(domain, eta1)
        # eta1 is kept with probability h2(x2): its weight under the second conditioning
        if gen.random() >= h2[x2]:
            continue
        stop = ~interior.copy()
        stop[eta1[:-1]] = True
        cum2 = _cumulative(h2[nbr], interior & ~stop)
        return eta1, _walks.loop_erase(_walks.walk_until(nbr, cum2, stop, x2, gen), n), trial
    raise RejectionBudgetError(max_trials, 0)


def sample_tripods(domain: HexDomain, marked: MarkedEdges, n_samples: int, rng,
                   strategy: str = "rejection", max_trials: int | None = None) -> TripodBatch:
    """``n_samples`` independent tripods from the UST conditioned on both
    marked branches exiting through e3."""
    nbr, _, interior = _tables(domain)
    gen = as_generator(rng)
    x1, x2 = marked.e1[0], marked.e2[0]
    if max_trials is None:
        max_trials = max(10**7, 10**4 * n_samples)
    if strategy == "rejection":
        e3_in, e3_out = marked.e3
        f1, o1, f2, o2, trials = _walks.tripod_rejection_batch(
            nbr, interior, x1, x2, e3_in, e3_out, int(n_samples), int(max_trials), gen)
    elif strategy == "htransform":
        f1, o1, f2, o2, trials = _walks.tripod_htransform_batch(
            nbr, _h1_table(domain, marked), interior, x1, x2, int(n_samples), int(max_trials), gen)
    elif strategy == "htransform-solve":
        cum1 = _h1_table(domain, marked)
        e1s, e2s, trials = [], [], 0
        for i in range(n_samples):
            try:
                eta1, eta2, used = _solve_route_pair(domain, cum1, x1, x2, gen, max_trials - trials)
            except RejectionBudgetError:
                raise RejectionBudgetError(max_trials, i) from None
            trials += used
            e1s.append(eta1)
            e2s.append(eta2)
        o1 = np.concatenate([[0], np.cumsum([len(e) for e in e1s])])
        o2 = np.concatenate([[0], np.cumsum([len(e) for e in e2s])])
        f1, f2 = np.concatenate(e1s), np.concatenate(e2s)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if trials < 0:
        raise RejectionBudgetError(max_trials, -trials - 1)
    return TripodBatch(f1, o1, f2, o2, trials=int(trials))


def sample_conditioned_tripod(domain: HexDomain, marked: MarkedEdges, rng,
                              strategy: str = "rejection", max_trials: int = 10**7) -> Tripod:
    return sample_tripods(domain, marked, 1, rng, strategy, max_trials).tripod(0)


def trifurcation_of(tripod: Tripod) -> int:
    common = set(tripod.gamma1.tolist()) & set(tripod.gamma2.tolist()) & set(tripod.gamma3.tolist())
    if len(common) != 1:
        raise ValueError(f"branches share {len(common)} vertices, expected 1")
    return common.pop()


def check_tripod(domain: HexDomain, marked: MarkedEdges, tripod: Tripod) -> None:
    """Raise AssertionError if the tripod violates its structural invariants."""
    g1, g2, g3 = (p.tolist() for p in (tripod.gamma1, tripod.gamma2, tripod.gamma3))
    t = tripod.trifurcation
    for p in (g1, g2, g3):
        assert len(set(p)) == len(p), "branch is not simple"
        assert p[-1] == t, "branch does not end at the trifurcation"
        for a, b in zip(p, p[1:]):
            assert b in domain.neighbors[a] or a in domain.neighbors[b], "non-adjacent step"
    assert g1[0] == marked.e1[0] and g2[0] == marked.e2[0]
    assert (g3[0], g3[1]) == (marked.e3[1], marked.e3[0]), "gamma3 does not start along e3"
    s1, s2, s3 = set(g1), set(g2), set(g3)
    assert s1 & s2 == {t} and s2 & s3 == {t} and s1 & s3 == {t}
    assert domain.interior[t]


def joins_branch_count(domain: HexDomain, marked: MarkedEdges, z: int, n_samples: int, rng) -> int:
    """Monte Carlo count of {branch from z exits through e3} under the law
    conditioned on the x1 branch exiting through e3."""
    nbr, _, interior = _tables(domain)
    return int(_walks.joins_branch_batch(nbr, _h1_table(domain, marked), interior,
                                         marked.e1[0], int(z), int(n_samples), as_generator(rng)))
