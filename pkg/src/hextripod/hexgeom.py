"""Hexagonal-lattice approximations of planar domains.

Lattice points are addressed by exact integer pairs ``(X, Y)`` where the
embedding is ``x = delta * X / 2`` and ``y = delta * Y * sqrt(3) / 2``.  In
these units the three cosets of the honeycomb are told apart by
``(X - 3Y) mod 6``: 0 for vertices whose edges point along the cube roots
of unity (case LEFT), 2 for the rotated case (RIGHT), and 4 for hexagon
centres.  Adjacency is therefore decided on integers only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)

# Orientation cases of a honeycomb vertex.
LEFT = 0   # neighbours at delta * tau**k, tau = exp(2 pi i / 3)
RIGHT = 1  # neighbours at delta * tau**k * exp(i pi / 3)

# Unit steps of length delta at angles 0, 60, ..., 300 degrees.
_STEPS = ((2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1))
# Neighbour offsets in counterclockwise order for each case.
_NEIGHBOUR_STEPS = {
    LEFT: (_STEPS[0], _STEPS[2], _STEPS[4]),
    RIGHT: (_STEPS[1], _STEPS[3], _STEPS[5]),
}
# Centres of the three hexagons around a vertex: the complementary directions.
_FACE_STEPS = {LEFT: _NEIGHBOUR_STEPS[RIGHT], RIGHT: _NEIGHBOUR_STEPS[LEFT]}
# Offsets between neighbouring hexagon centres.
_HEX_STEPS = ((3, 1), (0, 2), (-3, 1), (-3, -1), (0, -2), (3, -1))

FACE_AREA_FACTOR = 3.0 * SQRT3 / 4.0


class DegenerateDomainError(ValueError):
    """The requested lattice approximation has no interior vertex."""


class MarkedEdgeCollisionError(ValueError):
    """Two target boundary points select the same boundary edge."""


def _coset(X: int, Y: int) -> int:
    return (X - 3 * Y) % 6


@dataclass(frozen=True, eq=False)
class HexDomain:
    """Immutable lattice domain with wired-boundary structure.

    Vertices are indexed ``0..n-1`` in a deterministic order.  For interior
    vertices ``neighbors[v]`` lists the three lattice neighbours
    counterclockwise starting from the case's first direction; boundary
    vertices list only their neighbours inside the vertex set.
    """

    delta: float
    lattice: np.ndarray          # (n, 2) integer lattice coordinates
    coords: np.ndarray           # (n, 2) planar coordinates
    interior: np.ndarray         # (n,) bool
    case: np.ndarray             # (n,) int8, LEFT or RIGHT
    neighbors: tuple[tuple[int, ...], ...]
    boundary_cycle: tuple[int, ...]
    boundary_edges: tuple[tuple[int, int], ...]   # (interior end, boundary end)
    center: tuple[float, float]
    radius: float
    shape: str = "disk"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    def edges(self) -> list[tuple[int, int]]:
        """Edges with at least one interior endpoint, as sorted pairs."""
        out = set()
        for v in self.interior_vertices:
            for w in self.neighbors[v]:
                out.add((min(v, w), max(v, w)))
        return sorted(out)

    def point(self, v: int) -> complex:
        x, y = self.coords[v]
        return complex(x, y)

    def face_area(self) -> float:
        """Area of the dual triangular face of any interior vertex."""
        return FACE_AREA_FACTOR * self.delta ** 2

    def boundary_position(self) -> dict[int, int]:
        """Index of each boundary vertex along ``boundary_cycle``."""
        if "bpos" not in self._cache:
            self._cache["bpos"] = {b: i for i, b in enumerate(self.boundary_cycle)}
        return self._cache["bpos"]

    def edge_index(self, edge: tuple[int, int]) -> int:
        if "eidx" not in self._cache:
            self._cache["eidx"] = {e: i for i, e in enumerate(self.boundary_edges)}
        return self._cache["eidx"][tuple(edge)]

    def to_json(self, marked: "MarkedEdges | None" = None) -> dict:
        data = {
            "delta": self.delta,
            "vertices": [
                {"id": int(v), "x": float(self.coords[v, 0]), "y": float(self.coords[v, 1]),
                 "interior": bool(self.interior[v])}
                for v in range(self.n_vertices)
            ],
            "edges": [[int(a), int(b)] for a, b in self.edges()],
            "boundary_cycle": [int(b) for b in self.boundary_cycle],
            "marked": None,
        }
        if marked is not None:
            data["marked"] = {
                name: [int(e[0]), int(e[1])]
                for name, e in zip(("e1", "e2", "e3"), marked.edges)
            }
        return data


@dataclass(frozen=True)
class MarkedEdges:
    """Three boundary edges ``(interior end, boundary end)`` in ccw order."""

    e1: tuple[int, int]
    e2: tuple[int, int]
    e3: tuple[int, int]
    anchor_angles: tuple[float, float, float]

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return (self.e1, self.e2, self.e3)


def _build(delta: float, faces: set[tuple[int, int]], origin: tuple[int, int],
           center: tuple[float, float], radius: float, shape: str) -> HexDomain:
    """Assemble the domain formed by the union of the given closed hexagons.

    ``origin`` is the lattice point mapped to planar ``(0, 0)`` before the
    domain is translated by nothing; coordinates are ``delta`` times the
    lattice vector relative to ``origin``.
    """
    corners = set()
    for cx, cy in faces:
        for dx, dy in _STEPS:
            corners.add((cx + dx, cy + dy))

    def is_interior(p):
        c = LEFT if _coset(*p) == 0 else RIGHT
        return all((p[0] + dx, p[1] + dy) in faces for dx, dy in _FACE_STEPS[c])

    interior_pts = {p for p in corners if is_interior(p)}
    if not interior_pts:
        raise DegenerateDomainError("degenerate domain: no interior vertex fits")

    # Keep only the component connected to interior vertices; boundary
    # vertices with no interior neighbour are still on the domain boundary.
    order = sorted(corners, key=lambda p: (p[1], p[0]))
    index = {p: i for i, p in enumerate(order)}
    n = len(order)
    lattice = np.array(order, dtype=np.int64)
    ox, oy = origin
    coords = np.empty((n, 2))
    coords[:, 0] = delta * (lattice[:, 0] - ox) / 2.0
    coords[:, 1] = delta * (lattice[:, 1] - oy) * SQRT3 / 2.0
    interior = np.array([p in interior_pts for p in order])
    case = np.array([LEFT if _coset(*p) == 0 else RIGHT for p in order], dtype=np.int8)

    neighbors = []
    for p in order:
        c = LEFT if _coset(*p) == 0 else RIGHT
        nb = tuple(index[q] for q in ((p[0] + dx, p[1] + dy) for dx, dy in _NEIGHBOUR_STEPS[c])
                   if q in index)
        neighbors.append(nb)

    # Perimeter: hexagon sides used by exactly one chosen face, traversed
    # counterclockwise around that face, so the domain lies to the left.
    side_count: dict[frozenset, int] = {}
    directed = []
    for cx, cy in faces:
        ring = [(cx + dx, cy + dy) for dx, dy in _STEPS]
        for k in range(6):
            a, b = ring[k], ring[(k + 1) % 6]
            key = frozenset((a, b))
            side_count[key] = side_count.get(key, 0) + 1
            directed.append((a, b))
    succ: dict[int, int] = {}
    for a, b in directed:
        if side_count[frozenset((a, b))] == 1:
            ia, ib = index[a], index[b]
            if ia in succ:
                raise DegenerateDomainError("domain boundary is not a simple curve")
            succ[ia] = ib
    boundary_set = set(np.flatnonzero(~interior).tolist())
    if set(succ) != boundary_set:
        raise DegenerateDomainError("boundary vertices do not match the face perimeter")
    start = min(succ)
    cycle = [start]
    while succ[cycle[-1]] != start:
        cycle.append(succ[cycle[-1]])
    if len(cycle) != len(boundary_set):
        raise DegenerateDomainError("domain boundary is not a single cycle")

    pos = {b: i for i, b in enumerate(cycle)}
    bedges = []
    for v in np.flatnonzero(interior):
        for w in neighbors[v]:
            if not interior[w]:
                bedges.append((int(v), int(w)))
    bedges.sort(key=lambda e: (pos[e[1]], e[0]))

    return HexDomain(
        delta=float(delta),
        lattice=lattice,
        coords=coords,
        interior=interior,
        case=case,
        neighbors=tuple(neighbors),
        boundary_cycle=tuple(cycle),
        boundary_edges=tuple(bedges),
        center=(float(center[0]), float(center[1])),
        radius=float(radius),
        shape=shape,
    )


def approximate_disk(center: tuple[float, float] = (0.0, 0.0), radius: float = 1.0,
                     delta: float = 0.05) -> HexDomain:
    """Union of all closed hexagons of the delta-honeycomb inside the disk.

    The honeycomb has a LEFT vertex at the origin of the plane.  Raises
    :class:`DegenerateDomainError` when no interior vertex fits.
    """
    if delta <= 0 or radius <= 0:
        raise ValueError("delta and radius must be positive")
    cx, cy = center
    slack = 1e-12 * max(radius, delta)
    r2 = (radius + slack) ** 2
    ymax = int(math.ceil((abs(cy) + radius) / (delta * SQRT3 / 2))) + 2
    xmax = int(math.ceil(2 * (abs(cx) + radius) / delta)) + 4
    faces = set()
    for Y in range(-ymax, ymax + 1):
        for X in range(-xmax, xmax + 1):
            if _coset(X, Y) != 4:
                continue
            inside = True
            for dx, dy in _STEPS:
                px = delta * (X + dx) / 2.0 - cx
                py = delta * (Y + dy) * SQRT3 / 2.0 - cy
                if px * px + py * py > r2:
                    inside = False
                    break
            if inside:
                faces.add((X, Y))
    if not faces:
        raise DegenerateDomainError("degenerate domain: no hexagon fits in the disk")
    return _build(delta, faces, (0, 0), center, radius, "disk")


def build_flower(rings: int = 1) -> HexDomain:
    """A central hexagon plus ``rings`` layers of surrounding hexagons, delta = 1.

    The planar origin sits at the centre of the central hexagon.
    """
    if rings < 1:
        raise ValueError("rings must be at least 1")
    centre = (4, 0)
    faces = {centre}
    frontier = [centre]
    for _ in range(rings):
        nxt = []
        for cx, cy in frontier:
            for dx, dy in _HEX_STEPS:
                q = (cx + dx, cy + dy)
                if q not in faces:
                    faces.add(q)
                    nxt.append(q)
        frontier = nxt
    dom = _build(1.0, faces, centre, (0.0, 0.0), 0.0, "flower")
    radius = float(np.max(np.hypot(dom.coords[:, 0], dom.coords[:, 1])))
    object.__setattr__(dom, "radius", radius)
    return dom


def target_point(domain: HexDomain, angle: float) -> complex:
    """Point at ``angle`` on the nominal circle of the domain."""
    cx, cy = domain.center
    return complex(cx, cy) + domain.radius * complex(math.cos(angle), math.sin(angle))


def _ccw_order(positions: list[int]) -> bool:
    a, b, c = positions
    # Cyclic order a -> b -> c -> a along the cycle.
    return (a < b < c) or (b < c < a) or (c < a < b)


def mark_boundary_edges(domain: HexDomain, angles) -> MarkedEdges:
    """Pick, for each angle, the boundary edge whose boundary end is nearest
    to the matching point of the domain's nominal circle."""
    angles = tuple(float(a) for a in angles)
    if len(angles) != 3:
        raise ValueError("exactly three angles are required")
    if len(domain.boundary_edges) < 3:
        raise ValueError("domain has fewer than three boundary edges")
    ends = np.array([domain.coords[e[1]] for e in domain.boundary_edges])
    chosen = []
    for a in angles:
        t = target_point(domain, a)
        d2 = (ends[:, 0] - t.real) ** 2 + (ends[:, 1] - t.imag) ** 2
        chosen.append(int(np.argmin(d2)))  # argmin keeps the first, i.e. smallest cycle index
    if len(set(chosen)) < 3:
        raise MarkedEdgeCollisionError("marked-edge collision: two angles select the same edge")
    if not _ccw_order(chosen):
        raise MarkedEdgeCollisionError("marked edges are not in counterclockwise order")
    e = [domain.boundary_edges[i] for i in chosen]
    return MarkedEdges(e[0], e[1], e[2], angles)


def nearest_interior_vertex(domain: HexDomain, z) -> int:
    """Interior vertex closest to ``z`` (complex or pair); ties go to the lower index."""
    z = complex(z) if np.isscalar(z) else complex(*z)
    iv = domain.interior_vertices
    d2 = (domain.coords[iv, 0] - z.real) ** 2 + (domain.coords[iv, 1] - z.imag) ** 2
    return int(iv[int(np.argmin(d2))])


def boundary_hausdorff_to_circle(domain: HexDomain) -> float:
    """Hausdorff distance between the boundary vertices and the nominal circle."""
    b = domain.coords[list(domain.boundary_cycle)]
    c = np.array(domain.center)
    r = np.hypot(*(b - c).T)
    to_circle = float(np.max(np.abs(r - domain.radius)))
    theta = np.linspace(0.0, 2 * math.pi, 2048, endpoint=False)
    circle = c + domain.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    d = np.sqrt(((circle[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return max(to_circle, float(d.max()))


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
