import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hextripod import _walks, dharm, hexgeom, observables, ustsim
from hextripod.ustsim import RngState


@given(st.integers(0, 2**32 - 1), st.integers(0, 5))
def test_loop_erasure_is_simple_path(seed, start):
    dom = hexgeom.build_flower(1)
    v = int(dom.interior_vertices[start])
    walk = ustsim.simple_random_walk(dom, v, RngState(seed))
    le = ustsim.loop_erase(walk)
    assert le.is_self_avoiding()
    assert le.start == walk.start and le.end == walk.end
    for a, b in zip(le.vertices, le.vertices[1:]):
        assert b in dom.neighbors[a]
    assert np.array_equal(le.vertices, _walks.loop_erase(walk.vertices, dom.n_vertices))


def test_loop_erase_known_sequence():
    assert list(ustsim.loop_erase([1, 2, 3, 2, 4, 1, 5, 6, 5, 7])) == [1, 5, 7]


def test_same_state_same_tree(disk10):
    a = ustsim.wilson_ust(disk10, RngState(5, 2)).parent
    b = ustsim.wilson_ust(disk10, RngState(5, 2)).parent
    c = ustsim.wilson_ust(disk10, RngState(5, 3)).parent
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_wilson_trees_valid(disk10):
    for s in range(20):
        assert ustsim.wilson_ust(disk10, RngState(11, s)).is_valid()


def test_wilson_uniform_on_flower(flower):
    # 320 wired trees; each must appear with probability 1/320
    n = 64_000
    codes = ustsim.wilson_tree_codes(flower, n, RngState(2024))
    uniq, counts = np.unique(codes, return_counts=True)
    assert len(uniq) == observables.count_spanning_trees(flower) == 320
    for c in uniq[:20]:
        assert ustsim.decode_tree(flower, int(c)).is_valid()
    assert stats.chisquare(counts).pvalue > 1e-3


def test_exit_distribution_is_poisson_kernel(disk10):
    v = hexgeom.nearest_interior_vertex(disk10, 0.3 + 0.1j)
    n = 40_000
    ex = ustsim.exit_edges(disk10, v, n, RngState(77))
    for e in disk10.boundary_edges[::9]:
        h = dharm.poisson_kernel(disk10, e).values[v]
        hits = int(np.sum((ex[:, 0] == e[0]) & (ex[:, 1] == e[1])))
        assert abs(hits / n - h) <= 4 * math.sqrt(h * (1 - h) / n)


def test_tree_branch_exit_is_poisson_kernel(disk10):
    v = hexgeom.nearest_interior_vertex(disk10, -0.2j)
    e = disk10.boundary_edges[len(disk10.boundary_edges) // 2]
    h = dharm.poisson_kernel(disk10, e).values[v]
    n = 4000
    hits = sum(ustsim.boundary_branch(ustsim.wilson_ust(disk10, RngState(9, s)), v)[1] == e for s in range(n))
    assert abs(hits / n - h) <= 4 * math.sqrt(h * (1 - h) / n)


def _exact_trifurcation_law(flower, marked):
    exact = observables.exact_tripod_statistics(flower, marked)
    iv = sorted(exact["trifurcation"])
    p = np.array([exact["trifurcation"][u].value for u in iv])
    return iv, p / p.sum()


@pytest.mark.parametrize("strategy", ["rejection", "htransform", "htransform-solve"])
def test_conditioned_law_matches_enumeration(flower, flower_marked, strategy):
    iv, p = _exact_trifurcation_law(flower, flower_marked)
    n = 4000 if strategy == "htransform-solve" else 20_000
    batch = ustsim.sample_tripods(flower, flower_marked, n, RngState(31), strategy)
    tri = batch.trifurcations
    counts = np.array([np.sum(tri == u) for u in iv])
    keep = p > 0
    assert counts[~keep].sum() == 0
    assert stats.chisquare(counts[keep], p[keep] * n).pvalue > 1e-3


def test_tripod_structure(disk10):
    marked = hexgeom.mark_boundary_edges(disk10, (0.0, 2.0, 4.0))
    batch = ustsim.sample_tripods(disk10, marked, 50, RngState(4), "htransform")
    for i in range(len(batch)):
        t = batch.tripod(i)
        ustsim.check_tripod(disk10, marked, t)
        assert ustsim.trifurcation_of(t) == t.trifurcation
        rec = t.to_record(disk10, 4, 0)
        assert set(rec) == {"trifurcation", "gamma1", "gamma2", "gamma3", "seed", "stream"}


def test_rejection_budget(disk10):
    marked = hexgeom.mark_boundary_edges(disk10, (0.0, 2.0, 4.0))
    with pytest.raises(ustsim.RejectionBudgetError, match="htransform"):
        ustsim.sample_tripods(disk10, marked, 5, RngState(1), "rejection", max_trials=3)


def test_joins_branch_matches_exact_g(flower, flower_marked):
    exact = observables.exact_tripod_statistics(flower, flower_marked)["g"]
    n = 20_000
    for v, ep in exact.items():
        g = ep.value
        hits = ustsim.joins_branch_count(flower, flower_marked, v, n, RngState(8, v))
        assert abs(hits / n - g) <= 4 * math.sqrt(g * (1 - g) / n) + 1e-12


def test_h_transform_rejects_zero_start(flower):
    h = np.zeros(flower.n_vertices)
    with pytest.raises(ustsim.AbsorbedByConditioningError):
        ustsim.simple_random_walk(flower, int(flower.interior_vertices[0]), RngState(0), h_weight=h)
