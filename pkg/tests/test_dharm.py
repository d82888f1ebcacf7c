import cmath
import functools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hextripod import continuum, dharm, hexgeom


def test_green_matches_dense_inverse(disk10):
    dense = dharm.absorbing_chain_green(disk10)
    iv = disk10.interior_vertices
    for j in (0, len(iv) // 2, len(iv) - 1):
        g = dharm.green(disk10, int(iv[j])).values[iv]
        assert np.allclose(g, dense[:, j], atol=1e-12)


def test_green_is_symmetric(disk10):
    iv = disk10.interior_vertices
    cols = dharm.green_matrix_columns(disk10, iv[:20])
    block = cols[iv[:20]]
    assert np.allclose(block, block.T, atol=1e-12)


def test_green_laplacian_is_point_mass(disk10):
    u = int(disk10.interior_vertices[30])
    g = dharm.green(disk10, u)
    lap = dharm.laplacian(disk10, g.values)
    expected = np.zeros(disk10.n_vertices)
    expected[u] = -1.0
    assert np.allclose(lap[disk10.interior], expected[disk10.interior], atol=1e-12)


def test_poisson_kernels_sum_to_one(disk10):
    total = sum(dharm.poisson_kernel(disk10, e).values for e in disk10.boundary_edges)
    assert np.allclose(total[disk10.interior], 1.0, atol=1e-10)


def test_flower_poisson_kernel_closed_form(flower):
    # interior is a 6-cycle with one exit each: H(u, own edge) solves (3I - A) h = e_u,
    # i.e. h_k = (1/6) sum_j cos(2 pi j k / 6) / (3 - 2 cos(2 pi j / 6)) with k the cycle distance
    e = flower.boundary_edges[0]
    h = dharm.poisson_kernel(flower, e).values
    u = e[0]
    iv = list(flower.interior_vertices)
    order = [u]
    while len(order) < 6:
        nxt = [w for w in flower.neighbors[order[-1]] if w in iv and w not in order]
        order.append(nxt[0])
    lam = [3 - 2 * np.cos(2 * np.pi * j / 6) for j in range(6)]
    for k, v in enumerate(order):
        closed = sum(np.cos(2 * np.pi * j * k / 6) / lam[j] for j in range(6)) / 6
        assert h[v] == pytest.approx(closed, abs=1e-14)


@given(st.integers(0, 168))
def test_harmonic_measure_of_whole_boundary(i):
    dom = hexgeom.approximate_disk((0.0, 0.0), 1.0, 0.1)
    v = int(dom.interior_vertices[i % len(dom.interior_vertices)])
    assert dharm.harmonic_measure(dom, v, dom.boundary_cycle) == pytest.approx(1.0, abs=1e-10)


def test_dirichlet_reproduces_discrete_harmonic_data(disk10):
    # x is not discrete harmonic on the honeycomb, but the mean of three unit
    # neighbour steps vanishes, so linear functions are
    lin = 0.3 * disk10.coords[:, 0] - 0.7 * disk10.coords[:, 1]
    f = dharm.solve_dirichlet(disk10, lin)
    assert np.allclose(f.values, lin, atol=1e-12)


def test_poisson_derivative_definition(disk10):
    e = disk10.boundary_edges[5]
    h = dharm.poisson_kernel(disk10, e)
    v = int(disk10.interior_vertices[50])
    for k in (1, 2, 3):
        w = disk10.neighbors[v][k - 1]
        assert dharm.poisson_derivative(disk10, v, e, k, h) == pytest.approx((h[w] - h[v]) / disk10.delta)
    with pytest.raises(ValueError):
        dharm.poisson_derivative(disk10, v, e, 4, h)


def test_rejects_non_boundary_edge(disk10):
    v = int(disk10.interior_vertices[50])
    with pytest.raises(ValueError):
        dharm.poisson_kernel(disk10, (v, disk10.neighbors[v][0]))


def test_direct_exit_lower_bound(disk10):
    for e in disk10.boundary_edges[::7]:
        assert dharm.poisson_kernel(disk10, e)[e[0]] >= 1 / 3


def test_empty_arc_has_zero_measure(disk10):
    assert dharm.harmonic_measure(disk10, int(disk10.interior_vertices[0]), []) == 0.0


@given(st.floats(-5, 5), st.floats(0, 5), st.integers(0, 2**32 - 1))
def test_maximum_principle(a, width, seed):
    dom = hexgeom.build_flower(2)
    data = np.random.default_rng(seed).uniform(a, a + width, dom.n_vertices)
    f = dharm.solve_dirichlet(dom, data).values[dom.interior]
    assert np.all(f >= a - 1e-12) and np.all(f <= a + width + 1e-12)


def test_random_source_superposition(flower):
    iv = flower.interior_vertices
    src = np.random.default_rng(11).normal(size=len(iv))
    g = dharm.solve_poisson_problem(flower, src).values
    dense = dharm.absorbing_chain_green(flower)
    assert np.allclose(g[iv], dense @ src, atol=1e-10)


def test_derivatives_sum_to_zero_where_harmonic(disk10):
    e = disk10.boundary_edges[3]
    h = dharm.poisson_kernel(disk10, e)
    v = int(disk10.interior_vertices[60])
    assert v != e[0]
    assert sum(dharm.poisson_derivative(disk10, v, e, k, h) for k in (1, 2, 3)) == pytest.approx(0.0, abs=1e-9)


# scaling limits on the unit disk; references use the mass-2pi convention

UNIT = continuum.ContinuumPolygon.unit_disk(angles=(0.0, 2.0, 4.0))
X1, X2, X3 = 1.0, cmath.exp(2j), cmath.exp(4j)
# G counts visits of the walk, the normalisation of -Delta G = 1 with the
# averaging Laplacian; that makes every limit three times the quoted constant
# when G enters it linearly
VISIT_GREEN = 3 * math.sqrt(3) / (2 * math.pi)


@functools.lru_cache(maxsize=None)
def _disk(delta):
    dom = hexgeom.approximate_disk((0.0, 0.0), 1.0, delta)
    return dom, hexgeom.nearest_interior_vertex(dom, 0j), hexgeom.mark_boundary_edges(dom, (0.0, 2.0, 4.0))


def _green_ratio(delta):
    dom, v, _ = _disk(delta)
    w = hexgeom.nearest_interior_vertex(dom, 0.5)
    return dharm.green(dom, v)[w] / continuum.green_c(UNIT, dom.point(v), dom.point(w))


def _arc(dom, lo, hi):
    ang = np.angle(dom.coords[:, 0] + 1j * dom.coords[:, 1]) % (2 * np.pi)
    return [b for b in dom.boundary_cycle if lo < ang[b] < hi]


def _boundary_poisson_ratio(delta):
    dom, v, m = _disk(delta)
    e1, e2, _ = m.edges
    h1, h2 = dharm.poisson_kernel(dom, e1), dharm.poisson_kernel(dom, e2)
    lat = h1[e2[0]] / (h1[v] * h2[v])
    cont = continuum.boundary_poisson(UNIT, X1, X2) / (continuum.poisson(UNIT, 0j, X1) * continuum.poisson(UNIT, 0j, X2))
    return lat / cont


def _boundary_measure_ratio(delta):
    dom, v, m = _disk(delta)
    e2 = m.edges[1]
    lat = dharm.harmonic_measure(dom, e2[0], _arc(dom, 4.0, 2 * np.pi)) / dharm.poisson_kernel(dom, e2)[v]
    cont = continuum.hmeasure_boundary(UNIT, X2, (X3, X1)) / continuum.poisson(UNIT, 0j, X2)
    return lat / cont


def test_green_converges_to_visit_constant():
    errs = [abs(_green_ratio(d) / VISIT_GREEN - 1) for d in (0.05, 0.02, 0.01)]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 0.03


@pytest.mark.xfail(strict=True, reason="limit is 3 sqrt(3)/(2 pi) for the visit-count Green's function")
def test_green_literal_constant():
    assert _green_ratio(0.01) == pytest.approx(math.sqrt(3) / (2 * math.pi), rel=0.05)


def test_harmonic_measure_scaling():
    dom, v, _ = _disk(0.02)
    lat = dharm.harmonic_measure(dom, v, _arc(dom, 0.0, 2.0))
    cont = continuum.hmeasure(UNIT, dom.point(v), (X1, X2)) / (2 * math.pi)
    assert lat == pytest.approx(cont, rel=0.03)


def test_boundary_poisson_converges():
    ratios = [_boundary_poisson_ratio(d) for d in (0.1, 0.02, 0.01)]
    target = 2 * math.sqrt(3) * math.pi / 3
    errs = [abs(r / target - 1) for r in ratios]
    assert errs[-1] < 0.01 and errs[-1] < errs[0]


@pytest.mark.xfail(strict=True, reason="limit is 2 sqrt(3) pi / 3, see the visit-count normalisation")
def test_boundary_poisson_literal_constant():
    assert _boundary_poisson_ratio(0.01) == pytest.approx(2 * math.sqrt(3) * math.pi, rel=0.05)


def test_boundary_measure_converges():
    errs = [abs(_boundary_measure_ratio(d) * math.sqrt(3) - 1) for d in (0.1, 0.02, 0.01)]
    assert errs[-1] < 0.01 and errs[-1] < errs[0]


@pytest.mark.xfail(strict=True, reason="limit is sqrt(3) / 3, see the visit-count normalisation")
def test_boundary_measure_literal_constant():
    assert _boundary_measure_ratio(0.01) == pytest.approx(math.sqrt(3), rel=0.05)


def test_poisson_derivative_scaling():
    dom, v0, m = _disk(0.02)
    e1 = m.edges[0]
    h = dharm.poisson_kernel(dom, e1)
    left = [u for u in dom.interior_vertices if dom.case[u] == hexgeom.LEFT]
    u = min(left, key=lambda q: abs(dom.point(q) - (-0.3 + 0.2j)))
    z, eps = dom.point(u), 1e-6
    ref = continuum.poisson(UNIT, 0j, X1)
    for k in (1, 2, 3):
        tau = (dom.point(dom.neighbors[u][k - 1]) - z) / dom.delta
        d = (continuum.poisson(UNIT, z + eps * tau, X1) - continuum.poisson(UNIT, z - eps * tau, X1)) / (2 * eps)
        lat = dharm.poisson_derivative(dom, u, e1, k, h) / h[v0]
        assert lat == pytest.approx(d / ref, rel=0.05)
