import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hextripod import continuum, sle
from hextripod.ustsim import RngState

SYM = sle.SleParams()
DT = min(1e-3, SYM.max_dt())
seeds = st.integers(0, 2**31 - 1)


@given(seeds)
def test_capacity_normalisation(seed):
    d = sle.drive_radial(SYM, 0.5, DT, RngState(seed))
    assert d.ordered()
    st_ = sle.radial_flow(d, [0j, 0.1 + 0.2j])
    assert st_.dg[0] / math.exp(d.T) == pytest.approx(1.0, abs=1e-6)
    assert abs(st_.g[0]) < 1e-12


@given(st.floats(0.05, 3.0), st.floats(0, 2 * math.pi))
def test_constant_driver_is_radial_slit(T, a):
    d = sle.Driver.constant(a, T, 200)
    tr = sle.trace(d)
    # the slit [r, 1] e^{ia} has capacity log((1 + r)^2 / (4 r))
    r = abs(tr.points[-1])
    assert math.log((1 + r) ** 2 / (4 * r)) == pytest.approx(T, rel=1e-9)
    assert np.max(np.abs(np.angle(tr.points * cmath.exp(-1j * a)))) <= 1e-9
    assert sle.hull_capacity(tr.points) == pytest.approx(T, rel=1e-6)


def test_driftfree_increments():
    free = sle.SleParams(2.0, 0.0, 0.0)
    d = sle.drive_radial(free, 20.0, 1e-3, RngState(3))
    inc = np.diff(d.xi)
    assert abs(inc.mean()) <= 4 * math.sqrt(2.0 * 1e-3 / len(inc))
    assert inc.var() / (2.0 * 1e-3) == pytest.approx(1.0, abs=0.05)


@given(seeds)
def test_force_point_ordering(seed):
    d = sle.drive_radial(SYM, 0.3, DT, RngState(seed))
    assert d.ordered()
    assert np.all(np.diff(d.t) > 0)


def test_zero_noise_is_symmetric():
    d = sle.drive_radial(SYM, 1.0, DT, None, zero_noise=True)
    assert np.max(np.abs(d.xi - SYM.theta3)) < 1e-9


def test_same_state_same_driver():
    a = sle.drive_radial(SYM, 0.3, DT, RngState(1, 4))
    b = sle.drive_radial(SYM, 0.3, DT, RngState(1, 4))
    assert np.array_equal(a.xi, b.xi)


def test_refined_grid_is_same_chain():
    d = sle.drive_radial(SYM, 0.5, DT, RngState(2))
    fine = sle.trace(d.refine(3)).points[::3]
    assert np.max(np.abs(fine - sle.trace(d).points)) < 1e-11


def test_flow_inverse_round_trip():
    d = sle.drive_radial(SYM, 0.7, DT, RngState(5))
    z = np.array([0.1 + 0.3j, -0.4j, 0.5])
    w = sle.radial_flow(d, z).g
    assert np.max(np.abs(sle.inverse_flow(d, w) - z)) < 1e-9


def test_semigroup():
    d = sle.drive_radial(SYM, 0.6, DT, RngState(6))
    k = len(d.t) // 2
    half = sle.radial_flow(d, [0.2 + 0.1j], t_end=d.t[k])
    rest = sle.flow_segment(d, half, k, len(d.t) - 1)
    full = sle.radial_flow(d, [0.2 + 0.1j])
    assert abs(rest.g[0] - full.g[0]) < 1e-12


def test_driver_force_points_converge_to_flow():
    # V is Euler-integrated, the flow of angles is exact for the same driver
    errs = []
    for dt in (DT, DT / 4):
        d = sle.drive_radial(SYM, 0.4, dt, RngState(7))
        flow = sle.radial_flow(d, angles=[SYM.theta1, SYM.theta2])
        gap = np.angle(np.exp(1j * (flow.h - sle.driver_state(d).h)))
        errs.append(np.max(np.abs(gap)))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0]


def test_rn_identity_cases():
    d = sle.drive_radial(SYM, 0.3, DT, RngState(8))
    state = sle.radial_flow(d, [0.1j, 0.1j])
    assert sle.rn_ratio_1rad(state, 2.0, 0, 1) == pytest.approx(1.0)
    path = sle.rn_path_3rad(d)
    assert path[-1] == pytest.approx(sle.rn_ratio_3rad(sle.driver_state(d), 2.0), rel=1e-10)


def test_partition_functions_kappa2():
    poly = continuum.ContinuumPolygon.half_plane((-1.0, 0.2, 1.5))
    z = 0.3 + 0.7j
    assert sle.partition_1rad(2.0, poly, -1.0, z) == pytest.approx(continuum.poisson_h(z, -1.0), rel=1e-12)
    assert sle.partition_3rad(2.0, poly, z) == pytest.approx(continuum.z_tri(poly, z), rel=1e-12)


def test_self_intersection_counter():
    square_cross = np.array([0, 1, 1 + 1j, 0.5 - 0.5j])
    assert sle.self_intersections(square_cross) == 1
    assert sle.self_intersections(np.array([0, 1, 1 + 1j, 1j])) == 0
    with pytest.raises(ValueError):
        sle.self_intersections(square_cross, separation=1)


def test_first_hit_agrees_with_trace():
    d = sle.drive_radial(SYM, 1.0, DT, RngState(9))
    hit = sle.first_hit(d, 0.5)
    tr = sle.trace(d)
    k = int(np.flatnonzero(np.abs(tr.points) <= 0.5)[0])
    assert hit[0] == pytest.approx(tr.times[k])
    assert hit[1] == pytest.approx(tr.points[k])


def test_three_sided_structure_and_nesting():
    a = sle.sample_three_sided_truncated(SYM, 0.2, RngState(10), resolution=None)
    b = sle.sample_three_sided_truncated(SYM, 0.1, RngState(10), resolution=None)
    g3a, g3b = a.gamma3.points, b.gamma3.points
    # the final step is shortened to land on the stopping capacity
    assert np.array_equal(g3a[:-1], g3b[: len(g3a) - 1])
    for tr, theta in zip(a, (SYM.theta3, SYM.theta1, SYM.theta2)):
        assert abs(tr.points[0] - cmath.exp(1j * theta)) < 1e-9
        assert np.all(np.abs(tr.points) <= 1 + 1e-9)
    assert sle.crossings(a.gamma1.points, a.gamma3.points, 0.2) == 0
    assert sle.crossings(a.gamma2.points, a.gamma1.points, 0.2) == 0


def test_invalid_parameters():
    with pytest.raises(ValueError):
        sle.SleParams(theta1=1.0, theta2=0.5)
    with pytest.raises(ValueError):
        sle.SleParams(kappa=5.0)
    with pytest.raises(ValueError):
        sle.sample_three_sided_truncated(SYM, 0.7, RngState(0))
