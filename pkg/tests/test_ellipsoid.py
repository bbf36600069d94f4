import math

import numpy as np
import pytest
from hypothesis import given, strategies as st_

from ellipfeas import ellipsoid as ell
from ellipfeas import steps
from ellipfeas.errors import InvalidInput, NonPositiveF, NotPositiveDefinite
from ellipfeas.problem import Certificate, Problem, verify_certificate

from helpers import boundary_points, box_state, random_state

seeds = st_.integers(0, 100_000)


def empty_pair_state():
    """y <= -1 and y >= 1, each with the valid but weak lower bound -3."""
    P = Problem(np.array([[1.0, -1.0]]), np.array([-1.0, -1.0]))
    return ell.build(P, np.array([-3.0, -3.0]), np.array([1.0, 1.0]))


def test_build_box():
    st = box_state()
    assert st.ybar == pytest.approx([0.0])
    assert st.f == pytest.approx(1.0) and st.p == pytest.approx(0.0, abs=1e-15)
    assert box_state((1.0, 1.0)).f == pytest.approx(2.0)
    with pytest.raises(NotPositiveDefinite):
        box_state((0.0, 0.0))


def test_build_rejects_bad_weights():
    P = Problem(np.array([[1.0, -1.0]]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidInput):
        ell.build(P, np.array([-1.0, -1.0]), np.array([-1.0, 1.0]))
    with pytest.raises(InvalidInput):
        ell.build(P, np.array([-np.inf, -1.0]), np.array([1.0, 1.0]))


def test_f_forms_on_box():
    st = box_state()
    assert ell.f_value(st) == pytest.approx(1.0)
    assert ell.f_crosscheck(st) == pytest.approx(1.0)


@given(seeds)
def test_f_forms_agree(seed):
    st, _ = random_state(seed, n=3, m=7, zero_frac=0.3)
    assert ell.f_mismatch(st) <= 1e-8


@given(seeds)
def test_f_invariant_under_recentring(seed):
    st, _ = random_state(seed, n=2, m=6)
    c = np.random.default_rng(seed).normal(size=2) * 10
    shift = st.P.A.T @ c
    moved = ell.build(Problem(st.P.A, st.P.u + shift), st.l + shift, st.d)
    assert moved.f == pytest.approx(st.f, rel=1e-8)
    assert moved.ybar == pytest.approx(st.ybar + c, rel=1e-8, abs=1e-8)


def test_negative_f_forms_agree():
    st = empty_pair_state()
    assert st.f < 0
    assert ell.f_value(st) == pytest.approx(ell.f_crosscheck(st), rel=1e-12)


def test_gamma_box_and_homogeneity():
    st = box_state()
    assert ell.gamma(st, 0) == pytest.approx(1.0)
    st2 = box_state((3.0, 3.0))
    assert ell.gamma(st2, 0) == pytest.approx(1.0)
    with pytest.raises(NonPositiveF):
        ell.gamma(empty_pair_state(), 0)


@pytest.mark.parametrize("seed", range(5))
def test_gamma_against_sampled_boundary(seed):
    st, _ = random_state(seed, n=2, m=5)
    Y = boundary_points(st)
    widths = np.max(st.P.A.T @ (Y - st.ybar[:, None]), axis=1)
    assert widths == pytest.approx(ell.gammas(st), rel=1e-4)


def test_scale_to_unit_f():
    st = box_state((1.0, 1.0))
    ell.scale_to_unit_f(st)
    assert st.d == pytest.approx([0.5, 0.5]) and st.f == pytest.approx(1.0)
    d = st.d.copy()
    ell.scale_to_unit_f(st)
    assert st.d == pytest.approx(d)
    st, _ = random_state(3, unit=False)
    y, g = st.ybar.copy(), ell.gammas(st)
    ell.scale_to_unit_f(st)
    assert st.ybar == pytest.approx(y, abs=1e-10)
    assert ell.gammas(st) == pytest.approx(g, rel=1e-10)


def test_apply_sigma_zero_is_identity():
    st, _ = random_state(0)
    before = st.copy()
    ell.apply_sigma(st, 1, 0.0)
    assert np.array_equal(st.d, before.d) and st.f == before.f


def test_apply_sigma_hand_values():
    # alpha = 0, beta = 1: centre on the upper face, l_j one semi-width below it
    P = Problem(np.array([[1.0, -1.0]]), np.array([0.0, 2.0]))
    st = ell.build(P, np.array([-2.0, 0.0]), np.array([0.5, 0.5]))
    ell.scale_to_unit_f(st)
    dep = steps.cut_depths(st, 0)
    p0 = st.p
    sigma = 2.0 / 3.0
    expected = steps.zeta(dep.alpha, dep.beta, sigma)
    ell.apply_sigma(st, 0, sigma)
    assert st.f == pytest.approx(expected, rel=1e-12)
    assert st.p == pytest.approx(p0 + math.log(1.0 / 3.0), rel=1e-12)
    if dep.alpha == pytest.approx(0.0, abs=1e-12) and dep.beta == pytest.approx(1.0):
        assert st.f == pytest.approx(4.0 / 3.0)


@given(seeds, st_.floats(-0.9, 0.9))
def test_apply_sigma_matches_zeta(seed, frac):
    st, _ = random_state(seed, n=3, m=7)
    j = int(np.random.default_rng(seed).integers(st.m))
    dep = steps.cut_depths(st, j)
    lo = steps.sigma_zero(st.d[j], dep.gamma) if st.d[j] > 0 else 0.0
    sigma = frac * (lo if frac < 0 else 0.95)
    if frac < 0:
        sigma = -frac * lo  # lo <= 0, so this stays in (lo, 0]
    z = steps.zeta(dep.alpha, dep.beta, sigma)
    p = st.p
    ell.apply_sigma(st, j, sigma)
    fresh = ell.build(st.P, st.l, st.d)
    assert fresh.f == pytest.approx(z, rel=1e-8, abs=1e-10)
    assert st.f == pytest.approx(z, rel=1e-8, abs=1e-10)
    assert st.p == pytest.approx(p + math.log1p(-sigma), abs=1e-8)


@given(seeds)
def test_pareto_center_to_boundary(seed):
    st, _ = random_state(seed, n=3, m=7)
    j = int(np.argmax(st.s - st.P.u))
    # make row j violated by pulling its upper bound below the centre
    rng = np.random.default_rng(seed)
    P = Problem(st.P.A, st.P.u.copy())
    P.u[j] = st.s[j] - rng.uniform(0.05, 0.5) * ell.gamma(st, j)
    if not P.u[j] > st.l[j] + 1e-3:
        return
    st = ell.build(P, st.l, st.d)
    if not (st.f > 0 and st.s[j] > P.u[j]):
        return  # the new u_j also moves the centre
    ell.scale_to_unit_f(st)
    f0 = st.f
    dep = steps.cut_depths(st, j)
    sig = 2 * (st.s[j] - P.u[j]) / ((dep.alpha + dep.beta) * dep.gamma)
    assert sig == pytest.approx((st.s[j] - P.u[j]) / st.tbar[j], rel=1e-10)
    ell.pareto_center_to_boundary(st, j)
    assert abs(st.s[j] - P.u[j]) <= 1e-8 * (1 + abs(P.u[j]))
    assert st.f <= f0 + 1e-10


def test_pareto_center_identity_when_on_boundary():
    P = Problem(np.array([[1.0, -1.0]]), np.array([0.0, 2.0]))
    st = ell.build(P, np.array([-2.0, 0.0]), np.array([0.5, 0.5]))
    d = st.d.copy()
    ell.pareto_center_to_boundary(st, 0)
    assert np.array_equal(st.d, d)


def test_pareto_raise_bound_hand():
    P = Problem(np.array([[1.0, -1.0]]), np.array([0.0, 2.0]))
    st = ell.build(P, np.array([-2.0, 0.0]), np.array([1.0, 1.0]))
    # centre: a_0^T ybar = 0 = u_0; raise l_0 from -2 to -1: mu = 1/1 * 1
    ell.pareto_raise_bound(st, 0, -1.0)
    assert st.d[0] == pytest.approx(2.0)
    with pytest.raises(InvalidInput):
        ell.pareto_raise_bound(st, 0, 0.5)


def test_pareto_raise_bound_zero_weight():
    st, _ = random_state(1, n=2, m=5)
    ell.drop(st, 4)
    f, d = st.f, st.d.copy()
    ell.pareto_raise_bound(st, 4, st.l[4] + 0.1)
    assert np.array_equal(st.d, d) and st.f == pytest.approx(f)


@given(seeds)
def test_pareto_raise_bound_keeps_centre_and_f(seed):
    st, _ = random_state(seed, n=3, m=7)
    j = 0
    P = Problem(st.P.A, st.P.u.copy())
    P.u[j] = st.s[j] - 0.2 * ell.gamma(st, j)
    if not P.u[j] > st.l[j] + 1e-3:
        return
    st = ell.build(P, st.l, st.d)
    if not (st.f > 0 and st.s[j] > P.u[j]):
        return
    ell.scale_to_unit_f(st)
    ell.pareto_center_to_boundary(st, j)
    y, f = st.ybar.copy(), st.f
    ell.pareto_raise_bound(st, j, 0.5 * (st.l[j] + P.u[j]))
    assert np.linalg.norm(st.ybar - y) <= 1e-8 * (1 + np.linalg.norm(y))
    assert abs(st.f - f) <= 1e-8 * (1 + abs(f))


def test_certificate_from_state_cases():
    assert ell.certificate_from_state(box_state(), np.array([-1.0, -1.0])) is None
    st = empty_pair_state()
    c = ell.certificate_from_state(st, st.l)
    assert isinstance(c, Certificate) and verify_certificate(st.P, st.l, c)
    assert c.x == pytest.approx([2.0, 2.0])
    # the interval [1, 1] written twice: E shrinks to its centre, which is feasible
    P = Problem(np.array([[1.0, -1.0]]), np.array([1.0, -1.0]))
    st = ell.build(P, np.array([1.0, -1.0]), np.array([1.0, 1.0]))
    out = ell.certificate_from_state(st, st.l)
    assert isinstance(out, ell.FeasiblePoint) and out.y == pytest.approx([1.0])


@given(seeds)
def test_containment_and_debug_recompute(seed):
    """100 random sigma steps keep y0 inside and cached values match a fresh build."""
    st, y0 = random_state(seed, n=3, m=8)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        ell.scale_to_unit_f(st)
        j = int(rng.integers(st.m))
        sigma = float(rng.uniform(0.0, 0.5))
        ell.apply_sigma(st, j, sigma)
        assert ell.contains(st, y0)
    fresh = ell.build(st.P, st.l, st.d)
    assert st.ybar == pytest.approx(fresh.ybar, rel=1e-6, abs=1e-6)
    assert st.f == pytest.approx(fresh.f, rel=1e-6)
    assert st.p == pytest.approx(fresh.p, abs=1e-6)


def test_surrogates():
    st, _ = random_state(2, unit=False)
    assert st.g <= st.g_tilde + 1e-12


def test_debug_dump_line():
    line = ell.debug_dump_line(3, 1, "increase", 0.25, box_state())
    assert line.split(", ")[:4] == ["3", "1", "increase", "0.25"]
