import numpy as np
import pytest

from ellipfeas.errors import InvalidInput
from ellipfeas.generators import GenSpec, Stream, generate, generate_constructed
from ellipfeas.problem import Certificate, Kind, residuals, verify_certificate


def test_stream_uniform_recipe():
    raw = np.random.PCG64(5).random_raw(4)
    expected = (raw >> np.uint64(11)).astype(float) / 2.0 ** 53
    np.testing.assert_array_equal(Stream(5).uniform(4), expected)
    u = Stream(9).uniform(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_stream_normal_moments():
    z = Stream(1).normal(200_001)
    assert len(z) == 200_001
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


@pytest.mark.parametrize("n,m,seed", [(2, 3, 0), (5, 12, 1), (30, 84, 2)])
def test_feasible_instances(n, m, seed):
    P, y0 = generate(GenSpec(n, m, "feasible", seed))
    assert P.A.shape == (n, m)
    scale = 1 + np.max(np.abs(P.A.T @ y0))
    np.testing.assert_allclose(residuals(P, y0), -1.0, atol=1e-14 * scale)


@pytest.mark.parametrize("n,m,seed", [(2, 3, 0), (5, 12, 1), (30, 84, 2), (60, 240, 3)])
def test_infeasible_instances(n, m, seed):
    P, x = generate(GenSpec(n, m, "infeasible", seed))
    assert np.all(x >= 0)
    assert np.max(np.abs(P.A @ x)) <= 1e-12 * np.abs(P.A).max() * m
    assert P.u @ x < 0
    assert verify_certificate(P, None, Certificate(x, Kind.ONE_SIDED))


def test_determinism_and_independence():
    a = generate(GenSpec(4, 9, "feasible", 7))
    b = generate(GenSpec(4, 9, "feasible", 7))
    np.testing.assert_array_equal(a[0].A, b[0].A)
    np.testing.assert_array_equal(a[0].u, b[0].u)
    c = generate(GenSpec(4, 9, "feasible", 8))
    assert not np.array_equal(a[0].A, c[0].A)
    d = generate(GenSpec(4, 9, "infeasible", 7))
    assert not np.allclose(a[0].A, d[0].A)


def test_spec_validation():
    with pytest.raises(InvalidInput):
        GenSpec(3, 3, "feasible", 0)
    with pytest.raises(InvalidInput):
        GenSpec(0, 3, "feasible", 0)
    with pytest.raises(InvalidInput):
        GenSpec(2, 3, "maybe", 0)


@pytest.mark.parametrize("feasible", [True, False])
def test_constructed_condition_value(feasible):
    pl = generate_constructed(4, 10, 0.3, feasible, 11)
    assert pl.z == (-0.3 if feasible else 0.3)
    res = residuals(pl.P, pl.y_star)
    np.testing.assert_allclose(res, pl.z, atol=1e-12)
    assert np.all(pl.x > 0) and pl.x.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(pl.P.A @ pl.x, 0.0, atol=1e-13)
    # x certifies that no y does better than z
    assert -(pl.P.u @ pl.x) == pytest.approx(pl.z, abs=1e-12)
    with pytest.raises(InvalidInput):
        generate_constructed(4, 10, 0.0, feasible, 11)
