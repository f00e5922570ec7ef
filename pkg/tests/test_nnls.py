import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import nnls as scipy_nnls

from noisetomo.errors import DomainError, SolverError
from noisetomo.nnls import KKT_TOL, kkt_violation, nnls_solve


def objective(a, b, w, x):
    r = a @ x - b
    return float(np.sum(w * r**2))


def well_conditioned(rng, rows=6, cols=3):
    q, _ = np.linalg.qr(rng.normal(size=(rows, cols)))
    return q * rng.uniform(1.0, 1.2, cols)


def simplex_grid(step=1e-3):
    ticks = np.round(np.arange(0, 1 + step / 2, step), 12)
    x1, x2 = np.meshgrid(ticks, ticks, indexing="ij")
    keep = x1 + x2 <= 1 + 1e-12
    x1, x2 = x1[keep], x2[keep]
    return np.stack([x1, x2, np.clip(1 - x1 - x2, 0, None)], axis=1)


def grid_argmin(a, b, w, points):
    r = points @ a.T - b
    f = (w * r**2).sum(axis=1)
    return points[np.argmin(f)], f.min()


def box_grid_argmin(a, b, w, top):
    # coarse pass over [0, top]**3, then a fine pass around the best point
    best = np.zeros(3)
    for step, half in ((0.01, None), (0.001, 0.02)):
        if half is None:
            axes = [np.arange(0, top + step, step)] * 3
        else:
            axes = [np.clip(np.arange(c - half, c + half + step / 2, step), 0, None) for c in best]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        best, fmin = grid_argmin(a, b, w, pts)
    return best, fmin


def test_identity_examples():
    np.testing.assert_allclose(nnls_solve(np.eye(3), [0.2, 0.0, 4.0]).x, [0.2, 0.0, 4.0], atol=1e-15)
    res = nnls_solve(np.eye(2), [-1.0, 2.0])
    np.testing.assert_allclose(res.x, [0.0, 2.0], atol=1e-15)
    assert res.kkt_violation <= KKT_TOL
    np.testing.assert_array_equal(res.support, [False, True])


@pytest.mark.parametrize("seed", range(10))
def test_noiseless_recovery(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (6, 3))
    x_true = rng.dirichlet(np.ones(3))
    np.testing.assert_allclose(nnls_solve(a, a @ x_true).x, x_true, atol=1e-8)
    np.testing.assert_allclose(nnls_solve(a, a @ x_true, sum_to=1.0).x, x_true, atol=1e-8)


@pytest.mark.parametrize("seed", range(8))
def test_simplex_grid_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    a = well_conditioned(rng)
    w = rng.uniform(0.5, 2.0, 6)
    # targets pushed off the image so some solutions sit on the boundary
    b = a @ rng.dirichlet(np.ones(3)) + 0.3 * rng.normal(size=6)
    res = nnls_solve(a, b, w, sum_to=1.0)
    xg, fg = grid_argmin(a, b, w, simplex_grid())
    assert objective(a, b, w, res.x) <= fg + 1e-12
    np.testing.assert_allclose(res.x, xg, atol=1e-3)
    assert res.kkt_violation <= KKT_TOL


@pytest.mark.parametrize("seed", range(8))
def test_box_grid_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    a = well_conditioned(rng)
    w = rng.uniform(0.5, 2.0, 6)
    b = a @ rng.uniform(0, 1, 3) + 0.3 * rng.normal(size=6)
    res = nnls_solve(a, b, w)
    xg, fg = box_grid_argmin(a, b, w, top=2.0)
    assert res.x.max() < 2.0
    assert objective(a, b, w, res.x) <= fg + 1e-12
    np.testing.assert_allclose(res.x, xg, atol=1e-3)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 12),
    st.integers(1, 6),
    st.integers(0, 2**32 - 1),
    st.booleans(),
)
def test_kkt_certificate_and_scipy(rows, cols, seed, constrained):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rows, cols))
    b = rng.normal(size=rows)
    w = rng.uniform(0.1, 10.0, rows)
    sum_to = 1.0 if constrained else None
    res = nnls_solve(a, b, w, sum_to=sum_to)
    assert np.all(res.x >= 0)
    assert res.kkt_violation <= KKT_TOL
    assert kkt_violation(a, b, w, res.x, sum_to) <= KKT_TOL
    if constrained:
        assert res.x.sum() == pytest.approx(1.0, abs=1e-12)
    else:
        sw = np.sqrt(w)
        ref, _ = scipy_nnls(a * sw[:, None], b * sw)
        assert objective(a, b, w, res.x) <= objective(a, b, w, ref) * (1 + 1e-9) + 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(float, 8, elements=st.floats(0.1, 10)), st.floats(1e-3, 1e3), st.integers(0, 10**6))
def test_weight_scaling_invariance(w, scale, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (8, 4))
    b = rng.uniform(0, 1, 8)
    x1 = nnls_solve(a, b, w).x
    x2 = nnls_solve(a, b, w * scale).x
    np.testing.assert_allclose(x1, x2, atol=1e-9)


def test_row_permutation_invariance(rng):
    a = rng.uniform(0, 1, (20, 4))
    b = rng.uniform(0, 1, 20)
    w = rng.uniform(1, 2, 20)
    perm = rng.permutation(20)
    np.testing.assert_allclose(nnls_solve(a, b, w, sum_to=1.0).x,
                               nnls_solve(a[perm], b[perm], w[perm], sum_to=1.0).x, atol=1e-12)


def test_ill_conditioned_interior_solution():
    # Vandermonde rows on a narrow node range: the gradient of a missing
    # component is far below rounding, yet the fit must still find it
    nodes = np.linspace(0.85, 1.0, 6)
    a = nodes[:, None] ** np.arange(6)[None, :]
    x_true = np.random.default_rng(1).dirichlet(np.ones(6))
    assert np.linalg.cond(a) > 1e8
    for sum_to in (None, 1.0):
        res = nnls_solve(a, a @ x_true, sum_to=sum_to)
        np.testing.assert_allclose(res.x, x_true, atol=1e-6)


def test_kkt_checker_detects_bad_points():
    a, b = np.eye(2), np.array([1.0, 2.0])
    assert kkt_violation(a, b, None, np.array([1.0, 2.0])) < 1e-15
    assert kkt_violation(a, b, None, np.array([0.0, 2.0])) > 0.1
    assert kkt_violation(a, b, None, np.array([-0.5, 2.0])) == 0.5
    assert kkt_violation(a, b, None, np.array([0.4, 0.6]), sum_to=1.0) > 0.1


def test_iteration_cap():
    a = np.eye(5)
    b = np.array([1.0, -1.0, 2.0, -1.0, 3.0])
    with pytest.raises(SolverError) as exc:
        nnls_solve(a, b, max_iter=1)
    assert exc.value.last_iterate is not None
    assert exc.value.last_iterate.shape == (5,)


def test_input_validation():
    with pytest.raises(DomainError):
        nnls_solve(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        nnls_solve(np.eye(2), [1.0, 2.0], weights=[1.0, 0.0])
    with pytest.raises(DomainError):
        nnls_solve(np.eye(2), [1.0, 2.0], sum_to=0.0)
