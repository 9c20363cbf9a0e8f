import math

import mpmath as mp
import numpy as np
import pytest

from kacrice.errors import TieAtMax
from kacrice.fractional import FractionalProgram, solve_v
from kacrice.lasso import lasso_fit, lasso_knot, lasso_pvalue, lasso_v_bounds
from kacrice.model import Lasso, Problem


def vertex_bounds(X, y, S):
    """Brute force V-/V+ by enumerating the vertices of the l1 ball (and 0)."""
    score = X.T @ y
    j = int(np.argmax(np.abs(score)))
    s = np.sign(score[j])
    lam = abs(score[j])
    theta = X.T @ S @ X
    c = s * theta[:, j] / theta[j, j]
    a = score - lam * c
    vm, vp = 0.0, math.inf
    for k in range(X.shape[1]):
        for sign in (1.0, -1.0):
            den = 1.0 - sign * c[k]
            if abs(den) < 1e-13:
                continue
            val = sign * a[k] / den
            if den > 0:
                vm = max(vm, val)
            else:
                vp = min(vp, val)
    return lam, vm, vp


def test_knot_identity():
    cert, st = lasso_knot(Problem(np.eye(2), np.array([2.0, 1.0]), np.eye(2), Lasso()))
    assert (cert.lambda1, st.j_star, st.s_star) == (2.0, 0, 1)
    assert cert.tangent_dim == 0 and cert.tangent_basis.shape == (2, 0)


def test_knot_small_case():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    cert, st = lasso_knot(Problem(X, np.array([1.0, 0.0, 0.0]), np.eye(3), Lasso()))
    assert cert.lambda1 == 2.0 and st.j_star == 1


def test_knot_zero_response_ties():
    with pytest.raises(TieAtMax):
        lasso_knot(Problem(np.eye(3), np.zeros(3), np.eye(3), Lasso()))


def test_pvalue_identity():
    res = lasso_pvalue(Problem(np.eye(2), np.array([2.0, 1.0]), np.eye(2), Lasso()))
    want = float(mp.ncdf(-2) / mp.ncdf(-1))
    assert res.p_value == pytest.approx(want, rel=1e-12)


def test_orthogonal_design_second_knot():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 5)))
    y = rng.standard_normal(12)
    f = lasso_fit(Problem(Q, y, np.eye(12), Lasso()))
    lam2 = np.sort(np.abs(Q.T @ y))[-2]
    assert f.v_minus == pytest.approx(lam2, abs=1e-12)
    assert f.v_plus == math.inf


def test_single_column():
    f = lasso_fit(Problem(np.ones((4, 1)), np.array([1.0, 2.0, 0.0, 1.0]), np.eye(4), Lasso()))
    # the zero vector belongs to the ball, so V- is never below 0
    assert (f.v_minus, f.v_plus) == (0.0, math.inf)


@pytest.mark.parametrize("seed", range(10))
def test_bounds_match_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, p = 7, 5
    X = rng.standard_normal((n, p))
    A = rng.standard_normal((n, n))
    S = A @ A.T / n + 0.5 * np.eye(n)
    y = rng.standard_normal(n)
    f = lasso_fit(Problem(X, y, S, Lasso()))
    lam, vm, vp = vertex_bounds(X, y, S)
    assert f.lambda1 == pytest.approx(lam, rel=1e-14)
    assert f.v_minus == pytest.approx(vm, rel=1e-12, abs=1e-12)
    assert f.v_plus == pytest.approx(vp, rel=1e-12) or (math.isinf(vp) and math.isinf(f.v_plus))
    assert f.v_minus <= f.lambda1 <= f.v_plus


def test_bounds_match_solver():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 3))
    y = rng.standard_normal(5)
    p = Problem(X, y, np.eye(5), Lasso())
    cert, st = lasso_knot(p)
    vm, vp = lasso_v_bounds(st, p)
    c = st.s_star * st.theta_col / st.theta_jj
    lo, hi = FractionalProgram.pair(st.score - st.lambda1 * c, c, Lasso())
    assert solve_v(lo, tol=1e-10) == pytest.approx(vm, rel=1e-6, abs=1e-6)
    got_hi = solve_v(hi, tol=1e-10)
    assert got_hi == pytest.approx(vp, rel=1e-6) if math.isfinite(vp) else math.isinf(got_hi)


def test_sigma_is_theta_jj():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((6, 3))
    S = np.diag(rng.uniform(0.5, 2, 6))
    f = lasso_fit(Problem(X, rng.standard_normal(6), S, Lasso()))
    j = f.state.j_star
    assert f.sigma2 == pytest.approx(X[:, j] @ S @ X[:, j], rel=1e-14)


def test_permutation_and_scale_invariance():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((10, 6))
    y = rng.standard_normal(10)
    base = lasso_pvalue(Problem(X, y, np.eye(10), Lasso())).p_value
    perm = rng.permutation(6)
    assert lasso_pvalue(Problem(X[:, perm], y, np.eye(10), Lasso())).p_value == pytest.approx(base, abs=1e-12)
    scaled = lasso_pvalue(Problem(X, 4.0 * y, 16.0 * np.eye(10), Lasso())).p_value
    assert scaled == pytest.approx(base, abs=1e-12)


def test_mean_map_identity_covariance():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((8, 4))
    f = lasso_fit(Problem(X, rng.standard_normal(8), np.eye(8), Lasso()))
    b0 = rng.standard_normal(4)
    j, s = f.state.j_star, f.state.s_star
    assert f.mean_at(b0) == pytest.approx(s * X[:, j] @ X @ b0, rel=1e-12)


def test_p_near_one_when_lambda_near_v_minus():
    # two nearly tied orthogonal columns
    f = lasso_fit(Problem(np.eye(2), np.array([1.0 + 1e-6, 1.0]), np.eye(2), Lasso()))
    assert f.pvalue().p_value > 1 - 1e-5
