import math

import numpy as np
import pytest

from kacrice import group as group_mod
from kacrice.errors import TieAtMax
from kacrice.fractional import dual_bounds
from kacrice.group import (
    _angle_limits,
    chi_ratio_pvalue,
    group_fit,
    group_knot,
    group_pvalue,
    group_v_bounds_closed,
)
from kacrice.lasso import lasso_fit
from kacrice.model import GroupLasso, Lasso, Problem
from kacrice.pivot import survival_pivot


def random_group_problem(seed, n=None, sizes=None, weights=None):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 4, size=int(rng.integers(2, 5))) if sizes is None else np.asarray(sizes)
    n = int(rng.integers(4, 9)) if n is None else n
    p = int(sizes.sum())
    labels = np.repeat(np.arange(len(sizes)), sizes)
    w = rng.uniform(0.5, 2.0, len(sizes)) if weights is None else weights
    X = rng.standard_normal((n, p))
    return Problem(X, rng.standard_normal(n), np.eye(n), GroupLasso.from_labels(labels, w))


def quadratic_bounds(state, pen):
    """Intersect the sets {t >= 0 : ||a_g + t b_g|| <= w_g t} containing lambda1."""
    a_full = state.score - state.lambda1 * state.c_vec
    lo, hi = 0.0, math.inf
    for k, (g, w) in enumerate(zip(pen.groups, pen.weights)):
        if k == state.g_star:
            continue
        a, b = a_full[g], state.c_vec[g]
        A, B, C = b @ b - w * w, 2 * a @ b, a @ a
        if abs(A) < 1e-14:
            root = -C / B
            lo, hi = (max(lo, root), hi) if B < 0 else (lo, min(hi, root))
            continue
        disc = B * B - 4 * A * C
        r = np.sort(np.roots([A, B, C]).real) if disc >= 0 else None
        if A < 0:
            # outside the roots, t >= 0 part that contains lambda1
            lo = max(lo, r[1])
        else:
            lo, hi = max(lo, r[0]), min(hi, r[1])
    return lo, hi


def test_knot_group_norms():
    X = np.arange(12.0).reshape(3, 4) / 10 + np.eye(3, 4)
    y = np.array([1.0, -0.5, 0.3])
    pen = GroupLasso(([0, 1], [2, 3]), np.array([np.sqrt(2), 0.1]))
    cert, st = group_knot(Problem(X, y, np.eye(3), pen))
    sc = X.T @ y
    vals = [np.linalg.norm(sc[:2]) / np.sqrt(2), np.linalg.norm(sc[2:]) / 0.1]
    assert st.g_star == int(np.argmax(vals))
    assert cert.lambda1 == pytest.approx(max(vals), rel=1e-14)


def test_certificate_invariants():
    for seed in range(20):
        p = random_group_problem(seed)
        cert, st = group_knot(p)
        pen = p.penalty
        g = pen.groups[st.g_star]
        T = cert.tangent_basis
        assert np.allclose(T.T @ T, np.eye(T.shape[1]), atol=1e-12)
        assert np.all(np.abs(T[g].T @ st.score[g]) < 1e-10 * (1 + cert.lambda1))
        assert pen.value(cert.eta_star) == pytest.approx(1.0, abs=1e-10)
        assert cert.eta_star @ st.c_vec == pytest.approx(1.0, abs=1e-10)
        assert cert.eta_star @ st.score == pytest.approx(cert.lambda1, abs=1e-10)


def test_sigma_orthonormal_group_design():
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.standard_normal((10, 6)))
    pen = GroupLasso(([0, 1, 2], [3, 4, 5]), np.array([1.7, 1.7]))
    f = group_fit(Problem(Q, rng.standard_normal(10), np.eye(10), pen))
    assert f.sigma2 == pytest.approx(1 / 1.7**2, rel=1e-12)


def test_sigma_monte_carlo():
    # residual variance of f_eta* after regressing out the tangent derivatives
    rng = np.random.default_rng(4)
    n = 8
    X = rng.standard_normal((n, 5))
    A = rng.standard_normal((n, n))
    S = A @ A.T / n + 0.3 * np.eye(n)
    pen = GroupLasso(([0, 1, 2], [3, 4]), np.array([1.0, 1.3]))
    f = group_fit(Problem(X, rng.standard_normal(n), S, pen))
    eta, T = f.certificate.eta_star, f.certificate.tangent_basis
    N = 400_000
    eps = rng.multivariate_normal(np.zeros(n), S, size=N)
    fe, ft = eps @ X @ eta, eps @ X @ T
    coef = np.linalg.lstsq(ft, fe, rcond=None)[0]
    var = np.var(fe - ft @ coef)
    assert abs(var - f.sigma2) < 3 * f.sigma2 * math.sqrt(2 / N)


def test_singletons_reduce_to_lasso():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((7, 4))
        y = rng.standard_normal(7)
        pen = GroupLasso(tuple([k] for k in range(4)), np.ones(4))
        gf = group_fit(Problem(X, y, np.eye(7), pen))
        lf = lasso_fit(Problem(X, y, np.eye(7), Lasso()))
        assert gf.lambda1 == pytest.approx(lf.lambda1, rel=1e-14)
        assert gf.v_minus == pytest.approx(lf.v_minus, rel=1e-10, abs=1e-12)
        assert gf.pvalue().p_value == pytest.approx(lf.pvalue().p_value, abs=1e-10)


@pytest.mark.parametrize("seed", range(15))
def test_closed_form_matches_quadratic_oracle(seed):
    p = random_group_problem(seed)
    cert, st = group_knot(p)
    vm, vp = group_v_bounds_closed(st, p)
    lo, hi = quadratic_bounds(st, p.penalty)
    assert vm == pytest.approx(lo, rel=1e-9, abs=1e-10)
    assert vp == pytest.approx(hi, rel=1e-9) or (math.isinf(vp) and math.isinf(hi))
    assert vm <= st.lambda1 <= vp


@pytest.mark.parametrize("seed", range(15))
def test_closed_form_matches_dual_route(seed):
    p = random_group_problem(100 + seed)
    cert, st = group_knot(p)
    vm, vp = group_v_bounds_closed(st, p)
    lo, hi = dual_bounds(st.score - st.lambda1 * st.c_vec, st.c_vec, p.penalty)
    assert lo.value == pytest.approx(vm, rel=1e-4, abs=1e-8)
    assert hi.value == pytest.approx(vp, rel=1e-4) or (math.isinf(vp) and math.isinf(hi.value))


def test_single_group():
    p = Problem(np.eye(3), np.array([1.0, 2.0, 0.5]), np.eye(3), GroupLasso(([0, 1, 2],), np.array([1.0])))
    f = group_fit(p)
    assert (f.v_minus, f.v_plus) == (0.0, math.inf)


def test_chi_ratio_equals_quadrature():
    for seed in range(10):
        p = random_group_problem(200 + seed)
        f = group_fit(p)
        r = f.state.r_star
        assert chi_ratio_pvalue(f.inputs, r) == pytest.approx(survival_pivot(f.inputs).p_value, abs=1e-8)


def test_rank_one_group_gaussian_ratio():
    from scipy.stats import norm

    p = Problem(np.eye(3), np.array([3.0, 1.0, 0.5]), np.eye(3),
                GroupLasso(([0], [1, 2]), np.array([1.0, 1.0])))
    f = group_fit(p)
    assert f.state.r_star == 1
    want = norm.sf(f.lambda1 / f.inputs.sigma) / norm.sf(f.v_minus / f.inputs.sigma)
    assert f.pvalue().p_value == pytest.approx(want, rel=1e-10)


def test_rank_deficient_group_uses_rank():
    rng = np.random.default_rng(9)
    n = 3
    X = np.column_stack([rng.standard_normal((n, 5)), rng.standard_normal((n, 2))])
    pen = GroupLasso(([0, 1, 2, 3, 4], [5, 6]), np.array([1.0, 5.0]))
    cert, st = group_knot(Problem(X, rng.standard_normal(n), np.eye(n), pen))
    assert st.g_star == 0 and st.r_star == 3 and cert.tangent_dim == 2


def test_weight_equivariance():
    p = random_group_problem(11)
    f = group_fit(p)
    pen2 = GroupLasso(p.penalty.groups, 3.0 * p.penalty.weights)
    f2 = group_fit(Problem(p.X, p.y, p.Sigma, pen2))
    assert f2.lambda1 == pytest.approx(f.lambda1 / 3.0, rel=1e-13)
    assert f2.pvalue().p_value == pytest.approx(f.pvalue().p_value, abs=1e-12)


def test_tie_across_groups():
    p = Problem(np.eye(4), np.array([1.0, 0.0, 0.0, 1.0]), np.eye(4),
                GroupLasso(([0, 1], [2, 3]), np.ones(2)))
    with pytest.raises(TieAtMax):
        group_knot(p)


def test_angle_limits_no_real_root():
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 3.0])
    assert _angle_limits(a, b, 1.0) is None


def test_fallback_to_dual_route(monkeypatch):
    p = random_group_problem(12)
    want = group_fit(p)
    monkeypatch.setattr(group_mod, "_angle_limits", lambda a, b, w: None)
    with pytest.warns(RuntimeWarning, match="dual route"):
        got = group_fit(p)
    assert got.state.fallback_groups
    assert got.v_minus == pytest.approx(want.v_minus, rel=1e-8, abs=1e-12)
    assert got.v_plus == pytest.approx(want.v_plus, rel=1e-8) or math.isinf(want.v_plus)


def test_pvalue_in_unit_interval():
    for seed in range(30):
        r = group_pvalue(random_group_problem(300 + seed))
        assert 0.0 <= r.p_value <= 1.0
