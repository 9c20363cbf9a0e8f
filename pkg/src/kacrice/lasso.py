"""Lasso frontend: closed-form knot, truncation limits and pivot.

For the l1 ball the process is maximized at a signed coordinate
``s* e_{j*}``, the tangent space is trivial and ``Lambda`` is the empty
matrix.  Writing ``Theta = X' Sigma X`` and ``rho_k = Theta_{k j*} /
Theta_{j* j*}``, each competitor ``(k, s)`` contributes

    s (X_k - rho_k X_{j*})' y / (1 - s s* rho_k)

to ``V-`` when the denominator is positive and to ``V+`` when negative.
Only the ``j*`` column of ``Theta`` is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .fit import FrontendFit
from .model import (
    KnotCertificate,
    Lasso,
    LassoActive,
    Problem,
    apply_null_projection,
    check_tie,
    conditional_quantities,
    validate_problem,
)
from .pivot import PivotInputs, PivotResult, survival_pivot


@dataclass(frozen=True)
class LassoState:
    """``theta_col`` is column ``j*`` of ``X' Sigma X``."""

    j_star: int
    s_star: int
    lambda1: float
    score: np.ndarray
    theta_col: np.ndarray

    @property
    def theta_jj(self):
        return float(self.theta_col[self.j_star])


def _prepare(p: Problem) -> Problem:
    if not isinstance(p.penalty, Lasso):
        raise InputError("penalty: expected a lasso penalty")
    return apply_null_projection(validate_problem(p))


def lasso_knot(p: Problem):
    """First knot ``||X'y||_inf`` with maximizer ``s* e_{j*}``.

    Returns
    -------
    (KnotCertificate, LassoState)
    """
    p = _prepare(p)
    X = np.asarray(p.X, dtype=float)
    score = X.T @ p.y
    j = check_tie(np.abs(score), "lambda1")
    s = 1 if score[j] >= 0 else -1
    eta = np.zeros(X.shape[1])
    eta[j] = s
    theta_col = X.T @ (p.Sigma * X[:, j] if np.ndim(p.Sigma) == 0 else p.Sigma @ X[:, j])
    lam = float(abs(score[j]))
    cert = KnotCertificate(lam, eta, LassoActive(j, s), 0, np.zeros((X.shape[1], 0)))
    return cert, LassoState(j, s, lam, score, theta_col)


def lasso_v_bounds(state: LassoState, p: Problem | None = None):
    """``(V-, V+)`` from the competitor scan; ``V-`` is at least 0."""
    j, s_star = state.j_star, state.s_star
    rho = state.theta_col / state.theta_jj
    resid = state.score - rho * state.score[j]
    mask = np.ones(len(rho), dtype=bool)
    mask[j] = False
    resid, rho = resid[mask], rho[mask]
    v_minus, v_plus = 0.0, math.inf
    for s in (1.0, -1.0):
        num = s * resid
        den = 1.0 - s * s_star * rho
        pos, neg = den > 0, den < 0
        if pos.any():
            v_minus = max(v_minus, float(np.max(num[pos] / den[pos])))
        if neg.any():
            v_plus = min(v_plus, float(np.min(num[neg] / den[neg])))
    return v_minus, v_plus


def lasso_fit(p: Problem) -> FrontendFit:
    p = _prepare(p)
    cert, state = lasso_knot(p)
    vm, vp = lasso_v_bounds(state, p)
    X = np.asarray(p.X, dtype=float)
    cq = conditional_quantities(X, p.Sigma, cert.eta_star, None)
    inputs = PivotInputs(state.lambda1, vm, vp, cq.sigma2, 0.0, ())
    mean_dir = cq.mean_direction

    def mean_map(beta0):
        return mean_dir @ (X @ np.asarray(beta0, dtype=float))

    return FrontendFit(cert, inputs, state, mean_map)


def lasso_pvalue(p: Problem) -> PivotResult:
    """Kac-Rice p-value for the lasso global null."""
    return survival_pivot(lasso_fit(p).inputs)
