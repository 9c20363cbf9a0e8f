"""Group lasso frontend.

The maximizer lives on the sphere of the winning group ``g*``.  The tangent
space is taken inside the row space of ``X_{g*}`` (directions in its null
space leave the process unchanged), so its dimension is ``r* - 1`` with
``r* = rank(X_{g*})`` and ``det(Lambda + zI) = z^{r* - 1}``.  The pivot is
then a ratio of chi distribution probabilities.

Truncation limits use the angle formulas: for each competitor ``g`` with
``a = X_g'y - lambda1 C_g`` and ``b = C_g``, ``theta`` is the angle between
``a`` and ``b`` and ``sin psi = (||b|| / w_g) sin theta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import chi

from .errors import InputError
from .fit import FrontendFit
from .fractional import dual_bounds
from .model import (
    GroupActive,
    GroupLasso,
    KnotCertificate,
    Problem,
    apply_null_projection,
    check_tie,
    conditional_quantities,
    validate_problem,
)
from .pivot import PivotInputs, PivotResult, _log_diff_exp, survival_pivot

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class GroupState:
    g_star: int
    lambda1: float
    r_star: int
    V_eta: np.ndarray
    c_vec: np.ndarray
    sigma2: float
    score: np.ndarray
    mean_direction: np.ndarray
    fallback_groups: tuple = ()


def _prepare(p: Problem) -> Problem:
    if not isinstance(p.penalty, GroupLasso):
        raise InputError("penalty: expected a group lasso penalty")
    return apply_null_projection(validate_problem(p))


def group_knot(p: Problem):
    """First knot ``max_g ||X_g'y|| / w_g`` with its maximizer and tangent basis.

    Returns
    -------
    (KnotCertificate, GroupState)
    """
    p = _prepare(p)
    pen = p.penalty
    X = np.asarray(p.X, dtype=float)
    score = X.T @ p.y
    k = check_tie(pen.group_norms(score) / pen.weights, "lambda1")
    g = pen.groups[k]
    sg = score[g]
    lam = float(np.linalg.norm(sg) / pen.weights[k])
    eta = np.zeros(X.shape[1])
    eta[g] = sg / (pen.weights[k] * np.linalg.norm(sg))

    # row space of X_g*, then the complement of X_g*'y inside it
    _, sv, Vt = linalg.svd(X[:, g], full_matrices=False)
    r = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    R = Vt[:r].T
    coord = R.T @ sg
    Qfull, _ = linalg.qr(coord[:, None], mode="full")
    basis = np.zeros((X.shape[1], max(r - 1, 0)))
    basis[g] = R @ Qfull[:, 1:]

    cq = conditional_quantities(X, p.Sigma, eta, basis)
    cert = KnotCertificate(lam, eta, GroupActive(k, r), r - 1, basis)
    state = GroupState(k, lam, r, basis, cq.c, cq.sigma2, score, cq.mean_direction)
    return cert, state


def _angle_limits(a, b, w):
    """Contributions ``(v+, v-)`` of one competitor group, or ``None``."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if nb > 0:
        along = float(a @ b) / nb
        perp = math.sqrt(max(na * na - along * along, 0.0))
    else:
        along, perp = na, 0.0
    theta = math.atan2(perp, along)
    s = nb / w * math.sin(theta)
    if abs(s) > 1.0:
        return None
    psi = (math.asin(s), math.pi - math.asin(s))
    with np.errstate(divide="ignore", invalid="ignore"):
        ws = [na * math.cos(ps) / np.float64(w - nb * math.cos(theta - ps)) for ps in psi]
    ws = [float(v) if np.isfinite(v) else math.copysign(math.inf, v) for v in ws]
    if nb >= w:
        return min(ws), max(ws)
    return max(ws), math.inf


def group_v_bounds_closed(state: GroupState, p: Problem):
    """``V- = max(0, max_g v+)`` and ``V+ = min_g v-`` over ``g != g*``.

    Groups whose angle equation has no real solution are handed to the dual
    route restricted to that group; their indices are returned in the
    ``fallback_groups`` attribute of a new state via :func:`group_fit`.
    """
    vm, vp, _ = _closed_bounds(state, p)
    return vm, vp


def _closed_bounds(state: GroupState, p: Problem):
    pen = p.penalty
    a_full = state.score - state.lambda1 * state.c_vec
    vm, vp = 0.0, math.inf
    fallback = []
    for k, (g, w) in enumerate(zip(pen.groups, pen.weights)):
        if k == state.g_star:
            continue
        res = _angle_limits(a_full[g], state.c_vec[g], w)
        if res is None:
            fallback.append(k)
            single = GroupLasso((np.arange(len(g)),), np.array([w]))
            lo, hi = dual_bounds(a_full[g], state.c_vec[g], single, inside=state.lambda1)
            res = (lo.value, hi.value)
        vm = max(vm, res[0])
        vp = min(vp, res[1])
    if fallback:
        warnings.warn(f"angle equation has no real root for groups {fallback}; used the dual route",
                      RuntimeWarning, stacklevel=3)
    return vm, vp, tuple(fallback)


def chi_ratio_pvalue(inputs: PivotInputs, r_star: int) -> float:
    """Closed form ``P(chi_r in [l1, V+]) / P(chi_r in [V-, V+])`` in units of sigma."""
    s = inputs.sigma
    lo, l1, hi = inputs.v_minus / s, inputs.lambda1 / s, inputs.v_plus / s
    if l1 <= lo:
        return 1.0
    if l1 >= hi:
        return 0.0
    dist = chi(r_star)
    top = float(dist.logsf(hi)) if math.isfinite(hi) else -math.inf
    num = _log_diff_exp(float(dist.logsf(l1)), top)
    den = _log_diff_exp(float(dist.logsf(max(lo, 0.0))), top)
    return min(1.0, math.exp(num - den))


def group_fit(p: Problem) -> FrontendFit:
    p = _prepare(p)
    cert, state = group_knot(p)
    vm, vp, fb = _closed_bounds(state, p)
    if fb:
        state = GroupState(**{**state.__dict__, "fallback_groups": fb})
    inputs = PivotInputs(state.lambda1, vm, vp, state.sigma2, 0.0, (0.0,) * (state.r_star - 1))
    X = np.asarray(p.X, dtype=float)
    mean_dir = state.mean_direction

    def mean_map(beta0):
        return mean_dir @ (X @ np.asarray(beta0, dtype=float))

    return FrontendFit(cert, inputs, state, mean_map)


def group_pvalue(p: Problem) -> PivotResult:
    """Kac-Rice p-value for the group lasso global null."""
    return survival_pivot(group_fit(p).inputs)
