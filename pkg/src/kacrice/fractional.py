"""Truncation limits as generalized linear-fractional programs.

With ``a = X'y - lambda1 c`` the limits are

    V- = sup { z'a / (1 - z'c) : z in K, z'c < 1 },
    V+ = inf { z'a / (1 - z'c) : z in K, z'c > 1 }.

Two independent routes are provided.

``method="admm"``
    The Charnes-Cooper substitution ``u = z w`` turns each program into a
    conic one over the epigraph ``{(u, w) : P(u) <= w}``:
    ``V- = max a'u`` subject to ``w - u'c = 1`` and
    ``V+ = -max a'u`` subject to ``w - u'c = -1``.  These are solved by
    over-relaxed ADMM alternating between the hyperplane and the epigraph.
    Every epigraph iterate rescaled onto the hyperplane is feasible, so its
    value bounds the optimum from one side; ``h`` below vanishing a tolerance
    further in bounds it from the other.  That bracket is the stopping test
    when the optimal face is unbounded and the residuals stall.

``method="dual"``
    ``h(t) = Q(a + t c) - t`` is convex, nonnegative and vanishes exactly on
    ``[V-, V+]``.  Newton steps on ``h`` from the left (``t = 0``) and from the
    right reach the two endpoints; each step needs one dual-norm maximizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MaxIterations
from .model import PenaltySpec

INFEASIBLE_RTOL = 1e-9


@dataclass(frozen=True)
class FractionalProgram:
    """``sense="max"`` gives ``V-``, ``sense="min"`` gives ``V+``."""

    a: np.ndarray
    c: np.ndarray
    penalty: PenaltySpec
    sense: str = "max"

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise InputError(f"sense: expected 'max' or 'min', got {self.sense!r}")
        a = np.asarray(self.a, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        if a.shape != c.shape:
            raise InputError(f"c: shape {c.shape} differs from objective shape {a.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)

    @classmethod
    def pair(cls, a, c, penalty):
        return cls(a, c, penalty, "max"), cls(a, c, penalty, "min")


@dataclass(frozen=True)
class VSolution:
    """Optimal value with solver diagnostics; ``history`` holds ADMM residuals."""

    value: float
    iterations: int
    residual: float
    status: str
    history: tuple = field(default=(), repr=False, compare=False)


def epigraph_project(penalty: PenaltySpec, u, w):
    """Euclidean projection of ``(u, w)`` onto ``{(u, w) : P(u) <= w}``.

    ``P`` is a weighted sum of block norms (entries, groups or singular
    values).  The projection shrinks every block by ``lam * weight`` and
    raises ``w`` by ``lam`` where ``lam`` solves a piecewise-linear equation.
    """
    u = np.asarray(u, dtype=float)
    w = float(w)
    norms, omega = penalty.block_norms(u)
    if float(omega @ norms) <= w:
        return u.copy(), w
    ratio = norms / omega
    order = np.argsort(-ratio)
    r = ratio[order]
    s1 = np.cumsum((omega * norms)[order])
    s2 = np.cumsum((omega**2)[order])
    lam = max(0.0, -w)
    for k in range(len(r)):
        cand = (s1[k] - w) / (s2[k] + 1.0)
        nxt = r[k + 1] if k + 1 < len(r) else 0.0
        if cand >= nxt and cand < r[k]:
            lam = cand
            break
    if lam + w <= 0:
        return np.zeros_like(u), 0.0
    return penalty.shrink(u, lam), w + lam


# ---------------------------------------------------------------------------
# dual route


def _newton_endpoint(a, c, penalty, t, side, tol, max_iter, inside=None):
    na, nc = np.linalg.norm(a), np.linalg.norm(c)
    gap = math.inf
    for it in range(1, max_iter + 1):
        q, z = penalty.dual_argmax(a + t * c)
        gap = q - t
        scale = 1.0 + na + abs(t) * nc
        za, zc = float(z @ a), float(z @ c)
        den = 1.0 - zc
        # a maximizer with z'c at 1 up to rounding means t is already in the zero set
        if gap <= tol * scale or side * den >= -1e-9 * (1.0 + abs(zc)):
            return VSolution(t, it, max(gap, 0.0), "optimal")
        t_new = za / den
        if inside is not None:
            t_new = min(t_new, inside) if side < 0 else max(t_new, inside)
        # iterates are monotone: increasing from the left, decreasing from the right
        if side * (t_new - t) >= 0 or abs(t_new - t) <= 1e-15 * scale:
            return VSolution(t if side * (t_new - t) >= 0 else t_new, it, max(gap, 0.0), "optimal")
        t = t_new
    raise MaxIterations("dual route did not converge", value=t, residual=gap, iterations=max_iter)


def dual_bounds(a, c, penalty, tol: float = 1e-12, max_iter: int = 500, inside=None):
    """Both limits by Newton iteration on ``h(t) = Q(a + t c) - t``.

    ``inside`` is an optional point known to lie in ``[V-, V+]`` (for the
    frontends, ``lambda1``); iterates are never moved past it.
    """
    a = np.asarray(a, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    lo = _newton_endpoint(a, c, penalty, 0.0, -1, tol, max_iter, inside)
    qc = penalty.dual_norm(c)
    if qc <= 1.0 + INFEASIBLE_RTOL:
        hi = VSolution(math.inf, 0, 0.0, "infeasible")
    else:
        t0 = max(penalty.dual_norm(a) / (qc - 1.0), lo.value)
        if inside is not None:
            t0 = max(t0, inside)
        hi = _newton_endpoint(a, c, penalty, t0, +1, tol, max_iter, inside)
    return lo, hi


# ---------------------------------------------------------------------------
# ADMM route


def _admm(prog: FractionalProgram, tol, max_iter, rho=1.0, relax=1.6):
    a, c, pen = prog.a, prog.c, prog.penalty
    beta = 1.0 if prog.sense == "max" else -1.0
    na = np.linalg.norm(a)
    if na == 0:
        return VSolution(0.0, 0, 0.0, "optimal")
    m = a.size
    ah = np.concatenate([a / na, [0.0]])
    d = np.concatenate([-c, [1.0]])
    dd = float(d @ d)

    def proj_h(v):
        return v - ((d @ v - beta) / dd) * d

    def proj_e(v):
        u, w = epigraph_project(pen, v[:m], v[m])
        out = np.empty(m + 1)
        out[:m] = u
        out[m] = w
        return out

    def feasible_value(z):
        s = d @ z
        # rescaling by an s at rounding level would amplify the epigraph's rounding
        if s * beta <= 1e-8 * np.linalg.norm(z):
            return None
        return float(ah @ z) * beta / s

    nc = np.linalg.norm(c)

    def gap_closed(val):
        # t is primal feasible, so the optimum lies on its inner side; if h
        # also vanishes one tolerance inward, the optimum is bracketed
        t = beta * val * na
        t_in = t + beta * tol * max(1.0, abs(t))
        return pen.dual_norm(a + t_in * c) - t_in <= 1e-12 * (1.0 + na + abs(t_in) * nc)

    z = np.zeros(m + 1)
    z[m] = max(beta, 0.0)
    y = np.zeros(m + 1)
    prev_val = None
    r_norm = s_norm = math.inf
    hist = []
    for it in range(1, max_iter + 1):
        x = proj_h(z - y + ah / rho)
        xh = relax * x + (1 - relax) * z
        z_old = z
        z = proj_e(xh + y)
        y = y + xh - z
        r_norm = np.linalg.norm(x - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        hist.append(r_norm)
        val = feasible_value(z)
        scale = max(np.linalg.norm(x), np.linalg.norm(z), 1.0)
        eps_p = tol * scale
        eps_d = tol * max(rho * np.linalg.norm(y), 1.0)
        if r_norm <= eps_p and s_norm <= eps_d and val is not None:
            if prev_val is not None and abs(val - prev_val) <= tol * max(1.0, abs(val)):
                return VSolution(beta * val * na, it, r_norm / scale, "optimal", tuple(hist))
        prev_val = val
        if it % 10 == 0 and val is not None and gap_closed(val):
            return VSolution(beta * val * na, it, r_norm / scale, "optimal", tuple(hist))
        if it % 50 == 0:
            if r_norm > 10 * s_norm:
                rho *= 2.0
                y /= 2.0
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                y *= 2.0
    raise MaxIterations(
        "ADMM did not reach the requested tolerance",
        value=None if prev_val is None else beta * prev_val * na,
        residual=r_norm,
        iterations=max_iter,
    )


def solve_v(prog: FractionalProgram, tol: float = 1e-6, method: str = "admm",
            max_iter: int = 50000, full_output: bool = False):
    """Optimal value of one fractional program.

    Parameters
    ----------
    prog : FractionalProgram
    tol : float
        Relative tolerance on residuals (ADMM) or on ``h`` (dual route).
    method : {"admm", "dual"}
    full_output : bool
        Return a ``VSolution`` with iteration count and residual.

    Returns
    -------
    float or VSolution
        ``V-`` for ``sense="max"``, ``V+`` for ``sense="min"``; ``V+`` is
        ``inf`` when no ``z`` in ``K`` has ``z'c > 1``.
    """
    if prog.sense == "min" and prog.penalty.dual_norm(prog.c) <= 1.0 + INFEASIBLE_RTOL:
        sol = VSolution(math.inf, 0, 0.0, "infeasible")
    elif method == "dual":
        lo, hi = dual_bounds(prog.a, prog.c, prog.penalty, tol=min(tol, 1e-12))
        sol = lo if prog.sense == "max" else hi
    elif method == "admm":
        sol = _admm(prog, tol, max_iter)
    else:
        raise InputError(f"method: expected 'admm' or 'dual', got {method!r}")
    return sol if full_output else sol.value
