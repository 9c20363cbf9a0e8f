"""Kac-Rice pivot: truncated, determinant-weighted Gaussian survival function.

With ``phi_{mu,s}`` the normal density and ``Lambda`` with eigenvalues
``eigs`` the pivot is

    S = M[lambda1, V+] / M[V-, V+],
    M[a, b] = int_a^b det(Lambda + z I) phi_{mu,s}(z) dz.

All integrals are computed in the log domain.  Without eigenvalues the
Gaussian mass is evaluated from ``log_ndtr``/``erf`` differences; otherwise
the log-integrand is concave, so its mode and a 50-nat truncation window
are located first and adaptive Gauss-Kronrod quadrature runs on that window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize
from scipy.special import erf, log_ndtr

from .errors import DomainError, InvalidPivotInputs, NegativeFactor, NonMonotone, NumericalError

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_WINDOW_NATS = 50.0
_ORDER_RTOL = 1e-9
# V- often comes from an iterative solver and can sit exactly on -min(eigs)
EIG_SIGN_RTOL = 1e-8


@dataclass(frozen=True)
class PivotInputs:
    """Everything the pivot needs.

    Parameters
    ----------
    lambda1 : float
        Observed maximum of the process.
    v_minus, v_plus : float
        Truncation limits; may be ``-inf``/``inf``.
    sigma2 : float
        Variance of the modified process at the maximizer.
    mu : float
        Mean of the modified process at the maximizer (0 under the null).
    lambda_eigs : tuple of float
        Eigenvalues of ``Lambda``; empty means the determinant is 1.
    """

    lambda1: float
    v_minus: float
    v_plus: float
    sigma2: float
    mu: float = 0.0
    lambda_eigs: tuple = field(default=())

    def __post_init__(self):
        eigs = tuple(float(e) for e in np.ravel(self.lambda_eigs))
        object.__setattr__(self, "lambda_eigs", eigs)
        for name in ("lambda1", "v_minus", "v_plus", "sigma2", "mu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        lam, vm, vp = self.lambda1, self.v_minus, self.v_plus
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidPivotInputs(f"sigma2: must be positive and finite, got {self.sigma2}")
        if not math.isfinite(lam) or not math.isfinite(self.mu):
            raise InvalidPivotInputs("lambda1, mu: must be finite")
        if math.isnan(vm) or math.isnan(vp) or vm == math.inf or vp == -math.inf:
            raise InvalidPivotInputs(f"v_minus, v_plus: invalid bounds ({vm}, {vp})")
        tol = _ORDER_RTOL * (1.0 + abs(lam))
        if vm > lam + tol or lam > vp + tol:
            raise InvalidPivotInputs(f"ordering: need v_minus <= lambda1 <= v_plus, got {vm}, {lam}, {vp}")
        # snap tiny ordering violations from rounding onto the boundary
        if vm > lam:
            object.__setattr__(self, "v_minus", lam)
        if vp < lam:
            object.__setattr__(self, "v_plus", lam)
        if eigs:
            vm = self.v_minus
            scale = 1.0 + abs(vm) + max(abs(e) for e in eigs) if math.isfinite(vm) else math.inf
            if not math.isfinite(vm) or min(eigs) + vm < -EIG_SIGN_RTOL * scale:
                raise NegativeFactor(
                    f"lambda_eigs: det(Lambda + zI) changes sign on [{vm}, {self.v_plus}]"
                )

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class PivotResult:
    """p-value with the log numerator/denominator it was formed from."""

    p_value: float
    log_numerator: float
    log_denominator: float
    quadrature_error: float = 0.0


def log_det_poly(eigs, z):
    """``sum_i log(eig_i + z)``; zero for an empty list.

    Factors down to ``-1e-12 (1 + |z|)`` are treated as exact zeros.
    """
    eigs = np.asarray(eigs, dtype=float).ravel()
    z = np.asarray(z, dtype=float)
    if eigs.size == 0:
        return np.zeros_like(z)[()] if z.ndim else 0.0
    fac = eigs + z[..., None]
    tol = -1e-12 * (1.0 + np.abs(z))[..., None]
    if np.any(fac < tol):
        raise NegativeFactor(f"log_det_poly: negative factor {fac.min():g} at z={z}")
    with np.errstate(divide="ignore"):
        out = np.log(np.maximum(fac, 0.0)).sum(axis=-1)
    return out[()] if out.ndim else float(out)


def _log_diff_exp(la, lb):
    """log(exp(la) - exp(lb)) for la >= lb."""
    if lb == -math.inf:
        return la
    if lb >= la:
        return -math.inf
    d = lb - la
    return la + (math.log(-math.expm1(d)) if d > -math.log(2) else math.log1p(-math.exp(d)))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _log_gauss_mass(ta, tb):
    """log(Phi(tb) - Phi(ta)) without cancellation in either tail."""
    if tb <= ta:
        return -math.inf
    if ta > 0:
        return _log_diff_exp(float(log_ndtr(-ta)), float(log_ndtr(-tb)))
    if tb < 0:
        return _log_diff_exp(float(log_ndtr(tb)), float(log_ndtr(ta)))
    r2 = math.sqrt(2.0)
    return math.log(0.5 * (float(erf(tb / r2)) - float(erf(ta / r2))))


class _LogIntegrand:
    """Concave log-density ``log det(Lambda + mu + s t) - t^2/2`` in standard units.

    Repeated eigenvalues are collapsed into multiplicities.
    """

    def __init__(self, eigs, mu, sigma):
        vals, mult = np.unique(np.asarray(eigs, dtype=float) + mu, return_counts=True)
        self.terms = list(zip(vals.tolist(), mult.astype(float).tolist()))
        self.sigma = sigma

    def __call__(self, t):
        s = self.sigma
        out = -0.5 * t * t - _LOG_SQRT_2PI
        for v, m in self.terms:
            f = v + s * t
            if f <= 0:
                return -math.inf
            out += m * math.log(f)
        return out

    def slope(self, t):
        s = self.sigma
        out = -t
        for v, m in self.terms:
            f = v + s * t
            if f <= 0:
                return math.inf
            out += m * s / f
        return out


def _mode(g, ta, tb):
    if g.slope(ta) <= 0:
        return ta
    if math.isfinite(tb) and g.slope(tb) >= 0:
        return tb
    # the unconstrained mode lies below max(t : t^2 = k + ...) so expand
    hi = max(ta, 0.0) + 1.0
    while g.slope(hi) > 0:
        hi = ta + 2.0 * (hi - ta)
    if math.isfinite(tb):
        hi = min(hi, tb)
    lo = ta
    # the slope is +inf at a root of the determinant; nudge inside
    if not math.isfinite(g.slope(lo)):
        lo = ta + 1e-14 * (1.0 + abs(ta))
        while not math.isfinite(g.slope(lo)):
            lo = ta + 2 * (lo - ta)
        if g.slope(lo) <= 0:
            return lo
    return optimize.brentq(g.slope, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def _drop_point(g, inside, bound, level):
    """Point between ``inside`` and ``bound`` where ``g`` falls to ``level``."""
    if math.isfinite(bound):
        if g(bound) >= level:
            return bound
        outside = bound
    else:
        step = 1.0 if bound > inside else -1.0
        outside = inside + step
        while g(outside) >= level:
            step *= 2.0
            outside = inside + step
    a, b = inside, outside
    for _ in range(200):
        mid = 0.5 * (a + b)
        if g(mid) >= level:
            a = mid
        else:
            b = mid
        if abs(b - a) <= 1e-6 * (1.0 + abs(a)):
            break
    return b


def _log_m_narrow(eigs, mu, sigma, a, b):
    """Fixed Gauss-Legendre rule for short windows, in the original units.

    Standardizing and CDF differences both cancel when ``b - a`` is tiny;
    here the integrand is nearly polynomial, so the rule is exact to rounding.
    Returns None when the window is not short enough.
    """
    w = b - a
    if not (math.isfinite(w) and w > 0):
        return None
    tmax = max(abs(a - mu), abs(b - mu)) / sigma
    if w / sigma * (1.0 + tmax) >= 0.5:
        return None
    f0 = np.asarray(eigs, dtype=float) + a
    if np.any(f0 < -1e-12 * (1.0 + abs(a))) or np.sum(w / (np.maximum(f0, 0.0) + w)) > 16:
        return None
    z = a + 0.5 * w * (1.0 + _GL_NODES)
    t = (z - mu) / sigma
    logs = log_det_poly(eigs, z) - 0.5 * t * t - _LOG_SQRT_2PI + np.log(_GL_WEIGHTS)
    top = logs.max()
    if top == -math.inf:
        return -math.inf
    return math.log(w) - math.log(2.0 * sigma) + top + math.log(np.exp(logs - top).sum())


def _log_m(eigs, mu, sigma, a, b):
    if not b > a:
        return -math.inf, 0.0
    out = _log_m_narrow(eigs, mu, sigma, a, b)
    if out is not None:
        return out, 0.0
    return _log_m_standard(eigs, mu, sigma, (a - mu) / sigma, (b - mu) / sigma)


def _log_m_standard(eigs, mu, sigma, ta, tb):
    """log M over standardized limits; returns (value, relative error estimate)."""
    if not tb > ta:
        return -math.inf, 0.0
    if len(eigs) == 0:
        return _log_gauss_mass(ta, tb), 0.0
    g = _LogIntegrand(eigs, mu, sigma)
    m = _mode(g, ta, tb)
    ref = g(m)
    if ref == -math.inf:
        return -math.inf, 0.0
    level = ref - _WINDOW_NATS
    L = _drop_point(g, m, ta, level) if m > ta else ta
    R = _drop_point(g, m, tb, level) if m < tb else tb
    if not R > L:
        return -math.inf, 0.0

    def f(t):
        return math.exp(g(t) - ref)

    pts = [m] if L < m < R else None
    val, err = integrate.quad(f, L, R, points=pts, epsabs=0.0, epsrel=1e-12, limit=500)
    if not val > 0:
        return -math.inf, 0.0
    return ref + math.log(val), err / val


def m_integral(inputs: PivotInputs, a: float, b: float) -> float:
    """Log of ``M[a, b]`` for the density described by ``inputs``."""
    if a > b:
        raise DomainError(f"m_integral: a={a} exceeds b={b}")
    # standardizing gives det(Lambda + mu + s t) phi(t) dt
    return _log_m(inputs.lambda_eigs, inputs.mu, inputs.sigma, a, b)[0]


def survival_pivot(inputs: PivotInputs) -> PivotResult:
    """Kac-Rice pivot ``M[lambda1, V+] / M[V-, V+]``."""
    lam, vm, vp = inputs.lambda1, inputs.v_minus, inputs.v_plus
    s, mu, eigs = inputs.sigma, inputs.mu, inputs.lambda_eigs
    log_den, e_den = _log_m(eigs, mu, s, vm, vp)
    if lam <= vm:
        return PivotResult(1.0, log_den, log_den, e_den)
    if lam >= vp:
        return PivotResult(0.0, -math.inf, log_den, e_den)
    log_num, e_num = _log_m(eigs, mu, s, lam, vp)
    if log_den == -math.inf:
        raise NumericalError("survival_pivot: denominator underflows; inputs are degenerate")
    if log_num == -math.inf:
        return PivotResult(0.0, log_num, log_den, e_den)
    p = math.exp(min(log_num - log_den, 0.0))
    return PivotResult(min(max(p, 0.0), 1.0), log_num, log_den, e_num + e_den)


def selection_interval(inputs: PivotInputs, alpha: float = 0.1):
    """Interval ``{delta : alpha/2 < S(delta) < 1 - alpha/2}`` for the mean.

    ``S(delta)`` is the pivot evaluated with ``mu = delta``; it increases in
    ``delta``, so each endpoint is found by bracketing and root finding to
    an absolute tolerance of ``1e-8 * sigma``.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha: must lie in (0, 1), got {alpha}")
    s = inputs.sigma

    def S(delta):
        return survival_pivot(replace(inputs, mu=delta)).p_value

    return (
        _solve_level(S, inputs.lambda1, s, alpha / 2),
        _solve_level(S, inputs.lambda1, s, 1 - alpha / 2),
    )


def _solve_level(S, center, scale, target):
    lo, hi = center, center
    s_lo = s_hi = S(center)
    step = scale
    # expand a bracket, recording values to detect non-monotone behaviour
    for _ in range(80):
        if s_lo < target:
            break
        nxt = lo - step
        val = S(nxt)
        if val > s_lo + 1e-10:
            raise NonMonotone(f"selection_interval: S({nxt:g})={val:g} > S({lo:g})={s_lo:g}")
        hi, s_hi, lo, s_lo = lo, s_lo, nxt, val
        step *= 2
    else:
        raise NonMonotone("selection_interval: could not bracket the lower level")
    step = scale
    for _ in range(80):
        if s_hi > target:
            break
        nxt = hi + step
        val = S(nxt)
        if val < s_hi - 1e-10:
            raise NonMonotone(f"selection_interval: S({nxt:g})={val:g} < S({hi:g})={s_hi:g}")
        lo, s_lo, hi, s_hi = hi, s_hi, nxt, val
        step *= 2
    else:
        raise NonMonotone("selection_interval: could not bracket the upper level")
    if s_lo >= target:
        return lo
    return optimize.brentq(lambda d: S(d) - target, lo, hi, xtol=1e-8 * scale, rtol=1e-15)
