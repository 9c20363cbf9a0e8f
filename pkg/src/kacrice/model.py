"""Problem data model, validation and preprocessing.

The regularized problem is ``min 1/2 ||y - X b||^2 + lam * P(b)`` with ``P``
the support function of a convex set ``C``.  The global null is tested
through the process ``f(eta) = eta' X' y`` over the unit ball ``K`` of
``P``; its maximum is the first knot ``lambda1 = Q(X' y)`` where ``Q`` is
the dual norm.

Covariances are either a dense symmetric matrix or a positive scalar
``s`` standing for ``s * I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence, Union

import numpy as np
from scipy import linalg

from .errors import BadGroups, DimensionMismatch, InputError, NotPSD, TieAtMax

Covariance = Union[float, np.ndarray]

TIE_RTOL = 1e-9
PINV_RTOL = 1e-10


# ---------------------------------------------------------------------------
# penalties


@dataclass(frozen=True)
class Lasso:
    """``P(b) = ||b||_1``; dual norm ``||x||_inf``."""

    kind = "lasso"

    def value(self, u):
        return float(np.abs(u).sum())

    def dual_norm(self, x):
        return float(np.abs(x).max()) if np.size(x) else 0.0

    def dual_argmax(self, x):
        x = np.asarray(x, dtype=float)
        j = int(np.argmax(np.abs(x)))
        z = np.zeros_like(x)
        z[j] = 1.0 if x[j] >= 0 else -1.0
        return abs(float(x[j])), z

    def block_norms(self, u):
        """Per-atom norms and weights used by the epigraph projection."""
        return np.abs(u), np.ones(np.size(u))

    def shrink(self, u, lam):
        return np.sign(u) * np.maximum(np.abs(u) - lam, 0.0)


@dataclass(frozen=True)
class GroupLasso:
    """``P(b) = sum_g w_g ||b_g||_2`` over a partition of the coordinates."""

    groups: tuple
    weights: np.ndarray

    kind = "group"

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=int).ravel() for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())

    @classmethod
    def from_labels(cls, labels, weights=None):
        """Build from a per-coordinate label vector; default weights sqrt(|g|)."""
        labels = np.asarray(labels)
        uniq = list(dict.fromkeys(labels.tolist()))
        groups = tuple(np.flatnonzero(labels == g) for g in uniq)
        if weights is None:
            weights = [np.sqrt(len(g)) for g in groups]
        return cls(groups, np.asarray(weights, dtype=float))

    @property
    def size(self):
        return int(sum(len(g) for g in self.groups))

    def group_norms(self, x):
        return np.array([np.linalg.norm(x[g]) for g in self.groups])

    def value(self, u):
        return float(self.weights @ self.group_norms(u))

    def dual_norm(self, x):
        return float(np.max(self.group_norms(x) / self.weights))

    def dual_argmax(self, x):
        x = np.asarray(x, dtype=float)
        norms = self.group_norms(x)
        k = int(np.argmax(norms / self.weights))
        z = np.zeros_like(x)
        g = self.groups[k]
        if norms[k] > 0:
            z[g] = x[g] / (self.weights[k] * norms[k])
        else:
            z[g[0]] = 1.0 / self.weights[k]
        return float(norms[k] / self.weights[k]), z

    def block_norms(self, u):
        return self.group_norms(u), self.weights

    def shrink(self, u, lam):
        out = np.zeros_like(u)
        for g, w in zip(self.groups, self.weights):
            nrm = np.linalg.norm(u[g])
            if nrm > lam * w:
                out[g] = u[g] * (1.0 - lam * w / nrm)
        return out


@dataclass(frozen=True)
class Nuclear:
    """Nuclear norm on ``shape`` matrices; dual norm is the operator norm."""

    shape: tuple

    kind = "nuclear"

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    def _mat(self, u):
        return np.asarray(u, dtype=float).reshape(self.shape)

    def value(self, u):
        return float(linalg.svdvals(self._mat(u)).sum())

    def dual_norm(self, x):
        return float(linalg.svdvals(self._mat(x))[0])

    def dual_argmax(self, x):
        m = self._mat(x)
        U, d, Vt = linalg.svd(m, full_matrices=False)
        z = np.outer(U[:, 0], Vt[0])
        return float(d[0]), z.reshape(np.shape(x))

    def block_norms(self, u):
        d = linalg.svdvals(self._mat(u))
        return d, np.ones_like(d)

    def shrink(self, u, lam):
        U, d, Vt = linalg.svd(self._mat(u), full_matrices=False)
        return ((U * np.maximum(d - lam, 0.0)) @ Vt).reshape(np.shape(u))


PenaltySpec = Union[Lasso, GroupLasso, Nuclear]


# ---------------------------------------------------------------------------
# linear operators for the nuclear-norm problems (coefficients are n x p)


@dataclass(frozen=True)
class IdentityOp:
    kind = "identity"

    def out_shape(self, shape):
        return tuple(shape)

    def apply(self, B):
        return np.asarray(B, dtype=float)

    def adjoint(self, Y):
        return np.asarray(Y, dtype=float)

    def normal(self, B):
        return np.asarray(B, dtype=float)


@dataclass(frozen=True)
class MaskOp:
    """Keeps the entries of an observed index set, zeroes the rest."""

    mask: np.ndarray

    kind = "mask"

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @classmethod
    def from_pairs(cls, pairs, shape):
        mask = np.zeros(shape, dtype=bool)
        for i, j in pairs:
            if not (0 <= i < shape[0] and 0 <= j < shape[1]):
                raise DimensionMismatch(f"mask: index ({i}, {j}) outside shape {tuple(shape)}")
            mask[i, j] = True
        return cls(mask)

    def out_shape(self, shape):
        return tuple(shape)

    def apply(self, B):
        return np.where(self.mask, B, 0.0)

    adjoint = apply
    normal = apply


@dataclass(frozen=True)
class MatMulOp:
    """``B -> X @ B`` for a fixed design ``X`` (reduced rank regression)."""

    X: np.ndarray

    kind = "matmul"

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))

    def out_shape(self, shape):
        return (self.X.shape[0], shape[1])

    def apply(self, B):
        return self.X @ B

    def adjoint(self, Y):
        return self.X.T @ Y

    def normal(self, B):
        return self.X.T @ (self.X @ B)


LinearOp = Union[IdentityOp, MaskOp, MatMulOp]


# ---------------------------------------------------------------------------
# problem and certificate


@dataclass(frozen=True)
class Problem:
    """Design, response, known noise covariance and penalty.

    For the nuclear penalty ``X`` is one of the operator classes above,
    ``y`` has the operator's output shape and ``Sigma`` must be a scalar.
    """

    X: Any
    y: np.ndarray
    Sigma: Covariance
    penalty: PenaltySpec
    cperp_basis: np.ndarray | None = None

    @property
    def is_nuclear(self):
        return isinstance(self.penalty, Nuclear)


@dataclass(frozen=True)
class LassoActive:
    index: int
    sign: int


@dataclass(frozen=True)
class GroupActive:
    group: int
    rank: int


@dataclass(frozen=True)
class NuclearActive:
    U: np.ndarray
    d: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class KnotCertificate:
    """First knot, its maximizer and an orthonormal basis of the tangent space.

    The basis is materialized on first access; for matrix problems it has
    ``n*p`` rows and is rarely needed.
    """

    lambda1: float
    eta_star: np.ndarray
    active: Any
    tangent_dim: int
    _basis: Any = field(repr=False, compare=False, default=None)

    @property
    def tangent_basis(self) -> np.ndarray:
        b = self._basis
        if callable(b):
            b = b()
            object.__setattr__(self, "_basis", b)
        return b


# ---------------------------------------------------------------------------
# covariance helpers


def sigma_apply(Sigma: Covariance, v: np.ndarray) -> np.ndarray:
    if np.ndim(Sigma) == 0:
        return float(Sigma) * v
    return Sigma @ v


def sigma_quad(Sigma: Covariance, u: np.ndarray, v: np.ndarray | None = None) -> float:
    v = u if v is None else v
    return float(u @ sigma_apply(Sigma, v))


@dataclass(frozen=True)
class ConditionalQuantities:
    """Variance, regression vector and mean direction at a critical point.

    ``sigma2`` is the variance of the modified process at ``eta``;
    ``c`` satisfies ``E(f_z | f~_eta) = (z'c) f~_eta``; the mean of
    ``f~_eta`` under ``y ~ N(X b0, Sigma)`` is ``mean_direction @ (X b0)``.
    """

    sigma2: float
    c: np.ndarray
    mean_direction: np.ndarray


def conditional_quantities(X, Sigma, eta, tangent) -> ConditionalQuantities:
    q = X @ eta
    Sq = sigma_apply(Sigma, q)
    if tangent is None or tangent.shape[1] == 0:
        r = Sq
        mean_dir = q
    else:
        B = X @ tangent
        SB = sigma_apply(Sigma, B)
        Ainv = linalg.pinvh(B.T @ SB, atol=0.0, rtol=PINV_RTOL)
        # (I - P) Sigma q with P = Sigma B A^+ B'
        r = Sq - SB @ (Ainv @ (SB.T @ q))
        mean_dir = q - B @ (Ainv @ (SB.T @ q))
    sigma2 = float(q @ r)
    if not sigma2 > 0:
        raise InputError(f"Sigma: conditional variance at the maximizer is {sigma2:g}")
    return ConditionalQuantities(sigma2, X.T @ r / sigma2, mean_dir)


# ---------------------------------------------------------------------------
# validation and preprocessing


def _check_sigma(Sigma, n, allow_matrix=True):
    if np.ndim(Sigma) == 0:
        if not float(Sigma) > 0:
            raise NotPSD(f"Sigma: scalar variance must be positive, got {float(Sigma)}")
        return
    if not allow_matrix:
        raise InputError("Sigma: nuclear-norm problems take a scalar variance")
    S = np.asarray(Sigma, dtype=float)
    if S.shape != (n, n):
        raise DimensionMismatch(f"Sigma: expected shape {(n, n)}, got {S.shape}")
    scale = max(1.0, float(np.abs(S).max()))
    if np.abs(S - S.T).max() > 1e-12 * scale:
        raise NotPSD("Sigma: matrix is not symmetric")
    ev = linalg.eigvalsh(S)
    if ev[0] < -1e-10 * max(abs(ev[-1]), 1e-300):
        raise NotPSD(f"Sigma: smallest eigenvalue {ev[0]:g} is negative")


def _check_groups(pen: GroupLasso, p: int):
    if len(pen.groups) != len(pen.weights):
        raise BadGroups(f"groups: {len(pen.groups)} groups but {len(pen.weights)} weights")
    if len(pen.groups) == 0:
        raise BadGroups("groups: no groups given")
    if np.any(~(pen.weights > 0)):
        raise BadGroups("weights: every group weight must be positive")
    allidx = np.concatenate(pen.groups)
    if np.any(allidx < 0) or np.any(allidx >= p):
        raise BadGroups(f"groups: indices must lie in 0..{p - 1}")
    if len(allidx) != p or len(np.unique(allidx)) != p:
        raise BadGroups(f"groups: must partition the {p} coordinates")


def validate_problem(p: Problem) -> Problem:
    """Check every structural invariant; return the problem unchanged."""
    pen = p.penalty
    if isinstance(pen, Nuclear):
        op = p.X
        if not isinstance(op, (IdentityOp, MaskOp, MatMulOp)):
            raise InputError("X: nuclear problems need an IdentityOp, MaskOp or MatMulOp")
        if len(pen.shape) != 2:
            raise DimensionMismatch(f"shape: expected (n, p), got {pen.shape}")
        if isinstance(op, MaskOp) and op.mask.shape != pen.shape:
            raise DimensionMismatch(f"mask: shape {op.mask.shape} != {pen.shape}")
        if isinstance(op, MatMulOp) and op.X.shape[1] != pen.shape[0]:
            raise DimensionMismatch(f"X: matmul design has {op.X.shape[1]} columns, need {pen.shape[0]}")
        want = op.out_shape(pen.shape)
        if np.shape(p.y) != want:
            raise DimensionMismatch(f"y: expected shape {want}, got {np.shape(p.y)}")
        _check_sigma(p.Sigma, None, allow_matrix=False)
        if p.cperp_basis is not None and np.size(p.cperp_basis):
            raise InputError("cperp_basis: the nuclear norm ball is full dimensional")
        return p

    X = np.asarray(p.X)
    if X.ndim != 2:
        raise DimensionMismatch(f"X: expected a matrix, got ndim={X.ndim}")
    n, q = X.shape
    if np.ndim(p.y) != 1 or len(p.y) != n:
        raise DimensionMismatch(f"y: expected length {n}, got shape {np.shape(p.y)}")
    _check_sigma(p.Sigma, n)
    if isinstance(pen, GroupLasso):
        _check_groups(pen, q)
    elif not isinstance(pen, Lasso):
        raise InputError(f"penalty: unsupported penalty {pen!r}")
    if p.cperp_basis is not None:
        Bc = np.asarray(p.cperp_basis, dtype=float)
        if Bc.ndim != 2 or Bc.shape[0] != q:
            raise DimensionMismatch(f"cperp_basis: expected {q} rows, got shape {Bc.shape}")
        if np.abs(Bc.T @ Bc - np.eye(Bc.shape[1])).max() > 1e-12:
            raise InputError("cperp_basis: columns are not orthonormal")
    return p


def apply_null_projection(p: Problem) -> Problem:
    """Project out ``X C_perp`` from design, response and covariance.

    The result has no ``cperp_basis``; the projector is built from an
    orthonormal basis of the column space of ``X @ cperp_basis``.
    """
    if p.cperp_basis is None or np.size(p.cperp_basis) == 0:
        return p
    X = np.asarray(p.X, dtype=float)
    XC = X @ p.cperp_basis
    U, s, _ = linalg.svd(XC, full_matrices=False)
    tol = 1e-10 * max(np.linalg.norm(X), 1e-300)
    Q = U[:, s > tol]
    if Q.shape[1] == 0:
        return replace(p, cperp_basis=None)

    def resid(A):
        return A - Q @ (Q.T @ A)

    Xt = resid(X)
    yt = resid(np.asarray(p.y, dtype=float))
    if np.ndim(p.Sigma) == 0:
        St = float(p.Sigma) * (np.eye(len(yt)) - Q @ Q.T)
    else:
        St = resid(resid(np.asarray(p.Sigma, dtype=float)).T)
    St = 0.5 * (St + St.T)
    return replace(p, X=Xt, y=yt, Sigma=St, cperp_basis=None)


def check_tie(values: np.ndarray, what: str = "argmax") -> int:
    """Index of the unique maximum of ``values``; raise on a near tie."""
    values = np.asarray(values, dtype=float)
    k = int(np.argmax(values))
    top = values[k]
    if values.size > 1:
        second = np.partition(values, -2)[-2]
        if top - second < TIE_RTOL * (1.0 + abs(top)):
            raise TieAtMax(f"{what}: top two candidates {top:.17g} and {second:.17g} tie")
    elif top <= 0:
        # a single zero candidate has no well-defined maximizer direction
        raise TieAtMax(f"{what}: maximum is zero")
    return k


def lambda_one(p: Problem) -> KnotCertificate:
    """First knot ``Q(X'(I - P_{XC_perp}) y)`` with its maximizer."""
    from . import group, lasso, nuclear

    p = apply_null_projection(p)
    pen = p.penalty
    if isinstance(pen, Lasso):
        return lasso.lasso_knot(p)[0]
    if isinstance(pen, GroupLasso):
        return group.group_knot(p)[0]
    if isinstance(pen, Nuclear):
        return nuclear.nuclear_knot(p)[0]
    raise InputError(f"penalty: unsupported penalty {pen!r}")


def process_value(p: Problem, eta) -> float:
    """``f(eta) = <eta, X'(y)>`` for either problem family."""
    if p.is_nuclear:
        return float(np.sum(eta * p.X.adjoint(p.y)))
    return float(eta @ (np.asarray(p.X).T @ p.y))


__all__: Sequence[str] = [
    "Lasso", "GroupLasso", "Nuclear", "IdentityOp", "MaskOp", "MatMulOp",
    "Problem", "KnotCertificate", "LassoActive", "GroupActive", "NuclearActive",
    "ConditionalQuantities", "conditional_quantities", "sigma_apply", "sigma_quad",
    "validate_problem", "apply_null_projection", "lambda_one", "check_tie",
    "process_value",
]
