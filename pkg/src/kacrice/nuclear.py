"""Nuclear-norm frontend (PCA, matrix completion, reduced rank regression).

With ``M = X'(y) = U D V'`` the maximizer is ``U_1 V_1'`` and the tangent
space is spanned by ``U_i V_1'`` and ``U_1 V_j'`` for ``i, j >= 2``.  The
operator enters only through the normal map ``N = X'X`` on ``n x p``
matrices, so no ``np x np`` matrix is formed.  For ``Sigma = s0 I``:

* ``eta_res = eta - T coef`` where ``coef`` is the least squares fit of
  ``X(eta)`` on the images ``X(T_l)`` of the tangent elements;
* ``sigma2 = s0 ||X(eta_res)||^2`` and ``C = X'X(eta_res) / ||X(eta_res)||^2``;
* with ``c11 = U_1'C V_1``, ``Cbar = U_{-1}' C V_{-1}`` and ``D_{-1}`` the
  trailing singular values,
  ``G = [[c11 I, Cbar], [Cbar', c11 I]]`` and
  ``H = [[d1 (1 - c11) I, D_{-1} - d1 Cbar], [., d1 (1 - c11) I]]``.

For PCA ``C = eta``, ``G = I`` and the eigenvalues of ``G^{-1} H`` are
``+-d_j`` padded with zeros.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, InputError, SingularG, TieAtMax
from .fit import FrontendFit
from .fractional import FractionalProgram, dual_bounds, solve_v
from .model import (
    IdentityOp,
    KnotCertificate,
    MaskOp,
    MatMulOp,
    Nuclear,
    NuclearActive,
    Problem,
    validate_problem,
)
from .model import TIE_RTOL
from .pivot import PivotInputs, PivotResult, survival_pivot

log = logging.getLogger(__name__)

ShapeMismatch = DimensionMismatch

# relative cut on the singular values of the tangent images; directions an
# empty mask row or column annihilates come out near 1e-9 from rounding
NULL_RTOL = 1e-6


@dataclass(frozen=True)
class NuclearState:
    M: np.ndarray
    U: np.ndarray
    d: np.ndarray
    V: np.ndarray
    eta_res: np.ndarray
    C_mat: np.ndarray
    sigma2: float
    W: np.ndarray | None = None
    G: np.ndarray | None = None
    H: np.ndarray | None = None
    lambda_eigs: np.ndarray | None = None

    @property
    def lambda1(self):
        return float(self.d[0])

    @property
    def d2(self):
        return float(self.d[1]) if self.d.size > 1 else 0.0


def adjoint_apply(op, y, shape=None):
    """``X'(y)`` for an identity, mask or matrix-multiplication operator."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeMismatch(f"y: expected a matrix, got ndim={y.ndim}")
    if isinstance(op, MaskOp) and op.mask.shape != y.shape:
        raise ShapeMismatch(f"y: shape {y.shape} differs from mask {op.mask.shape}")
    if isinstance(op, MatMulOp) and op.X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"y: {y.shape[0]} rows but design has {op.X.shape[0]}")
    if shape is not None and op.out_shape(shape) != y.shape:
        raise ShapeMismatch(f"y: expected shape {op.out_shape(shape)}, got {y.shape}")
    return op.adjoint(y)


def _tangent_elements(U, V):
    """Orthonormal tangent matrices, stacked as ``(n + p - 2, n, p)``."""
    u1, v1 = U[:, 0], V[:, 0]
    rows = [np.outer(U[:, i], v1) for i in range(1, U.shape[1])]
    cols = [np.outer(u1, V[:, j]) for j in range(1, V.shape[1])]
    n, p = U.shape[0], V.shape[0]
    if not rows and not cols:
        return np.zeros((0, n, p))
    return np.array(rows + cols).reshape(-1, n, p)


def _tangent_coords(R, U, V):
    """``<T_l, R>`` for every tangent element."""
    return np.concatenate([U[:, 1:].T @ R @ V[:, 0], U[:, 0] @ R @ V[:, 1:]])


def nuclear_knot(p: Problem):
    """First knot ``||X'(y)||_op`` with maximizer ``U_1 V_1'``.

    Returns
    -------
    (KnotCertificate, NuclearState)
    """
    if not isinstance(p.penalty, Nuclear):
        raise InputError("penalty: expected a nuclear-norm penalty")
    validate_problem(p)
    op = p.X
    M = adjoint_apply(op, p.y, p.penalty.shape)
    U, d, Vt = linalg.svd(M, full_matrices=True)
    V = Vt.T
    if d[0] <= 0:
        raise TieAtMax("lambda1: X'(y) is zero")
    if d.size > 1 and d[0] - d[1] < TIE_RTOL * d[0]:
        raise TieAtMax(f"lambda1: leading singular values {d[0]:.17g} and {d[1]:.17g} tie")
    eta = np.outer(U[:, 0], V[:, 0])

    # least squares fit of X(eta) on the images X(T_l) of the tangent elements
    Ts = _tangent_elements(U, V)
    s0 = float(p.Sigma)
    W = None
    if isinstance(op, IdentityOp) or not len(Ts):
        eta_res = eta
        resid = op.apply(eta)
    else:
        A = np.array([op.apply(T).ravel() for T in Ts]).T
        b = op.apply(eta).ravel()
        Ua, sa, Vat = linalg.svd(A, full_matrices=False)
        keep = sa > NULL_RTOL * sa[0] if sa.size and sa[0] > 0 else np.zeros(sa.size, dtype=bool)
        coef = Vat[keep].T @ ((Ua[:, keep].T @ b) / sa[keep])
        eta_res = eta - np.tensordot(coef, Ts, axes=1)
        resid = op.apply(eta_res)
        # tangent directions the operator annihilates carry no randomness
        if not keep.all():
            W = Vat[keep].T
    quad = float(np.sum(resid * resid))
    if not quad > 0:
        raise InputError("X: the operator annihilates the maximizer; variance is zero")
    C = op.adjoint(resid) / quad
    state = NuclearState(M, U, d, V, eta_res, C, s0 * quad, W)
    n, q = M.shape

    def basis():
        B = _tangent_elements(U, V).reshape(len(Ts), -1).T
        return B if W is None else B @ W

    dim = n + q - 2 if W is None else W.shape[1]
    cert = KnotCertificate(float(d[0]), eta, NuclearActive(U, d, V), dim, basis)
    return cert, state


def build_G_H(state: NuclearState):
    """Blocks ``G`` and ``H`` and the eigenvalues of ``G^{-1} H``.

    When the operator annihilates part of the tangent space both forms are
    restricted to the complement, mirroring the row-space restriction used
    for the group lasso.
    """
    U, V, d, C = state.U, state.V, state.d, state.C_mat
    n, p = C.shape
    d1 = d[0]
    c11 = float(U[:, 0] @ C @ V[:, 0])
    Cbar = U[:, 1:].T @ C @ V[:, 1:]
    Dm = np.zeros((n - 1, p - 1))
    k = min(n, p) - 1
    Dm[np.arange(k), np.arange(k)] = d[1:k + 1]
    G = np.block([[c11 * np.eye(n - 1), Cbar], [Cbar.T, c11 * np.eye(p - 1)]])
    off = Dm - d1 * Cbar
    diag = d1 * (1.0 - c11)
    H = np.block([[diag * np.eye(n - 1), off], [off.T, diag * np.eye(p - 1)]])
    if state.W is not None:
        G = state.W.T @ G @ state.W
        H = state.W.T @ H @ state.W
    if G.size == 0:
        return G, H, np.zeros(0)
    if np.linalg.cond(G) > 1e12:
        raise SingularG(f"G: condition number {np.linalg.cond(G):.3g} exceeds 1e12")
    try:
        eigs = linalg.eigh(H, G, eigvals_only=True)
    except linalg.LinAlgError:
        # G indefinite: fall back to the nonsymmetric solve
        eigs = np.real(linalg.eigvals(linalg.solve(G, H)))
    return G, H, np.sort(eigs)


def nuclear_v_bounds(state: NuclearState, p: Problem, method: str = "dual"):
    """``(d2, inf)`` for PCA; the fractional programs otherwise."""
    if isinstance(p.X, IdentityOp):
        return state.d2, math.inf
    a = state.M - state.lambda1 * state.C_mat
    if method == "dual":
        lo, hi = dual_bounds(a, state.C_mat, p.penalty, inside=state.lambda1)
        vm, vp = lo.value, hi.value
    else:
        lo_p, hi_p = FractionalProgram.pair(a, state.C_mat, p.penalty)
        vm, vp = solve_v(lo_p, method=method), solve_v(hi_p, method=method)
    log.debug("nuclear V-=%.10g d2=%.10g diff=%.3g", vm, state.d2, vm - state.d2)
    return vm, vp


def nuclear_fit(p: Problem, method: str = "dual") -> FrontendFit:
    cert, state = nuclear_knot(p)
    G, H, eigs = build_G_H(state)
    state = NuclearState(**{**state.__dict__, "G": G, "H": H, "lambda_eigs": eigs})
    vm, vp = nuclear_v_bounds(state, p, method)
    inputs = PivotInputs(state.lambda1, vm, vp, state.sigma2, 0.0, tuple(eigs))
    op, eta_res = p.X, state.eta_res

    def mean_map(beta0):
        return float(np.sum(eta_res * op.normal(np.asarray(beta0, dtype=float))))

    return FrontendFit(cert, inputs, state, mean_map)


def nuclear_pvalue(p: Problem) -> PivotResult:
    """Kac-Rice p-value for the nuclear-norm global null."""
    return survival_pivot(nuclear_fit(p).inputs)
