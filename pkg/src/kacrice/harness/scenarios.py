"""Simulation scenarios for the three penalty families.

Every design is a fixed function of the scenario's ``design_seed``; only the
noise changes across replicates.  ``-desk`` variants shrink the dimensions
of the large cases so a full study runs in seconds.  The diabetes design is
not shipped; a synthetic surrogate of the same shape with a hand-set
correlation pattern stands in and is flagged with ``surrogate=True``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.stats import t as tdist

from ..errors import InputError, UnknownScenario
from ..model import GroupLasso, IdentityOp, Lasso, MaskOp, MatMulOp, Nuclear, Problem

NOISE_KINDS = ("gaussian", "heavy")


# ---------------------------------------------------------------------------
# design recipes


def compound_symmetric(rng, n, p, rho=0.5):
    """Rows i.i.d. N(0, (1 - rho) I + rho 11')."""
    return np.sqrt(1 - rho) * rng.standard_normal((n, p)) + np.sqrt(rho) * rng.standard_normal((n, 1))


def unit_columns(X):
    return X / np.linalg.norm(X, axis=0)


# approximate pairwise correlations of the ten diabetes predictors
_DIABETES_CORR = {
    (0, 1): 0.17, (0, 2): 0.19, (0, 3): 0.34, (0, 4): 0.26, (0, 5): 0.22, (0, 6): -0.08,
    (0, 7): 0.20, (0, 8): 0.27, (0, 9): 0.30, (1, 2): 0.09, (1, 3): 0.24, (1, 6): -0.38,
    (1, 7): 0.33, (1, 8): 0.15, (1, 9): 0.21, (2, 3): 0.40, (2, 4): 0.25, (2, 5): 0.26,
    (2, 6): -0.37, (2, 7): 0.41, (2, 8): 0.45, (2, 9): 0.39, (3, 4): 0.24, (3, 5): 0.19,
    (3, 6): -0.18, (3, 7): 0.26, (3, 8): 0.39, (3, 9): 0.39, (4, 5): 0.90, (4, 6): 0.05,
    (4, 7): 0.54, (4, 8): 0.52, (4, 9): 0.33, (5, 6): -0.20, (5, 7): 0.66, (5, 8): 0.32,
    (5, 9): 0.29, (6, 7): -0.74, (6, 8): -0.40, (6, 9): -0.27, (7, 8): 0.62, (7, 9): 0.42,
    (8, 9): 0.46,
}


@lru_cache(maxsize=None)
def diabetes_surrogate() -> np.ndarray:
    """Fixed 442 x 10 synthetic design: centered, unit-norm columns."""
    R = np.eye(10)
    for (i, j), r in _DIABETES_CORR.items():
        R[i, j] = R[j, i] = r
    w, Q = np.linalg.eigh(R)
    R = (Q * np.maximum(w, 1e-3)) @ Q.T
    L = np.linalg.cholesky(R / np.sqrt(np.outer(np.diag(R), np.diag(R))))
    X = np.random.default_rng(442).standard_normal((442, 10)) @ L.T
    X -= X.mean(axis=0)
    X = unit_columns(X)
    X.setflags(write=False)
    return X


def _nested_design(rng, n, sets, big, small):
    """``sets`` pairs of groups; each small group lies in the span of its big group."""
    blocks, labels = [], []
    for s in range(sets):
        A = rng.standard_normal((n, big))
        B = A @ rng.standard_normal((big, small))
        blocks += [A, B]
        labels += [2 * s] * big + [2 * s + 1] * small
    return unit_columns(np.hstack(blocks)), np.array(labels)


# ---------------------------------------------------------------------------
# scenario type


@dataclass(frozen=True)
class Scenario:
    """One simulation setup.

    Attributes
    ----------
    id : str
    family : {"lasso", "group", "nuclear"}
    builder : callable
        ``builder(rng) -> (X_or_operator, penalty)``; called once with a
        generator seeded by ``design_seed``.
    noise : {"gaussian", "heavy"}
        ``heavy`` is an equal mix of a standardized t(5) and a centered
        Exp(1), rescaled to unit variance.
    beta0 : callable or None
        ``beta0(shape) -> array``; ``None`` means the global null.
    reps, seed : int
        Default replicate count and noise seed.
    """

    id: str
    family: str
    builder: Callable = field(repr=False, compare=False)
    noise: str = "gaussian"
    beta0: Callable | None = field(default=None, repr=False, compare=False)
    reps: int = 1000
    seed: int = 0
    design_seed: int = 0
    scale: str = "desk"
    surrogate: bool = False

    def __post_init__(self):
        if self.noise not in NOISE_KINDS:
            raise InputError(f"noise: expected one of {NOISE_KINDS}, got {self.noise!r}")

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def design(self):
        return _build(self.id, self.builder, self.design_seed)

    def coef_shape(self):
        X, pen = self.design()
        return pen.shape if isinstance(pen, Nuclear) else (np.shape(X)[1],)

    def true_beta(self):
        shape = self.coef_shape()
        return np.zeros(shape) if self.beta0 is None else np.asarray(self.beta0(shape), dtype=float)

    def mean_response(self):
        X, pen = self.design()
        b = self.true_beta()
        return X.apply(b) if isinstance(pen, Nuclear) else X @ b

    def draw_noise(self, rng, shape):
        if self.noise == "gaussian":
            return rng.standard_normal(shape)
        t = tdist.rvs(5, size=shape, random_state=rng) / np.sqrt(5 / 3)
        e = rng.exponential(1.0, size=shape) - 1.0
        return (t + e) / np.sqrt(2.0)

    def draw(self, rng) -> Problem:
        X, pen = self.design()
        mean = self.mean_response()
        y = mean + self.draw_noise(rng, mean.shape)
        if isinstance(X, MaskOp):
            y = np.where(X.mask, y, 0.0)
        return Problem(X, y, 1.0, pen)


_DESIGNS: dict = {}


def _build(key, builder, seed):
    k = (key, seed)
    if k not in _DESIGNS:
        X, pen = builder(np.random.default_rng(seed))
        if isinstance(X, np.ndarray):
            X.setflags(write=False)
        _DESIGNS[k] = (X, pen)
    return _DESIGNS[k]


# ---------------------------------------------------------------------------
# catalog


def _lasso(X):
    return lambda rng: (np.array(X, dtype=float), Lasso())


def _lasso_cs(n, p):
    return lambda rng: (unit_columns(compound_symmetric(rng, n, p)), Lasso())


def _lasso_lowtri(n):
    return lambda rng: (np.tril(np.ones((n, n))), Lasso())


def _group_cs(n, p, size):
    def build(rng):
        X = unit_columns(compound_symmetric(rng, n, p))
        return X, GroupLasso.from_labels(np.repeat(np.arange(p // size), size))
    return build


def _group_small(rng):
    base = np.array([[1.0, 2.0, 0.5, -1.0], [0.0, 1.0, 2.0, 1.0], [1.0, -1.0, 1.0, 2.0]])
    X = base + 0.1 * rng.standard_normal(base.shape)
    return X, GroupLasso(([0, 1], [2, 3]), np.array([np.sqrt(2.0), 0.1]))


def _group_diabetes1(rng):
    labels = np.repeat(np.arange(4), [4, 2, 3, 1])
    w = np.sqrt([4.0, 2.0, 3.0, 1.0]) * np.array([1.0, 1.3, 0.8, 1.1])
    return diabetes_surrogate().copy(), GroupLasso.from_labels(labels, w)


def _group_diabetes2(rng):
    w = 1.0 + 0.2 * rng.uniform(size=10)
    return diabetes_surrogate().copy(), GroupLasso.from_labels(np.arange(10), w)


def _group_nested(n, sets, big, small, w_big, w_small):
    def build(rng):
        X, labels = _nested_design(rng, n, sets, big, small)
        w = np.where(np.arange(2 * sets) % 2 == 0, w_big, w_small)
        return X, GroupLasso.from_labels(labels, w)
    return build


def _pca(n, p):
    return lambda rng: (IdentityOp(), Nuclear((n, p)))


def _mask_random(n, p, frac):
    def build(rng):
        mask = rng.uniform(size=(n, p)) < frac
        return MaskOp(mask), Nuclear((n, p))
    return build


def _mask_pattern(n, p):
    def build(rng):
        i, j = np.indices((n, p))
        # staircase plus a diagonal band: every row and column observed
        mask = (j <= (i * p) // n + 1) | ((i + 2 * j) % 3 == 0)
        return MaskOp(mask), Nuclear((n, p))
    return build


def _rrr(n, p, q):
    return lambda rng: (MatMulOp(compound_symmetric(rng, n, p)), Nuclear((p, q)))


def _one_sparse(size=3.0):
    def beta(shape):
        b = np.zeros(shape)
        b.flat[0] = size
        return b
    return beta


def _catalog():
    S = Scenario
    out = [
        # lasso
        S("lasso-small", "lasso", _lasso([[1, 2], [3, 4], [5, 6]]), reps=2000, seed=101),
        S("lasso-fat", "lasso", _lasso_cs(100, 10000), reps=2000, seed=102, scale="full"),
        S("lasso-fat-desk", "lasso", _lasso_cs(20, 1000), reps=2000, seed=103),
        S("lasso-tall", "lasso", _lasso_cs(10000, 100), reps=2000, seed=104, scale="full"),
        S("lasso-tall-desk", "lasso", _lasso_cs(1000, 20), reps=2000, seed=105),
        S("lasso-lowtri", "lasso", _lasso_lowtri(500), reps=2000, seed=106, scale="full"),
        S("lasso-lowtri-desk", "lasso", _lasso_lowtri(50), reps=2000, seed=107),
        S("lasso-diabetes", "lasso", lambda rng: (diabetes_surrogate().copy(), Lasso()),
          reps=2000, seed=108, surrogate=True),
        S("lasso-tall-alt", "lasso", _lasso_cs(1000, 20), beta0=_one_sparse(3.0),
          reps=2000, seed=109, design_seed=0),
        # group lasso
        S("group-small", "group", _group_small, reps=1000, seed=201),
        S("group-fat", "group", _group_cs(100, 10000, 10), seed=202, scale="full"),
        S("group-fat-desk", "group", _group_cs(20, 200, 10), seed=203),
        S("group-tall", "group", _group_cs(10000, 100, 10), seed=204, scale="full"),
        S("group-tall-desk", "group", _group_cs(400, 40, 10), seed=205),
        S("group-square", "group", _group_cs(100, 100, 10), seed=206, scale="full"),
        S("group-square-desk", "group", _group_cs(30, 30, 10), seed=207),
        S("group-diabetes-1", "group", _group_diabetes1, seed=208, surrogate=True),
        S("group-diabetes-2", "group", _group_diabetes2, seed=209, surrogate=True),
        S("group-nested-1", "group", _group_nested(100, 1, 8, 2, np.sqrt(8) * 0.7, np.sqrt(2) * 1.5),
          seed=210, scale="full"),
        S("group-nested-1-desk", "group", _group_nested(30, 1, 8, 2, np.sqrt(8) * 0.7, np.sqrt(2) * 1.5),
          seed=211),
        S("group-nested-2", "group", _group_nested(100, 1, 8, 2, np.sqrt(8) * 1.5, np.sqrt(2) * 0.7),
          seed=212, scale="full"),
        S("group-nested-2-desk", "group", _group_nested(30, 1, 8, 2, np.sqrt(8) * 1.5, np.sqrt(2) * 0.7),
          seed=213),
        S("group-nested-3", "group", _group_nested(100, 2, 4, 2, 2.0, np.sqrt(2)), seed=214, scale="full"),
        S("group-nested-3-desk", "group", _group_nested(30, 2, 4, 2, 2.0, np.sqrt(2)), seed=215),
        S("group-nested-4", "group", _group_nested(100, 20, 4, 2, 2.0, np.sqrt(2)), seed=216, scale="full"),
        S("group-nested-4-desk", "group", _group_nested(30, 6, 4, 2, 2.0, np.sqrt(2)), seed=217),
        # nuclear norm
        S("pca-2x2", "nuclear", _pca(2, 2), seed=301),
        S("pca-3x4", "nuclear", _pca(3, 4), seed=302),
        S("pca-50x50", "nuclear", _pca(50, 50), seed=303, scale="full"),
        S("pca-10x10-desk", "nuclear", _pca(10, 10), seed=304),
        S("pca-100x20", "nuclear", _pca(100, 20), seed=305, scale="full"),
        S("pca-20x4-desk", "nuclear", _pca(20, 4), seed=306),
        S("pca-30x1000", "nuclear", _pca(30, 1000), seed=307, scale="full"),
        S("pca-6x200-desk", "nuclear", _pca(6, 200), seed=308),
        S("pca-30x5", "nuclear", _pca(30, 5), seed=309),
        S("pca-1000x1000", "nuclear", _pca(1000, 1000), seed=310, scale="full"),
        S("pca-40x40-desk", "nuclear", _pca(40, 40), seed=311),
        S("mc-10x5-random", "nuclear", _mask_random(10, 5, 0.5), seed=321),
        S("mc-100x30-random", "nuclear", _mask_random(100, 30, 0.2), seed=322, scale="full"),
        S("mc-20x6-random-desk", "nuclear", _mask_random(20, 6, 0.2), seed=323, design_seed=3),
        S("mc-10x5-pattern", "nuclear", _mask_pattern(10, 5), seed=324),
        S("mc-20x10-pattern", "nuclear", _mask_pattern(20, 10), seed=325),
        S("mc-200x10-random", "nuclear", _mask_random(200, 10, 0.1), seed=326, scale="full"),
        S("mc-40x10-random-desk", "nuclear", _mask_random(40, 10, 0.1), seed=327, design_seed=5),
        S("rrr", "nuclear", _rrr(100, 10, 5), seed=331, scale="full"),
        S("rrr-desk", "nuclear", _rrr(50, 10, 5), seed=332),
    ]
    return {s.id: s for s in out}


CATALOG = _catalog()

LASSO_DESK = ("lasso-small", "lasso-fat-desk", "lasso-tall-desk", "lasso-lowtri-desk", "lasso-diabetes")
GROUP_DESK = (
    "group-small", "group-fat-desk", "group-tall-desk", "group-square-desk", "group-diabetes-1",
    "group-diabetes-2", "group-nested-1-desk", "group-nested-2-desk", "group-nested-3-desk",
    "group-nested-4-desk",
)
PCA_DESK = ("pca-2x2", "pca-3x4", "pca-10x10-desk", "pca-20x4-desk", "pca-6x200-desk", "pca-30x5",
            "pca-40x40-desk")
MC_DESK = ("mc-10x5-random", "mc-20x6-random-desk", "mc-10x5-pattern", "mc-20x10-pattern",
           "mc-40x10-random-desk")
NUCLEAR_DESK = PCA_DESK + MC_DESK + ("rrr-desk",)


def scenario_catalog():
    """All scenarios, full and desk scale."""
    return list(CATALOG.values())


def get_scenario(name: str, **overrides) -> Scenario:
    try:
        s = CATALOG[name]
    except KeyError:
        raise UnknownScenario(f"scenario: unknown id {name!r}") from None
    return s.with_(**overrides) if overrides else s
