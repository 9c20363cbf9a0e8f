"""Monte Carlo studies: p-value samples, baselines, uniformity and coverage."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import EmptySample, KacRiceError, TieAtMax
from ..fit import FrontendFit
from ..group import group_fit
from ..lasso import lasso_fit
from ..nuclear import nuclear_fit
from .scenarios import Scenario

MAX_TIE_REDRAWS = 100

_FITTERS = {"lasso": lasso_fit, "group": group_fit, "nuclear": nuclear_fit}


def fit_problem(family, problem) -> FrontendFit:
    return _FITTERS[family](problem)


def cov_test_baseline(lambda1, v_minus, sigma2):
    """Exp(1) approximation ``exp(-lambda1 (lambda1 - V-) / sigma2)``."""
    lam = np.asarray(lambda1, dtype=float)
    vm = np.asarray(v_minus, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isneginf(vm), 0.0, np.exp(-lam * (lam - vm) / np.asarray(sigma2, dtype=float)))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def ks_uniform(pvals):
    """One-sample Kolmogorov-Smirnov test against Unif(0, 1).

    Returns
    -------
    (statistic, pvalue)
        The p-value is the asymptotic Kolmogorov approximation.
    """
    x = np.asarray(pvals, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("pvals: empty sample")
    res = stats.kstest(x, "uniform", method="asymp")
    return float(res.statistic), float(res.pvalue)


def ecdf_table(pvals, grid=None):
    """Empirical CDF of ``pvals`` on a grid of levels (default 0.01 .. 1)."""
    x = np.sort(np.asarray(pvals, dtype=float))
    grid = np.linspace(0.01, 1.0, 100) if grid is None else np.asarray(grid, dtype=float)
    return grid, np.searchsorted(x, grid, side="right") / max(len(x), 1)


@dataclass
class StudyResult:
    """Per-replicate outputs of a study.

    ``lo``, ``hi``, ``mu`` and ``covered`` are filled by coverage experiments.
    """

    scenario_id: str
    p_values: np.ndarray
    lambda1: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray
    sigma2: np.ndarray
    ties: int = 0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    mu: np.ndarray | None = None
    covered: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def baseline(self):
        return cov_test_baseline(self.lambda1, self.v_minus, self.sigma2)

    @property
    def ks(self):
        return ks_uniform(self.p_values)

    @property
    def coverage(self):
        return None if self.covered is None else float(np.mean(self.covered))

    def ecdf(self, grid=None):
        return ecdf_table(self.p_values, grid)

    def rows(self):
        """CSV rows ``replicate, p_value, lambda1, v_minus, v_plus, sigma2``."""
        for i in range(len(self.p_values)):
            yield (i, self.p_values[i], self.lambda1[i], self.v_minus[i], self.v_plus[i], self.sigma2[i])


def pooled(results, scenario_id="pooled") -> StudyResult:
    cat = lambda name: np.concatenate([getattr(r, name) for r in results])  # noqa: E731
    opt = lambda name: None if any(getattr(r, name) is None for r in results) else cat(name)  # noqa: E731
    return StudyResult(
        scenario_id, cat("p_values"), cat("lambda1"), cat("v_minus"), cat("v_plus"), cat("sigma2"),
        sum(r.ties for r in results), opt("lo"), opt("hi"), opt("mu"), opt("covered"),
    )


def replicate_streams(seed, reps):
    """Independent counter-based generators, one per replicate."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(reps)]


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get("KACRICE_THREADS", "1") or 1)
    return max(1, int(threads))


def _one(scenario: Scenario, rng, index, alpha):
    ties = 0
    for _ in range(MAX_TIE_REDRAWS):
        prob = scenario.draw(rng)
        try:
            fit = fit_problem(scenario.family, prob)
            break
        except TieAtMax:
            ties += 1
    else:
        raise TieAtMax(f"replicate {index}: {MAX_TIE_REDRAWS} consecutive ties")
    try:
        p = fit.pvalue().p_value
        row = [p, fit.lambda1, fit.v_minus, fit.v_plus, fit.sigma2]
        if alpha is not None:
            lo, hi = fit.interval(alpha)
            mu = fit.mean_at(scenario.true_beta())
            row += [lo, hi, mu]
    except KacRiceError as err:
        raise type(err)(f"replicate {index}: {err}") from err
    return row, ties


def _run(scenario, reps, seed, threads, alpha):
    reps = scenario.reps if reps is None else int(reps)
    seed = scenario.seed if seed is None else seed
    streams = replicate_streams(seed, reps)
    scenario.design()  # build the shared design before fanning out
    work = lambda i: _one(scenario, streams[i], i, alpha)  # noqa: E731
    nthreads = _thread_count(threads)
    if nthreads == 1:
        out = [work(i) for i in range(reps)]
    else:
        with ThreadPoolExecutor(nthreads) as ex:
            out = list(ex.map(work, range(reps)))
    rows = np.array([r for r, _ in out], dtype=float).reshape(reps, -1)
    ties = sum(t for _, t in out)
    res = StudyResult(scenario.id, rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4], ties)
    if alpha is not None:
        res.lo, res.hi, res.mu = rows[:, 5], rows[:, 6], rows[:, 7]
        res.covered = (res.lo <= res.mu) & (res.mu <= res.hi)
        res.extra["alpha"] = alpha
    return res


def sample_pvalues(scenario: Scenario, reps=None, seed=None, threads=None) -> StudyResult:
    """Draw ``reps`` responses, fit each and collect the Kac-Rice p-values.

    Replicates hitting a tie at the maximum are redrawn from the same stream
    and counted in ``ties``.  Results are ordered by replicate, independent
    of the thread count.
    """
    return _run(scenario, reps, seed, threads, None)


def coverage_experiment(scenario: Scenario, alpha=0.1, reps=None, seed=None, threads=None) -> StudyResult:
    """Selection intervals and the realized mean at the maximizer per replicate."""
    if not 0 < alpha < 1:
        from ..errors import DomainError

        raise DomainError(f"alpha: must lie in (0, 1), got {alpha}")
    return _run(scenario, reps, seed, threads, alpha)


def binomial_se(p, n):
    return math.sqrt(p * (1 - p) / n)
