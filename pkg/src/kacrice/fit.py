"""Frontend result container shared by the three penalty pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .model import KnotCertificate
from .pivot import PivotInputs, PivotResult, selection_interval, survival_pivot


@dataclass(frozen=True)
class FrontendFit:
    """Certificate, pivot inputs and the map ``beta0 -> mu`` for one problem.

    Attributes
    ----------
    certificate : KnotCertificate
    inputs : PivotInputs
        Null inputs (``mu = 0``).
    state : object
        Penalty specific intermediate quantities.
    mean_map : callable
        Returns the mean of the modified process at the maximizer for a
        given true coefficient ``beta0``.
    """

    certificate: KnotCertificate
    inputs: PivotInputs
    state: Any
    mean_map: Callable[[np.ndarray], float] = field(repr=False)

    @property
    def lambda1(self):
        return self.inputs.lambda1

    @property
    def v_minus(self):
        return self.inputs.v_minus

    @property
    def v_plus(self):
        return self.inputs.v_plus

    @property
    def sigma2(self):
        return self.inputs.sigma2

    def pvalue(self, mu: float = 0.0) -> PivotResult:
        inp = self.inputs if mu == 0.0 else replace(self.inputs, mu=mu)
        return survival_pivot(inp)

    def interval(self, alpha: float = 0.1):
        return selection_interval(self.inputs, alpha)

    def mean_at(self, beta0) -> float:
        return float(self.mean_map(beta0))
