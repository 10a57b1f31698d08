"""Covariate selection from per-covariate p-values.

The default rule is the Benjamini-Yekutieli step-up procedure, which keeps the
false discovery rate below ``q`` under arbitrary dependence between the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anovatest import TestResult, test_covariate
from .core import validate_inputs
from .errors import EmptyInput, InvalidLevel, InvalidPValue


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Selected covariates (0-based indices) and everything needed to audit them.

    ``cutoffs[i]`` is the threshold applied to the ``i``-th smallest p-value and
    ``k`` the number of hypotheses rejected.
    """

    p_values: np.ndarray
    order: np.ndarray
    cutoffs: np.ndarray
    k: int
    selected: tuple
    adjusted: np.ndarray
    q: float
    method: str = "by"
    tests: tuple = ()

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "q": self.q,
            "p_values": self.p_values.tolist(),
            "adjusted_p_values": self.adjusted.tolist(),
            "order": self.order.tolist(),
            "cutoffs": self.cutoffs.tolist(),
            "k": self.k,
            "selected": list(self.selected),
        }


def _check_level(q: float, what: str = "q") -> float:
    q = float(q)
    if not 0.0 < q < 1.0:
        raise InvalidLevel(f"{what} must lie in (0, 1), got {q}")
    return q


def _check_pvalues(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise EmptyInput("no p-values")
    if not np.all(np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InvalidPValue(f"p-values must lie in [0, 1]: {p}")
    return p


def harmonic(d: int) -> float:
    return float(np.sum(1.0 / np.arange(1, d + 1)))


def by_cutoffs(d: int, q: float) -> np.ndarray:
    """Step-up thresholds ``(i/d) q / H_d`` for ranks ``i = 1..d``."""
    return np.arange(1, d + 1) / d * q / harmonic(d)


def bonferroni_cutoffs(d: int, alpha: float) -> np.ndarray:
    return np.full(d, alpha / d)


def by_adjusted_pvalues(p_values) -> np.ndarray:
    """BY adjusted p-values ``min(1, min_{j >= i} d H_d p_(j) / j)`` in input order."""
    p = _check_pvalues(p_values)
    d = p.size
    order = np.argsort(p, kind="stable")
    scaled = d * harmonic(d) / np.arange(1, d + 1) * p[order]
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(d)
    out[order] = np.minimum(stepped, 1.0)
    return out


def by_fdr_select(p_values, q: float = 0.05) -> SelectionResult:
    """Benjamini-Yekutieli step-up selection at FDR level ``q``.

    ``k`` is the largest rank whose sorted p-value is under its cutoff and
    the ``k`` smallest p-values are selected.
    """
    q = _check_level(q)
    p = _check_pvalues(p_values)
    d = p.size
    order = np.argsort(p, kind="stable")
    cutoffs = by_cutoffs(d, q)
    passing = np.flatnonzero(p[order] <= cutoffs)
    k = int(passing[-1] + 1) if passing.size else 0
    return SelectionResult(
        p_values=p,
        order=order,
        cutoffs=cutoffs,
        k=k,
        selected=tuple(sorted(int(i) for i in order[:k])),
        adjusted=by_adjusted_pvalues(p),
        q=q,
        method="by",
    )


def bonferroni_select(p_values, alpha: float = 0.05) -> SelectionResult:
    """Select every covariate with ``p <= alpha / d``."""
    alpha = _check_level(alpha, "alpha")
    p = _check_pvalues(p_values)
    d = p.size
    order = np.argsort(p, kind="stable")
    chosen = tuple(int(i) for i in np.flatnonzero(p <= alpha / d))
    return SelectionResult(
        p_values=p,
        order=order,
        cutoffs=bonferroni_cutoffs(d, alpha),
        k=len(chosen),
        selected=chosen,
        adjusted=np.minimum(d * p, 1.0),
        q=alpha,
        method="bonferroni",
    )


def select_variables(series, panel, p: int = 1, q: float = 0.05, cfg=None, k_n=None, method: str = "by") -> SelectionResult:
    """Test every covariate and select with the BY (or Bonferroni) rule.

    Parameters
    ----------
    cfg : KernelConfig or SplineConfig, optional
        Null-model estimator settings, see :func:`test_covariate`.
    method : {"by", "bonferroni"}
    """
    if method not in ("by", "bonferroni"):
        raise ValueError(f"unknown selection method {method!r}")
    _check_level(q)
    series, panel = validate_inputs(series, panel, p)
    tests: list[TestResult] = [
        test_covariate(series, panel, ell, p, cfg, k_n) for ell in range(panel.d)
    ]
    pv = [t.p_value for t in tests]
    base = by_fdr_select(pv, q) if method == "by" else bonferroni_select(pv, q)
    return SelectionResult(
        p_values=base.p_values,
        order=base.order,
        cutoffs=base.cutoffs,
        k=base.k,
        selected=base.selected,
        adjusted=base.adjusted,
        q=base.q,
        method=base.method,
        tests=tuple(tests),
    )
