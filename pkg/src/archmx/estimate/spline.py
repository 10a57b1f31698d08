"""Tensor-product B-spline quasi maximum likelihood estimator.

m(x) = theta' B(x) with B the row-wise Kronecker product of per-covariate
B-spline bases, and (alpha, theta) minimise the Gaussian quasi-likelihood

    (1/n) sum_t eps_t**2 / sigma_t**2 + log sigma_t**2,
    sigma_t**2 = sum_j alpha_j eps_{t-j}**2 + theta' B(X_{t-1}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.optimize import minimize

from ..core import FittedModel, aligned_covariates, lagged_design, resolve_columns, validate_inputs
from ..errors import DimensionMismatch, DimensionTooHigh, OptimizerDiverged

SIGMA2_FLOOR = 1e-8
ALPHA_STARTS = (0.05, 0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class SplineConfig:
    """Spline order (4 = cubic) and number of interior knots, per dimension.

    Scalars are broadcast over covariates.  ``internal_knots=None`` picks
    ``floor(n_eff ** (1/5))`` knots per dimension at fit time.
    """

    order: int | tuple = 4
    internal_knots: int | tuple | None = None
    max_dim: int = 2

    def resolve(self, d: int, n_eff: int):
        order = np.broadcast_to(np.atleast_1d(self.order), (d,)).astype(int)
        if self.internal_knots is None:
            knots = np.full(d, max(1, int(np.floor(n_eff ** 0.2))))
        else:
            knots = np.broadcast_to(np.atleast_1d(self.internal_knots), (d,)).astype(int)
        if np.any(order < 1) or np.any(knots < 0):
            raise ValueError("spline order must be >= 1 and knot counts >= 0")
        return tuple(int(o) for o in order), tuple(int(k) for k in knots)


def knot_vector(x01: np.ndarray, order: int, n_interior: int) -> np.ndarray:
    """Clamped knot vector on [0, 1] with interior knots at empirical quantiles."""
    probs = np.arange(1, n_interior + 1) / (n_interior + 1)
    interior = np.quantile(x01, probs) if n_interior else np.empty(0)
    interior = np.unique(interior)
    interior = interior[(interior > 0) & (interior < 1)]
    if interior.size != n_interior:
        raise ValueError("covariate has too few distinct values for the requested knots")
    return np.concatenate([np.zeros(order), interior, np.ones(order)])


def basis_matrix(x01: np.ndarray, knots: np.ndarray, order: int) -> np.ndarray:
    x = np.clip(np.asarray(x01, dtype=float), 0.0, 1.0)
    return BSpline.design_matrix(x, knots, order - 1).toarray()


def tensor_basis(columns) -> np.ndarray:
    """Row-wise Kronecker product of per-dimension basis matrices."""
    out = None
    for b in columns:
        out = b if out is None else (out[:, :, None] * b[:, None, :]).reshape(len(b), -1)
    return out


@dataclass(frozen=True, eq=False)
class SplineSurface:
    """Evaluator ``x -> theta' B(x)`` with covariates rescaled to [0, 1]."""

    theta: np.ndarray
    knots: tuple
    order: tuple
    lower: np.ndarray
    upper: np.ndarray

    @property
    def d(self) -> int:
        return len(self.knots)

    def design(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} covariates, got {x.shape[1]}")
        if self.d == 0:
            return np.ones((x.shape[0], 1))
        x01 = (x - self.lower) / (self.upper - self.lower)
        return tensor_basis(
            basis_matrix(x01[:, j], self.knots[j], self.order[j]) for j in range(self.d)
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = x.reshape(1, -1) if single else x
        out = self.design(pts) @ self.theta
        return float(out[0]) if single else out


def qmle_objective(params, y, design):
    """Quasi-likelihood and its gradient for ``sigma2 = design @ params``."""
    s = design @ params
    floored = s < SIGMA2_FLOOR
    s = np.where(floored, SIGMA2_FLOOR, s)
    value = np.mean(y / s + np.log(s))
    g = (1.0 / s - y / s**2) / y.size
    g[floored] = 0.0
    return value, design.T @ g


def fit_bspline_qmle(series, panel, p: int, cfg: SplineConfig | None = None, exclude=None) -> FittedModel:
    """Fit alpha and the spline coefficients by multi-start L-BFGS-B.

    The likelihood conditions on the first ``p`` observations, so the
    residuals line up with the kernel estimator's (``n - p`` of them).
    """
    cfg = cfg or SplineConfig()
    series, panel = validate_inputs(series, panel, p)
    excluded = None if exclude is None else panel.index_of(exclude)
    y, lags = lagged_design(series, p)
    x = aligned_covariates(panel, p, excluded)
    d = x.shape[1]
    if d > cfg.max_dim:
        raise DimensionTooHigh(
            f"{d} covariates exceed the spline limit of {cfg.max_dim}; use the kernel estimator"
        )
    order, n_knots = cfg.resolve(d, y.size)
    lower, upper = x.min(axis=0), x.max(axis=0)
    x01 = (x - lower) / (upper - lower)
    knots = tuple(knot_vector(x01[:, j], order[j], n_knots[j]) for j in range(d))
    surface = SplineSurface(np.zeros(0), knots, order, lower, upper)
    basis = surface.design(x)
    n_basis = basis.shape[1]
    if n_basis >= y.size / 5:
        raise ValueError(f"{n_basis} basis functions is too many for {y.size} observations")

    design = np.column_stack([lags, basis])
    bounds = [(0.0, None)] * p + [(None, None)] * n_basis
    gram = basis.T @ basis
    ridge = 1e-6 * np.trace(gram) / n_basis
    best = None
    for a0 in ALPHA_STARTS:
        alpha0 = np.full(p, a0 / p)
        theta0 = np.linalg.solve(gram + ridge * np.eye(n_basis), basis.T @ (y - lags @ alpha0))
        # B-splines sum to one, so a constant shift of theta lifts m uniformly;
        # use it to make the starting variance strictly positive everywhere
        s0 = lags @ alpha0 + basis @ theta0
        theta0 = theta0 + max(0.0, 0.1 * np.mean(y) - s0.min())
        start = np.concatenate([alpha0, theta0])
        f0, _ = qmle_objective(start, y, design)
        if not np.isfinite(f0):
            continue
        res = minimize(
            qmle_objective, start, args=(y, design), jac=True, method="L-BFGS-B",
            bounds=bounds, options={"maxiter": 2000},
        )
        if not np.isfinite(res.fun):
            continue
        value, params = (res.fun, res.x) if res.fun <= f0 else (f0, start)
        if best is None or value < best[0]:
            best = (value, params, f0)
    if best is None:
        raise OptimizerDiverged("quasi-likelihood was non-finite from every starting point")
    value, params, f0 = best
    alpha = params[:p]
    theta = params[p:]
    surface = SplineSurface(theta, knots, order, lower, upper)
    fitted_m = basis @ theta
    return FittedModel(
        p=p,
        alpha_hat=alpha,
        m_hat=surface,
        residuals=y - lags @ alpha - fitted_m,
        method="spline",
        columns=resolve_columns(panel, excluded),
        excluded=excluded,
        knots=knots,
        order=order,
        objective=float(value),
        start_objective=float(f0),
        fitted_m=fitted_m,
    )
