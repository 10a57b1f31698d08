"""Kernel partially-linear estimator of the ARCH(p)-m(X) model.

m is profiled out by kernel smoothing and the ARCH coefficients solve a least
squares problem on kernel-centred variables:

    Y~ = Y - W Y,   X~ = L - W L,   alpha = argmin ||Y~ - X~ alpha||^2

with ``Y = eps_t**2``, ``L`` the matrix of lagged squares and ``W`` the
row-normalised kernel matrix over ``X_{t-1}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..core import (
    CovariatePanel,
    FittedModel,
    aligned_covariates,
    lagged_design,
    resolve_columns,
    validate_inputs,
)
from ..errors import DimensionMismatch, SingularNormalEquations
from .smoothing import KERNELS, _as_2d, kernel_weights, smooth


@dataclass(frozen=True)
class KernelConfig:
    """Product-kernel settings: one bandwidth per covariate dimension.

    ``bandwidth=None`` asks for the rule-of-thumb bandwidths at fit time.
    """

    bandwidth: tuple | None = None
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth is None:
            return
        h = tuple(float(b) for b in np.atleast_1d(self.bandwidth))
        if any(not np.isfinite(b) or b <= 0 for b in h):
            raise ValueError(f"bandwidths must be strictly positive, got {h}")
        object.__setattr__(self, "bandwidth", h)

    def drop(self, index: int) -> "KernelConfig":
        if self.bandwidth is None:
            return self
        h = self.bandwidth
        return KernelConfig(h[:index] + h[index + 1 :] or (1.0,), self.kernel)


def rule_of_thumb(x: np.ndarray) -> np.ndarray:
    """``1.06 * sd_j * m**(-1/(4+d))`` for an ``(m, d)`` design."""
    m, d = x.shape
    sd = np.std(x, axis=0, ddof=1)
    return 1.06 * sd * m ** (-1.0 / (4 + d))


def select_bandwidth(panel: CovariatePanel, p: int = 1, exclude=None, kernel="gaussian") -> KernelConfig:
    """Rule-of-thumb bandwidths on the aligned rows ``X_{t-1}``, ``t = p..n-1``.

    With ``exclude`` set the rule is applied to the reduced ``d - 1`` design.
    """
    x = aligned_covariates(panel, p, exclude)
    if x.shape[1] == 0:
        return KernelConfig((1.0,), kernel)
    return KernelConfig(tuple(rule_of_thumb(x)), kernel)


def kernel_weight_matrix(panel, cfg: KernelConfig, p: int = 1, exclude=None) -> np.ndarray:
    """Dense ``(n-p) x (n-p)`` matrix ``W = diag(K 1)^{-1} K`` over ``X_{t-1}``.

    ``panel`` may also be a raw ``(m, d)`` array of already aligned rows.
    """
    if isinstance(panel, CovariatePanel):
        x = aligned_covariates(panel, p, exclude)
    else:
        x = _as_2d(panel)
    h = _bandwidth_for(cfg, x.shape[1])
    return kernel_weights(x, h, cfg.kernel)


def _bandwidth_for(cfg: KernelConfig, d: int) -> np.ndarray:
    h = np.asarray(cfg.bandwidth, dtype=float)
    if d == 0:
        return np.ones(0)
    if h.size == 1:
        return np.full(d, h[0])
    if h.size != d:
        raise DimensionMismatch(f"{h.size} bandwidths for {d} covariates")
    return h


@dataclass(frozen=True, eq=False)
class KernelSurface:
    """Evaluator ``x -> sum_l W_l(x) (eps_l**2 - sum_j alpha_j eps_{l-j}**2)``."""

    x_train: np.ndarray
    adjusted: np.ndarray
    bandwidth: np.ndarray
    kernel: str

    @property
    def d(self) -> int:
        return self.x_train.shape[1]

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = x.reshape(1, -1) if single else x
        if self.d == 0:
            pts = np.zeros((pts.shape[0], 0)) if pts.size == 0 else pts
        if pts.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} covariates, got {pts.shape[1]}")
        out = smooth(self.x_train, self.adjusted, self.bandwidth, self.kernel, x_eval=pts)
        return float(out[0]) if single else out


def profile_least_squares(response, lags, x, bandwidth, kernel="gaussian", clamp=True):
    """Core solver on raw arrays.

    Returns ``(alpha, fitted_m, residuals, smoothed)`` where ``smoothed`` holds
    ``W [Y, L]``.  Negative coefficients are clamped to zero (with a warning)
    when ``clamp`` is true.
    """
    response = np.asarray(response, dtype=float)
    lags = np.asarray(lags, dtype=float).reshape(len(response), -1)
    x = _as_2d(x)
    stacked = np.column_stack([response, lags])
    smoothed = smooth(x, stacked, bandwidth, kernel) if x.shape[1] else np.broadcast_to(
        stacked.mean(axis=0), stacked.shape
    )
    y_t = response - smoothed[:, 0]
    x_t = lags - smoothed[:, 1:]
    alpha = _solve_normal_equations(x_t, y_t, np.linalg.norm(lags))
    if clamp and np.any(alpha < 0):
        warnings.warn(
            f"negative ARCH coefficient(s) {alpha[alpha < 0]} clamped to zero",
            RuntimeWarning,
            stacklevel=3,
        )
        alpha = np.maximum(alpha, 0.0)
    # W is linear, so W(Y - L alpha) = WY - (WL) alpha
    fitted_m = smoothed[:, 0] - smoothed[:, 1:] @ alpha
    residuals = response - lags @ alpha - fitted_m
    return alpha, fitted_m, residuals, smoothed


def _solve_normal_equations(x_t, y_t, lag_norm) -> np.ndarray:
    gram = x_t.T @ x_t
    centred = np.linalg.norm(x_t)
    if not np.isfinite(centred) or centred <= 1e-10 * lag_norm:
        raise SingularNormalEquations("lagged squares have no variation left after kernel centring")
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularNormalEquations(f"normal equations are rank deficient (cond={cond:.3g})")
    return np.linalg.solve(gram, x_t.T @ y_t)


def fit_partially_linear(series, panel, p: int, cfg: KernelConfig | None = None, exclude=None) -> FittedModel:
    """Fit the partially-linear kernel estimator.

    Parameters
    ----------
    series, panel
        Observed ``eps_t`` and covariates (``ReturnSeries``/``CovariatePanel`` or
        array-likes).
    p : int
        ARCH order.
    cfg : KernelConfig, optional
        Bandwidths for the full panel (the entry of ``exclude`` is dropped) or
        for the reduced design.  Defaults to :func:`select_bandwidth`.
    exclude : int or str, optional
        Covariate left out of the smoother, i.e. the fit under ``H0``.
    """
    series, panel = validate_inputs(series, panel, p)
    response, lags = lagged_design(series, p)
    excluded = None if exclude is None else panel.index_of(exclude)
    x = aligned_covariates(panel, p, excluded)
    if cfg is None or cfg.bandwidth is None:
        cfg = select_bandwidth(panel, p, excluded, cfg.kernel if cfg else "gaussian")
    elif excluded is not None and len(cfg.bandwidth) == panel.d:
        cfg = cfg.drop(excluded)
    h = _bandwidth_for(cfg, x.shape[1])
    alpha, fitted_m, residuals, _ = profile_least_squares(response, lags, x, h, cfg.kernel)
    surface = KernelSurface(x, response - lags @ alpha, h, cfg.kernel)
    return FittedModel(
        p=p,
        alpha_hat=alpha,
        m_hat=surface,
        residuals=residuals,
        method="kernel",
        columns=resolve_columns(panel, excluded),
        excluded=excluded,
        bandwidth=h,
        kernel=cfg.kernel,
        fitted_m=fitted_m,
    )
