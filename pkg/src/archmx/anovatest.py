"""Rank-window ANOVA test for the relevance of a single covariate.

Null-model residuals are sorted by the tested covariate and every rank ``t``
gets a window of its ``k`` nearest ranks.  Treating the windows as the levels
of a one-way layout gives ``T = MST - MSE``; under the null it is centred at
zero and ``sqrt(n/k) T`` is asymptotically normal with variance ``4 tau**2 / 3``
(``tau`` the residual variance, estimated from first differences).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse
from scipy.stats import norm

from .core import aligned_covariates, validate_inputs
from .errors import EvenWindow, MemoryGuard, TooShort, WindowTooLarge
from .estimate.kernel import KernelConfig, fit_partially_linear
from .estimate.spline import SplineConfig, fit_bspline_qmle

ORACLE_MAX_SIZE = 5000
MIN_TEST_LENGTH = 50


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Windows over covariate ranks.

    Attributes
    ----------
    k_n : int
        Window size (odd).
    ordering : ndarray of int
        Permutation that sorts the covariate ascending (ties by position).
    starts : ndarray of int
        First rank of each window; window ``t`` covers ranks
        ``starts[t] .. starts[t] + k_n - 1``.
    """

    k_n: int
    ordering: np.ndarray
    starts: np.ndarray

    @property
    def n(self) -> int:
        return self.ordering.size

    @property
    def windows(self) -> np.ndarray:
        """``(n, k_n)`` array of member ranks, one row per window."""
        return self.starts[:, None] + np.arange(self.k_n)


def build_windows(covariate, k_n: int) -> WindowSet:
    """Rank the covariate and attach a window of ``k_n`` ranks to each rank.

    Interior windows are centred; the first and last ``(k_n - 1) / 2`` ranks
    share the window made of the first (last) ``k_n`` ranks.
    """
    x = np.asarray(covariate, dtype=float).ravel()
    n = x.size
    k_n = int(k_n)
    if k_n % 2 == 0:
        raise EvenWindow(f"window size must be odd, got {k_n}")
    if k_n < 3:
        raise ValueError(f"window size must be at least 3, got {k_n}")
    if k_n > n:
        raise WindowTooLarge(f"window size {k_n} exceeds sample size {n}")
    ordering = np.argsort(x, kind="stable")
    half = (k_n - 1) // 2
    starts = np.clip(np.arange(n) - half, 0, n - k_n)
    return WindowSet(k_n, ordering, starts)


def anova_statistic(residuals, ws: WindowSet):
    """``(T, MST, MSE)`` for residuals already sorted by covariate rank."""
    v = np.asarray(residuals, dtype=float)
    if v.size != ws.n:
        raise ValueError(f"{v.size} residuals for {ws.n} ranks")
    n, k = ws.n, ws.k_n
    members = v[ws.windows]
    means = members.mean(axis=1)
    grand = means.mean()
    mst = k / (n - 1) * np.sum((means - grand) ** 2)
    mse = np.sum((members - means[:, None]) ** 2) / (n * (k - 1))
    return mst - mse, mst, mse


def anova_by_covariate(covariate, residuals, k_n: int):
    """Sort ``residuals`` by ``covariate`` and return ``(T, MST, MSE)``."""
    ws = build_windows(covariate, k_n)
    return anova_statistic(np.asarray(residuals, dtype=float)[ws.ordering], ws)


def quadratic_form_oracle(residuals, ws: WindowSet, max_size: int = ORACLE_MAX_SIZE) -> float:
    """``V' A V`` with ``V`` the window-expanded residuals.

    ``A = c1 (I_n kron J_k) - c2 J_nk - c3 I_nk`` where ``J`` is a matrix of
    ones.  The Kronecker block is built as a sparse matrix and ``J_nk`` is
    applied through its rank-one factor.  Intended for checking
    :func:`anova_statistic` on small inputs.
    """
    v = np.asarray(residuals, dtype=float)
    n, k = ws.n, ws.k_n
    size = n * k
    if size > max_size:
        raise MemoryGuard(f"oracle matrix would be {size}x{size}; cap is {max_size}")
    big_v = v[ws.windows].ravel()
    c1 = (n * k - 1) / (n * (n - 1) * k * (k - 1))
    c2 = 1.0 / (n * (n - 1) * k)
    c3 = 1.0 / (n * (k - 1))
    block = sparse.kron(sparse.identity(n, format="csr"), np.ones((k, k)), format="csr")
    ones = np.ones(size)
    return float(c1 * big_v @ (block @ big_v) - c2 * (ones @ big_v) ** 2 - c3 * big_v @ big_v)


def rice_variance(residuals) -> float:
    """First-difference variance estimate ``sum(diff**2) / (2 (n - 1))``.

    Residuals must be in time order.
    """
    v = np.asarray(residuals, dtype=float)
    if v.size < 2:
        raise TooShort(f"need at least 2 residuals, got {v.size}")
    return float(np.sum(np.diff(v) ** 2) / (2.0 * (v.size - 1)))


def choose_kn(n_eff: int) -> int:
    """Odd integer nearest ``3 n**(1/5)``, clamped to ``[5, n/10]``."""
    if n_eff < MIN_TEST_LENGTH:
        raise TooShort(f"need at least {MIN_TEST_LENGTH} observations, got {n_eff}")
    raw = 3.0 * n_eff**0.2
    k = 2 * int(round((raw - 1.0) / 2.0)) + 1
    upper = int(n_eff // 10)
    upper -= 1 - upper % 2
    return int(min(max(k, 5), upper))


def standardize(t_n: float, tau_hat: float, n_eff: int, k_n: int):
    """``(z, p)`` with ``z = sqrt(n/k) T / sqrt(4 tau**2 / 3)`` and upper-tail ``p``."""
    scale = np.sqrt(4.0 * tau_hat**2 / 3.0)
    if scale > 0:
        z = np.sqrt(n_eff / k_n) * t_n / scale
    else:
        z = np.copysign(np.inf, t_n) if t_n != 0 else 0.0
    return float(z), float(norm.sf(z))


@dataclass(frozen=True)
class TestResult:
    """Outcome of one covariate test (``covariate`` is a 0-based index)."""

    __test__ = False  # not a pytest class

    covariate: int
    name: str
    T_n: float
    MST: float
    MSE: float
    k_n: int
    tau_hat: float
    z: float
    p_value: float
    n_eff: int
    method: str = "kernel"
    bandwidth: tuple | None = None
    alpha_hat: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def test_covariate(series, panel, ell, p: int = 1, cfg=None, k_n: int | None = None) -> TestResult:
    """Test ``H0: m does not depend on covariate ell``.

    The null model is refitted without ``ell`` (kernel estimator unless ``cfg``
    is a :class:`SplineConfig`), its residuals are ranked by ``X_{ell, t-1}``
    and the window statistic is standardised with the first-difference
    variance of the time-ordered residuals.

    Parameters
    ----------
    ell : int or str
        0-based covariate index or column name.
    cfg : KernelConfig or SplineConfig, optional
        Estimator settings.  Kernel bandwidths may be given for the full panel.
    k_n : int, optional
        Window size; defaults to :func:`choose_kn`.
    """
    series, panel = validate_inputs(series, panel, p)
    idx = panel.index_of(ell)
    if isinstance(cfg, SplineConfig):
        fit = fit_bspline_qmle(series, panel, p, cfg, exclude=idx)
        bandwidth = None
    else:
        if cfg is not None and not isinstance(cfg, KernelConfig):
            raise TypeError(f"cfg must be a KernelConfig or SplineConfig, got {type(cfg).__name__}")
        fit = fit_partially_linear(series, panel, p, cfg, exclude=idx)
        bandwidth = tuple(float(h) for h in fit.bandwidth)
    v = np.asarray(fit.residuals)
    n_eff = v.size
    k = choose_kn(n_eff) if k_n is None else int(k_n)
    tau_hat = rice_variance(v)
    t_n, mst, mse = anova_by_covariate(aligned_covariates(panel, p)[:, idx], v, k)
    z, p_value = standardize(t_n, tau_hat, n_eff, k)
    return TestResult(
        covariate=idx,
        name=panel.names[idx],
        T_n=float(t_n),
        MST=float(mst),
        MSE=float(mse),
        k_n=k,
        tau_hat=tau_hat,
        z=z,
        p_value=p_value,
        n_eff=n_eff,
        method=fit.method,
        bandwidth=bandwidth,
        alpha_hat=tuple(float(a) for a in fit.alpha_hat),
    )
