"""Shared domain types for the ARCH(p)-m(X) model.

Conventions used throughout the package:

* callers pass the raw series ``eps`` and the pipeline squares it internally;
* time is 0-based and ``eps[t]`` is paired with covariate row ``t - 1``, so the
  first ``p`` observations are consumed as lags and ``n_eff = n - p``;
* covariate indices are 0-based in the Python API (the CLI also accepts names).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateColumn,
    DimensionMismatch,
    EmptyInput,
    IndexOutOfRange,
    InvalidDf,
    InvalidOrder,
    LengthMismatch,
    NonFiniteData,
)

MIN_SERIES_LENGTH = 10


def _frozen_array(values, ndim) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Observed series ``eps_t`` (returns, not squared returns)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, 1)
        if arr.size == 0:
            raise EmptyInput("empty return series")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteData("return series contains non-finite values")
        if arr.size < MIN_SERIES_LENGTH:
            raise EmptyInput(f"need at least {MIN_SERIES_LENGTH} observations, got {arr.size}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def squared(self) -> np.ndarray:
        return self.values**2


@dataclass(frozen=True, eq=False)
class CovariatePanel:
    """An ``n x d`` matrix of exogenous covariates with unique column names."""

    matrix: np.ndarray
    names: tuple = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float, copy=True)
        if mat.ndim == 1:
            mat = mat[:, None]
        if mat.ndim != 2:
            raise DimensionMismatch(f"covariate matrix must be 2-d, got shape {mat.shape}")
        if mat.shape[0] == 0 or mat.shape[1] == 0:
            raise EmptyInput("empty covariate panel")
        names = self.names
        if names is None:
            names = tuple(f"X{j + 1}" for j in range(mat.shape[1]))
        names = tuple(str(s) for s in names)
        if len(names) != mat.shape[1]:
            raise LengthMismatch(f"{len(names)} names for {mat.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError(f"covariate names must be unique: {names}")
        if not np.all(np.isfinite(mat)):
            raise NonFiniteData("covariate panel contains non-finite values")
        for j, name in enumerate(names):
            col = mat[:, j]
            if mat.shape[0] > 1 and np.all(col == col[0]):
                raise DegenerateColumn(name)
            if mat.shape[0] == 1:
                raise DegenerateColumn(name)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def index_of(self, key) -> int:
        """Resolve a 0-based index or a column name to a 0-based index."""
        if isinstance(key, str):
            try:
                return self.names.index(key)
            except ValueError:
                raise IndexOutOfRange(f"no covariate named {key!r}") from None
        idx = int(key)
        if not 0 <= idx < self.d:
            raise IndexOutOfRange(f"covariate index {idx} outside 0..{self.d - 1}")
        return idx

    def column(self, key) -> np.ndarray:
        return self.matrix[:, self.index_of(key)]


@dataclass(frozen=True)
class Shock:
    """Innovation law for ``z_t``.

    ``kind`` is one of ``normal``, ``laplace``, ``t`` and ``scaled_t``.  Draws
    are returned as literally specified (a Laplace with scale ``b`` has
    variance ``2 b**2``); pass ``standardize=True`` to :meth:`sample` to rescale
    to unit variance.
    """

    kind: str = "normal"
    scale: float = 1.0
    df: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("normal", "laplace", "t", "scaled_t"):
            raise ValueError(f"unknown shock kind {self.kind!r}")
        if self.kind in ("t", "scaled_t"):
            if self.df is None or self.df <= 2:
                raise InvalidDf(f"t shocks need df > 2 for a finite variance, got {self.df}")
        if self.scale <= 0:
            raise ValueError("shock scale must be positive")

    @classmethod
    def normal(cls):
        return cls("normal")

    @classmethod
    def laplace(cls, b=0.5):
        return cls("laplace", scale=b)

    @classmethod
    def student_t(cls, df=7.0):
        return cls("t", df=df)

    @classmethod
    def scaled_t(cls, df=7.0, scale=0.5):
        return cls("scaled_t", scale=scale, df=df)

    @classmethod
    def parse(cls, text: str) -> "Shock":
        """Parse ``normal``, ``laplace[:b]``, ``t[:df]`` or ``scaled_t[:df:scale]``."""
        parts = text.strip().lower().split(":")
        kind, args = parts[0], [float(a) for a in parts[1:]]
        if kind == "normal":
            return cls.normal()
        if kind == "laplace":
            return cls.laplace(*args)
        if kind in ("t", "student_t"):
            return cls.student_t(*args)
        if kind == "scaled_t":
            return cls.scaled_t(*args)
        raise ValueError(f"unknown shock {text!r}")

    @property
    def variance(self) -> float:
        if self.kind == "normal":
            return 1.0
        if self.kind == "laplace":
            return 2.0 * self.scale**2
        return self.scale**2 * self.df / (self.df - 2.0)

    def sample(self, n: int, rng: np.random.Generator, standardize: bool = False) -> np.ndarray:
        if self.kind == "normal":
            z = rng.standard_normal(n)
        elif self.kind == "laplace":
            z = rng.laplace(0.0, self.scale, n)
        else:
            z = self.scale * rng.standard_t(self.df, n)
        if standardize:
            z = z / np.sqrt(self.variance)
        return z


@dataclass(frozen=True)
class ArchMxSpec:
    """Data-generating parameters of an ARCH(p)-m(X) process.

    ``vol_fn`` maps an ``(n, d)`` covariate array to ``n`` values of m(x).
    """

    alpha: tuple
    vol_fn: Callable[[np.ndarray], np.ndarray]
    shock: Shock = field(default_factory=Shock)

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if len(alpha) < 1:
            raise InvalidOrder("ARCH order p must be at least 1")
        if any(a < 0 for a in alpha):
            raise ValueError(f"ARCH coefficients must be non-negative: {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def p(self) -> int:
        return len(self.alpha)

    def check_positive(self, x: np.ndarray) -> bool:
        """True when ``vol_fn`` is strictly positive on every row of ``x``."""
        return bool(np.all(np.asarray(self.vol_fn(np.atleast_2d(x))) > 0))


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Estimated ARCH coefficients, volatility-surface evaluator and residuals.

    ``m_hat`` takes a covariate vector (or an ``(m, d)`` array) in the fit's
    covariate space, i.e. without the excluded column when ``excluded`` is set.
    """

    p: int
    alpha_hat: np.ndarray
    m_hat: Callable[[np.ndarray], np.ndarray]
    residuals: np.ndarray
    method: str
    columns: tuple
    excluded: Optional[int] = None
    bandwidth: Optional[np.ndarray] = None
    kernel: Optional[str] = None
    knots: Optional[tuple] = None
    order: Optional[tuple] = None
    objective: Optional[float] = None
    start_objective: Optional[float] = None
    fitted_m: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha_hat", _frozen_array(self.alpha_hat, 1))
        object.__setattr__(self, "residuals", _frozen_array(self.residuals, 1))

    @property
    def n_eff(self) -> int:
        return self.residuals.size


def validate_inputs(series, panel, p: int) -> tuple:
    """Check that a series, a covariate panel and a lag order fit together.

    Array-likes are accepted and coerced through the type constructors, so a
    constant column raises :class:`DegenerateColumn` and NaNs raise
    :class:`NonFiniteData`.  Returns the validated ``(series, panel)`` pair.
    """
    if not isinstance(series, ReturnSeries):
        series = ReturnSeries(series)
    if not isinstance(panel, CovariatePanel):
        panel = CovariatePanel(panel)
    if series.n != panel.n:
        raise LengthMismatch(f"series has {series.n} observations, panel has {panel.n} rows")
    if isinstance(p, bool) or int(p) != p or p < 1:
        raise InvalidOrder(f"lag order must be a positive integer, got {p!r}")
    if p >= series.n / 10:
        raise InvalidOrder(f"lag order {p} too large for n={series.n} (need p < n/10)")
    return series, panel


def lagged_design(series: ReturnSeries, p: int):
    """Response ``eps_t**2`` and lag matrix ``eps_{t-j}**2`` for ``t = p..n-1``."""
    y = series.squared
    n = y.size
    response = y[p:]
    lags = np.column_stack([y[p - j : n - j] for j in range(1, p + 1)])
    return response, lags


def aligned_covariates(panel: CovariatePanel, p: int, exclude=None) -> np.ndarray:
    """Covariate rows ``X_{t-1}`` for ``t = p..n-1``, optionally dropping a column."""
    x = panel.matrix[p - 1 : panel.n - 1]
    if exclude is not None:
        x = np.delete(x, panel.index_of(exclude), axis=1)
    return x


def resolve_columns(panel: CovariatePanel, exclude=None) -> tuple:
    if exclude is None:
        return panel.names
    idx = panel.index_of(exclude)
    return panel.names[:idx] + panel.names[idx + 1 :]


def as_index_set(indices: Sequence[int], d: int) -> frozenset:
    out = frozenset(int(i) for i in indices)
    bad = [i for i in out if not 0 <= i < d]
    if bad:
        raise IndexOutOfRange(f"indices {sorted(bad)} outside 0..{d - 1}")
    return out
