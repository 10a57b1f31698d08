"""Simulation designs: covariate and shock sampling, the tabulated test and
selection models, and the ARCH-m(X) recursion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ArchMxSpec, CovariatePanel, ReturnSeries, Shock
from .errors import (
    CholeskyFailure,
    DimensionMismatch,
    EmptyInput,
    NonPositiveVolatility,
    Overflow,
)

DEFAULT_BURNIN = 500
# floor applied to m(x) by the "clip" policy; some tabulated surfaces (linear,
# product) dip below zero on rare covariate draws
VOL_FLOOR = 1e-6
OVERFLOW_LIMIT = 1e150

SCENARIOS = ("test2", "test5", "select5", "select10")
SCENARIO_DIM = {"test2": 2, "test5": 5, "select5": 5, "select10": 10}


@dataclass(frozen=True)
class CovariateLaw:
    """Gaussian covariate law with mean ``mean`` and ``cov[i, j] = rho**|i-j|``."""

    d: int
    rho: float = 0.0
    mean: float = 2.5

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("covariate dimension must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def cov(self) -> np.ndarray:
        lag = np.abs(np.subtract.outer(np.arange(self.d), np.arange(self.d)))
        # 0.0**0 == 1.0 keeps the diagonal at one when rho == 0
        return np.power(float(self.rho), lag)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        try:
            chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise CholeskyFailure(str(exc)) from exc
        return self.mean + rng.standard_normal((n, self.d)) @ chol.T


def sample_covariates(law: CovariateLaw, n: int, seed) -> CovariatePanel:
    """Draw ``n`` i.i.d. rows from ``N(mean * 1, cov)``."""
    if n < 1:
        raise EmptyInput("cannot sample an empty covariate panel")
    rng = np.random.default_rng(seed)
    return CovariatePanel(law.draw(n, rng))


def sample_shocks(dist: Shock, n: int, seed, standardize: bool = False) -> np.ndarray:
    if n < 1:
        raise EmptyInput("need at least one shock")
    return dist.sample(n, np.random.default_rng(seed), standardize=standardize)


# ---------------------------------------------------------------------------
# Tabulated m(x) surfaces.  Each takes an (n, d) array and the signal strength
# c.  The lag terms printed inside the tables are carried by ``alpha``.
# ---------------------------------------------------------------------------
def _sin2(x):
    return np.sin(np.pi * x / 2.0) ** 2


def _t2_m1(x, c):
    return 0.2 + 0.5 * (x[:, 0] - 2.5) ** 2 + 2 * c * (x[:, 1] - 2.5) ** 2


def _t2_m2(x, c):
    return 0.2 + 0.5 * (x[:, 0] + 2 * c * x[:, 1] - 10) ** 2


def _t2_m5(x, c):
    return 0.2 + _sin2(x[:, 0]) + 10 * c * _sin2(x[:, 1])


def _t2_m6(x, c):
    return 0.2 + 10 * c * np.sin(x[:, 0] / 2 + np.pi * c * x[:, 1] / 2) ** 2


def _t2_m7(x, c):
    return 0.2 + 0.25 * x[:, 0] + c * x[:, 1]


def _t2_m8(x, c):
    return 0.2 + c * x[:, 0] * x[:, 1]


def _others(x, skip=2):
    return np.delete(x, skip, axis=1)


def _t5_m1(x, c):
    return 0.2 + 0.5 * ((_others(x) - 2.5) ** 2).sum(axis=1) + 5 * c * (x[:, 2] - 2.5) ** 2


def _t5_m2(x, c):
    return 0.2 + 0.5 * (_others(x).sum(axis=1) + 5 * c * x[:, 2] - 25) ** 2


def _t5_m5(x, c):
    return 0.2 + np.sin(np.pi * _others(x) / 2).sum(axis=1) + 10 * c * np.sin(np.pi * x[:, 2] / 2)


def _t5_m6(x, c):
    s = _sin2(x)
    return 0.2 + s[:, 0] * s[:, 1] + 10 * c * s[:, 2] * s[:, 3] + s[:, 4]


def _t5_m7(x, c):
    return 0.2 + 0.25 * _others(x).sum(axis=1) + 8 * c * x[:, 2]


def _t5_m8(x, c):
    return 0.2 + c * x[:, 2] * _others(x).sum(axis=1)


def _quad(x, active, coef=2.0):
    return coef * ((x[:, active] - 2.5) ** 2).sum(axis=1)


def _sq_linear(x, active, shift):
    return 0.5 * (2 * x[:, active].sum(axis=1) - shift) ** 2


def _s5_m6(x, c):
    s = _sin2(x)
    return 10 * s[:, 0] * s[:, 2] + 10 * s[:, 3]


def _s5_m8(x, c):
    return x[:, 2] * (x[:, 0] + x[:, 3])


def _s10_m6(x, c):
    s = _sin2(x)
    return 10 * s[:, 0] * s[:, 2] + 10 * s[:, 3] * s[:, 4] + 10 * s[:, 8]


def _s10_m8(x, c):
    return (x[:, 0] + x[:, 3]) * x[:, 2] + x[:, 4] * x[:, 8]


_A5 = [0, 2, 3]
_A10 = [0, 2, 3, 4, 8]

_SURFACES = {
    "test2": {
        1: _t2_m1, 2: _t2_m2, 3: _t2_m1, 4: _t2_m2,
        5: _t2_m5, 6: _t2_m6, 7: _t2_m7, 8: _t2_m8,
    },
    "test5": {
        1: _t5_m1, 2: _t5_m2, 3: _t5_m1, 4: _t5_m2,
        5: _t5_m5, 6: _t5_m6, 7: _t5_m7, 8: _t5_m8,
    },
    "select5": {
        1: lambda x, c: _quad(x, _A5),
        2: lambda x, c: _sq_linear(x, _A5, 15),
        3: lambda x, c: _quad(x, _A5),
        4: lambda x, c: _sq_linear(x, _A5, 15),
        5: lambda x, c: 8 * _sin2(x[:, _A5]).sum(axis=1),
        6: _s5_m6,
        7: lambda x, c: 8 * x[:, _A5].sum(axis=1),
        8: _s5_m8,
    },
    "select10": {
        1: lambda x, c: _quad(x, _A10),
        # the 10-covariate table centres Model 2 at 25 but Model 4 at 15
        2: lambda x, c: _sq_linear(x, _A10, 25),
        3: lambda x, c: _quad(x, _A10),
        4: lambda x, c: _sq_linear(x, _A10, 15),
        5: lambda x, c: 8 * _sin2(x[:, _A10]).sum(axis=1),
        6: _s10_m6,
        7: lambda x, c: 8 * x[:, _A10].sum(axis=1),
        8: _s10_m8,
    },
}

_ALPHA = {1: (0.3,), 2: (0.3,), 3: (0.3, 0.2), 4: (0.3, 0.2)}


@dataclass(frozen=True)
class SimModel:
    """One row of the test (``test2``/``test5``) or selection
    (``select5``/``select10``) model tables."""

    scenario: str
    model_id: int
    c: float = 0.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.model_id not in range(1, 9):
            raise ValueError(f"model_id must be in 1..8, got {self.model_id}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"signal strength c must lie in [0, 1], got {self.c}")

    @property
    def d(self) -> int:
        return SCENARIO_DIM[self.scenario]

    @property
    def alpha(self) -> tuple:
        return _ALPHA.get(self.model_id, (0.4,))

    @property
    def p(self) -> int:
        return len(self.alpha)

    @property
    def active_set(self) -> frozenset:
        """0-based indices of the covariates entering m(x)."""
        if self.scenario == "select5":
            return frozenset(_A5)
        if self.scenario == "select10":
            return frozenset(_A10)
        if self.c == 0:
            # the tested covariate drops out at c = 0, and models 6 and 8 of the
            # 2-covariate table (8 of the 5-covariate one) become constant
            if self.model_id == 8 or (self.scenario == "test2" and self.model_id == 6):
                return frozenset()
            if self.scenario == "test2":
                return frozenset({0})
            return frozenset({0, 1, 4}) if self.model_id == 6 else frozenset({0, 1, 3, 4})
        return frozenset(range(self.d))

    @property
    def tested_covariate(self) -> int | None:
        """0-based index of the covariate whose significance the test design probes."""
        return {"test2": 1, "test5": 2}.get(self.scenario)

    def m(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise DimensionMismatch(f"{self.scenario} expects {self.d} covariates, got {x.shape[1]}")
        return _SURFACES[self.scenario][self.model_id](x, self.c)

    def spec(self, shock: Shock | None = None) -> ArchMxSpec:
        return ArchMxSpec(self.alpha, self.m, shock or Shock.normal())


def eval_model_m(model: SimModel, x, eps_lags=None) -> float:
    """Evaluate a tabulated model at a single covariate vector.

    Without ``eps_lags`` only the covariate surface (constant included) is
    returned.  With ``eps_lags = (eps_{t-1}, ..., eps_{t-p})`` the squared lag
    terms the tables print inside m(x) are added, giving ``sigma_t**2``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.d:
        raise DimensionMismatch(f"{model.scenario} expects a vector of length {model.d}")
    value = float(model.m(x[None, :])[0])
    if eps_lags is not None:
        lags = np.asarray(eps_lags, dtype=float)
        if lags.size != model.p:
            raise DimensionMismatch(f"model needs {model.p} lags, got {lags.size}")
        value += float(np.dot(model.alpha, lags**2))
    return value


def simulate_arch_mx(
    spec: ArchMxSpec,
    panel: CovariatePanel,
    seed,
    burnin: int = DEFAULT_BURNIN,
    law: CovariateLaw | None = None,
    standardize_shocks: bool = False,
    nonpositive: str = "raise",
) -> ReturnSeries:
    """Run ``sigma_t**2 = sum_j alpha_j eps_{t-j}**2 + m(X_{t-1})``, ``eps_t = z_t sigma_t``.

    The returned series has one value per panel row; ``eps[t]`` uses panel row
    ``t - 1`` (the last burn-in covariate row for ``t = 0``).  Burn-in
    covariates come from ``law`` when given, otherwise they are resampled from
    the panel rows.  ``nonpositive="clip"`` floors m(x) at ``VOL_FLOOR`` instead
    of raising :class:`NonPositiveVolatility`.
    """
    if burnin < 100:
        raise ValueError("burn-in must be at least 100 observations")
    if nonpositive not in ("raise", "clip"):
        raise ValueError("nonpositive must be 'raise' or 'clip'")
    alpha = np.asarray(spec.alpha, dtype=float)
    persistence = alpha.sum()
    if persistence >= 1:
        warnings.warn(
            f"sum(alpha) = {persistence:.3f} >= 1: the recursion is not covariance stationary",
            RuntimeWarning,
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    seed_burn, seed_shock = rng.spawn(2)
    if law is not None:
        x_burn = law.draw(burnin, seed_burn)
    else:
        x_burn = panel.matrix[seed_burn.integers(0, panel.n, burnin)]
    x_all = np.vstack([x_burn, panel.matrix])
    total = burnin + panel.n
    # covariate feeding eps[t] is x_all[t - 1]; eps[0] reuses the first row
    m_all = np.asarray(spec.vol_fn(x_all), dtype=float)
    m_lag = np.concatenate([m_all[:1], m_all[:-1]])
    if np.any(m_lag <= 0):
        if nonpositive == "raise":
            raise NonPositiveVolatility(f"m(x) <= 0 at {int(np.sum(m_lag <= 0))} time points")
        m_lag = np.maximum(m_lag, VOL_FLOOR)
    z = spec.shock.sample(total, seed_shock, standardize=standardize_shocks)
    centre = np.full((1, panel.d), law.mean) if law is not None else panel.matrix.mean(axis=0, keepdims=True)
    eps = _recursion(alpha, m_lag, z, float(spec.vol_fn(centre)[0]), persistence)
    if not np.all(np.isfinite(eps)) or np.max(np.abs(eps)) > OVERFLOW_LIMIT:
        raise Overflow("simulated series exploded; check that sum(alpha) < 1")
    return ReturnSeries(eps[burnin:])


@njit(cache=True)
def _recursion(alpha, m_lag, z, m_centre, persistence):
    p = alpha.size
    total = z.size
    if persistence < 1:
        sigma2_0 = max(m_centre, VOL_FLOOR) / (1.0 - persistence)
    else:
        sigma2_0 = max(m_centre, VOL_FLOOR)
    eps2 = np.empty(total + p)
    eps2[:p] = sigma2_0
    eps = np.empty(total)
    for t in range(total):
        sigma2 = m_lag[t]
        for j in range(p):
            sigma2 += alpha[j] * eps2[p + t - 1 - j]
        e = z[t] * np.sqrt(sigma2)
        eps[t] = e
        eps2[p + t] = e * e
        if not np.isfinite(e) or abs(e) > OVERFLOW_LIMIT:
            eps[t:] = np.inf
            break
    return eps


def simulate_model(
    model: SimModel,
    n: int,
    seed,
    rho: float = 0.0,
    shock: Shock | None = None,
    burnin: int = DEFAULT_BURNIN,
    standardize_shocks: bool = False,
):
    """Draw covariates and a series for one tabulated design.

    Returns ``(series, panel)``; both are deterministic given ``seed``.
    """
    law = CovariateLaw(model.d, rho)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cov_seed, sim_seed = seq.spawn(2)
    panel = sample_covariates(law, n, cov_seed)
    series = simulate_arch_mx(
        model.spec(shock),
        panel,
        sim_seed,
        burnin=burnin,
        law=law,
        standardize_shocks=standardize_shocks,
        nonpositive="clip",
    )
    return series, panel
