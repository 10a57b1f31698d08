"""Synthetic stand-in for a daily equity-index dataset with 11 market covariates.

The real data are not redistributable, so this generator writes a price file
with the same layout: a date column, the index price and 11 covariate price
columns.  Index returns follow an ARCH(1)-m(X) law in which only
``ACTIVE_COVARIATES`` drive the volatility.  The sample period and frequency
of the original study are unknown; business days from 2012 are used.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .core import ArchMxSpec, CovariatePanel, Shock
from .dgp import simulate_arch_mx

INDEX_COLUMN = "SP500"
COVARIATE_COLUMNS = (
    "China", "Asia", "CrudeOil", "USDIndex", "Gold", "Copper",
    "Silver", "Steel", "Rice", "Wheat", "Europe",
)
ACTIVE_COVARIATES = ("Asia", "CrudeOil", "Gold", "Steel", "Europe")
DAILY_VOL = 0.01


def make_fixture(n: int = 2500, seed: int = 0) -> pd.DataFrame:
    """Return ``n + 1`` rows of prices (``n`` log returns after differencing)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    d = len(COVARIATE_COLUMNS)
    lag = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    cov = DAILY_VOL**2 * 0.3**lag
    x = rng.multivariate_normal(np.zeros(d), cov, size=n, method="cholesky")
    active = [COVARIATE_COLUMNS.index(c) for c in ACTIVE_COVARIATES]

    def m(z):
        u = np.atleast_2d(z)[:, active] / DAILY_VOL
        return DAILY_VOL**2 * (0.2 + np.sum(u**2, axis=1))

    spec = ArchMxSpec((0.2,), m, Shock.normal())
    eps = simulate_arch_mx(spec, CovariatePanel(x, COVARIATE_COLUMNS), rng, burnin=200)
    returns = np.column_stack([eps.values, x])
    start = rng.uniform(20, 200, size=d + 1)
    prices = start * np.exp(np.vstack([np.zeros(d + 1), np.cumsum(returns, axis=0)]))
    frame = pd.DataFrame(prices, columns=(INDEX_COLUMN,) + COVARIATE_COLUMNS)
    dates = pd.bdate_range("2012-01-02", periods=n + 1).strftime("%Y-%m-%d")
    frame.insert(0, "date", dates)
    return frame
