"""Seeded replication studies: rejection rates against c and selection metrics.

Every replication draws its data from ``SeedSequence(master_seed,
spawn_key=(c_index, rep))``, so results do not depend on how replications
are scheduled across worker processes.
"""

from __future__ import annotations

import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .anovatest import test_covariate
from .core import Shock, as_index_set
from .dgp import SCENARIOS, SimModel, simulate_model
from .estimate.kernel import KernelConfig
from .estimate.spline import SplineConfig
from .select import select_variables

TEST_LEVEL = 0.05


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of a replication study (JSON keys mirror the field names).

    ``c_grid`` drives rejection studies; selection studies use ``c_grid[0]``.
    ``workers=None`` uses ``ARCHMX_THREADS`` (or the CPU count).
    """

    scenario: str
    model_id: int
    n: int
    rho: float = 0.0
    shock: str = "normal"
    replications: int = 200
    master_seed: int = 0
    c_grid: tuple = (0.0,)
    q: float = 0.05
    k_n: Optional[int] = None
    bandwidth: Optional[tuple] = None
    method: str = "kernel"
    knots: Optional[int] = None
    burnin: int = 500
    standardize_shocks: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        grid = tuple(float(c) for c in np.atleast_1d(self.c_grid))
        if not grid or any(not 0.0 <= c <= 1.0 for c in grid):
            raise ValueError(f"c_grid values must lie in [0, 1], got {grid}")
        object.__setattr__(self, "c_grid", grid)
        if self.bandwidth is not None:
            object.__setattr__(self, "bandwidth", tuple(float(b) for b in np.atleast_1d(self.bandwidth)))
        if self.method not in ("kernel", "spline"):
            raise ValueError(f"unknown method {self.method!r}")
        Shock.parse(self.shock)

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown study config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def estimator(self):
        if self.method == "spline":
            return SplineConfig(internal_knots=self.knots)
        if self.bandwidth is not None:
            return KernelConfig(self.bandwidth)
        return None

    @property
    def long_running(self) -> bool:
        # beyond the desk-scale defaults of n <= 5000 and R = 200
        return self.n * self.replications * len(self.c_grid) > 1_000_000


def replication_seed(master_seed: int, c_index: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(c_index, rep))


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ARCHMX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _map(fn, jobs, workers):
    # results come back in job order whatever the scheduling
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _safe(fn, *args):
    try:
        return fn(*args), None
    except Exception as exc:  # isolate one bad replication from the rest
        return None, f"{type(exc).__name__}: {exc}" + ("" if str(exc) else traceback.format_exc(limit=1))


# -- rejection studies -------------------------------------------------------


@dataclass(frozen=True)
class RejectionRow:
    c: float
    rejection_rate: float
    mc_stderr: float
    replications: int
    failures: int


def _test_once(job):
    cfg, c_index, rep = job
    c = cfg.c_grid[c_index]

    def run():
        model = SimModel(cfg.scenario, cfg.model_id, c)
        series, panel = simulate_model(
            model, cfg.n, replication_seed(cfg.master_seed, c_index, rep),
            rho=cfg.rho, shock=Shock.parse(cfg.shock), burnin=cfg.burnin,
            standardize_shocks=cfg.standardize_shocks,
        )
        res = test_covariate(series, panel, model.tested_covariate, model.p, cfg.estimator(), cfg.k_n)
        return res.p_value

    return _safe(run)


def run_rejection_study(cfg: StudyConfig) -> list:
    """Rejection rate at level 0.05 for each ``c`` in the grid.

    Returns a list of :class:`RejectionRow`; failed replications are dropped
    from the rate and counted in ``failures``.
    """
    if cfg.scenario not in ("test2", "test5"):
        raise ValueError("rejection studies need a test scenario (test2 or test5)")
    jobs = [(cfg, ci, r) for ci in range(len(cfg.c_grid)) for r in range(cfg.replications)]
    out = _map(_test_once, jobs, worker_count(cfg.workers))
    rows = []
    for ci, c in enumerate(cfg.c_grid):
        chunk = out[ci * cfg.replications : (ci + 1) * cfg.replications]
        pv = np.array([p for p, err in chunk if err is None])
        failures = cfg.replications - pv.size
        rate = float(np.mean(pv < TEST_LEVEL)) if pv.size else float("nan")
        stderr = float(np.sqrt(rate * (1 - rate) / pv.size)) if pv.size else float("nan")
        rows.append(RejectionRow(c, rate, stderr, int(pv.size), int(failures)))
    return rows


# -- selection studies -------------------------------------------------------


def selection_metrics(selected, active, d: int) -> tuple:
    """``(cs, is, ce, ie)`` counts for one replication (0-based index sets)."""
    sel = as_index_set(selected, d)
    act = as_index_set(active, d)
    inactive = frozenset(range(d)) - act
    return len(sel & act), len(sel - act), len(inactive - sel), len(act - sel)


@dataclass(frozen=True, eq=False)
class SelectionMetrics:
    """Averages over successful replications of a selection study."""

    mean_cs: float
    mean_is: float
    mean_ce: float
    mean_ie: float
    per_covariate_freq: np.ndarray
    replications: int
    failures: int
    active: tuple = ()
    errors: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "cs": self.mean_cs,
            "is": self.mean_is,
            "ce": self.mean_ce,
            "ie": self.mean_ie,
            "per_covariate_freq": self.per_covariate_freq.tolist(),
            "replications": self.replications,
            "failures": self.failures,
            "active": list(self.active),
        }


def _select_once(job):
    cfg, rep = job

    def run():
        model = SimModel(cfg.scenario, cfg.model_id, cfg.c_grid[0])
        series, panel = simulate_model(
            model, cfg.n, replication_seed(cfg.master_seed, 0, rep),
            rho=cfg.rho, shock=Shock.parse(cfg.shock), burnin=cfg.burnin,
            standardize_shocks=cfg.standardize_shocks,
        )
        return select_variables(series, panel, model.p, cfg.q, cfg.estimator(), cfg.k_n).selected

    return _safe(run)


def run_selection_study(cfg: StudyConfig) -> SelectionMetrics:
    """Repeat simulate-and-select ``cfg.replications`` times and average the metrics."""
    model = SimModel(cfg.scenario, cfg.model_id, cfg.c_grid[0])
    d = model.d
    active = model.active_set
    out = _map(_select_once, [(cfg, r) for r in range(cfg.replications)], worker_count(cfg.workers))
    chosen = [sel for sel, err in out if err is None]
    errors = tuple(err for _, err in out if err is not None)
    if not chosen:
        nan = float("nan")
        return SelectionMetrics(nan, nan, nan, nan, np.full(d, nan), 0, len(errors), tuple(sorted(active)), errors)
    counts = np.array([selection_metrics(sel, active, d) for sel in chosen], dtype=float)
    hits = np.zeros((len(chosen), d))
    for i, sel in enumerate(chosen):
        hits[i, list(sel)] = 1.0
    cs, is_, ce, ie = counts.mean(axis=0)
    return SelectionMetrics(
        float(cs), float(is_), float(ce), float(ie), hits.mean(axis=0),
        len(chosen), len(errors), tuple(sorted(active)), errors,
    )
