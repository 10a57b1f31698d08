"""Product-kernel Nadaraya-Watson smoothing.

The estimators only ever need ``W @ Y`` for a handful of columns, so the
``(m, m)`` weight matrix is never materialised on the fitting path; the
compiled loops below accumulate kernel sums directly.  The dense builder
:func:`kernel_weights` exists for small problems and for checking the loops.
"""

from __future__ import annotations

import math
import os

import numpy as np
import numba
from numba import njit, prange

from ..errors import ZeroRowSum

KERNELS = {"gaussian": 0, "epanechnikov": 1}

# skip numba's TBB probe (it warns on old TBB builds); OpenMP or the
# portable workqueue layer is all the cross-evaluation loop needs
if numba.config.THREADING_LAYER == "default":
    try:
        from numba.np.ufunc import omppool  # noqa: F401

        numba.config.THREADING_LAYER = "omp"
    except ImportError:
        numba.config.THREADING_LAYER = "workqueue"


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("ARCHMX_THREADS", numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        return numba.config.NUMBA_NUM_THREADS


@njit(cache=True, fastmath=True)
def _row_weights(xs, i, j0, code, w):
    # kernel weights between scaled row i and rows j0..m-1, written into w[j0:]
    m, d = xs.shape
    if code == 0:
        for j in range(j0, m):
            s = 0.0
            for l in range(d):
                u = xs[i, l] - xs[j, l]
                s += u * u
            w[j] = -0.5 * s
        for j in range(j0, m):
            w[j] = math.exp(w[j])
    else:
        for j in range(j0, m):
            prod = 1.0
            for l in range(d):
                u = xs[i, l] - xs[j, l]
                prod *= max(0.0, 1.0 - u * u)
            w[j] = prod


@njit(cache=True, fastmath=True)
def _self_smooth(xs, y, code):
    # symmetric kernel: each unordered pair is evaluated once; the own
    # observation always has weight K(0) = 1
    m = xs.shape[0]
    k = y.shape[1]
    out = np.zeros((m, k))
    rowsum = np.zeros(m)
    w = np.empty(m)
    for i in range(m):
        _row_weights(xs, i, i + 1, code, w)
        acc = 1.0
        for j in range(i + 1, m):
            acc += w[j]
            rowsum[j] += w[j]
        rowsum[i] += acc
        for c in range(k):
            yic = y[i, c]
            a = yic
            for j in range(i + 1, m):
                a += w[j] * y[j, c]
                out[j, c] += w[j] * yic
            out[i, c] += a
    return out, rowsum


@njit(parallel=True, cache=True, fastmath=True)
def _cross_smooth(xe, xt, y, code):
    m, d = xe.shape
    nt = xt.shape[0]
    k = y.shape[1]
    out = np.zeros((m, k))
    rowsum = np.zeros(m)
    for i in prange(m):
        for j in range(nt):
            if code == 0:
                s = 0.0
                for l in range(d):
                    u = xe[i, l] - xt[j, l]
                    s += u * u
                wj = math.exp(-0.5 * s)
            else:
                wj = 1.0
                for l in range(d):
                    u = xe[i, l] - xt[j, l]
                    wj *= max(0.0, 1.0 - u * u)
            rowsum[i] += wj
            for c in range(k):
                out[i, c] += wj * y[j, c]
    return out, rowsum


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return np.ascontiguousarray(a)


def _h(bandwidth, d):
    return np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,))


def _prepare(x, bandwidth, kernel):
    x = _as_2d(x)
    h = _h(bandwidth, x.shape[1])
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise ValueError(f"bandwidths must be positive and finite, got {h}")
    try:
        code = KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None
    return x, np.ascontiguousarray(x / h), code


def smooth(x, y, bandwidth, kernel="gaussian", x_eval=None) -> np.ndarray:
    """Nadaraya-Watson fit of the columns of ``y`` on covariates ``x``.

    Parameters
    ----------
    x : ndarray of shape (m, d)
        Design points (``d`` may be zero, giving the plain mean).
    y : ndarray of shape (m,) or (m, k)
        Responses to smooth.
    bandwidth : float or ndarray of shape (d,)
        Per-dimension bandwidths of the product kernel.
    x_eval : ndarray of shape (q, d), optional
        Evaluation points.  Defaults to ``x`` itself (own observation included).

    Returns
    -------
    ndarray of shape (q, k) (or (q,) for 1-d ``y``)
    """
    x, xs, code = _prepare(x, bandwidth, kernel)
    y = np.asarray(y, dtype=float)
    vector = y.ndim == 1
    y2 = np.ascontiguousarray(y.reshape(len(y), -1))
    if x_eval is None:
        sums, rowsum = _self_smooth(xs, y2, code)
    else:
        xe = _as_2d(x_eval)
        if xe.shape[1] != x.shape[1]:
            raise ValueError(f"evaluation points have {xe.shape[1]} columns, design has {x.shape[1]}")
        xe_scaled = np.ascontiguousarray(xe / _h(bandwidth, x.shape[1]))
        numba.set_num_threads(min(_thread_cap(), numba.config.NUMBA_NUM_THREADS))
        sums, rowsum = _cross_smooth(xe_scaled, xs, y2, code)
    if np.any(rowsum <= 0):
        raise ZeroRowSum(
            f"{int(np.sum(rowsum <= 0))} evaluation point(s) receive no kernel weight; "
            "increase the bandwidth"
        )
    out = sums / rowsum[:, None]
    return out[:, 0] if vector else out


def kernel_weights(x, bandwidth, kernel="gaussian") -> np.ndarray:
    """Dense row-stochastic weight matrix ``diag(K 1)^{-1} K`` (own point included)."""
    x, xs, code = _prepare(x, bandwidth, kernel)
    u = xs[:, None, :] - xs[None, :, :]
    if code == 0:
        k = np.exp(-0.5 * np.sum(u**2, axis=2))
    else:
        k = np.prod(np.clip(1.0 - u**2, 0.0, None), axis=2)
    rowsum = k.sum(axis=1)
    if np.any(rowsum <= 0):
        raise ZeroRowSum("some rows of the kernel matrix sum to zero")
    return k / rowsum[:, None]
