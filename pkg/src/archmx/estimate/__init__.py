import numpy as np

from ..core import FittedModel
from ..errors import DimensionMismatch
from .kernel import (
    KernelConfig,
    KernelSurface,
    fit_partially_linear,
    kernel_weight_matrix,
    profile_least_squares,
    select_bandwidth,
)
from .smoothing import kernel_weights, smooth
from .spline import SplineConfig, SplineSurface, fit_bspline_qmle


def predict_m(fit: FittedModel, x):
    """Evaluate the fitted volatility surface at ``x``.

    ``x`` may be given in the fit's covariate space or, for a fit that
    excluded a covariate, in the full space (the excluded entry is ignored).
    """
    x = np.asarray(x, dtype=float)
    d = len(fit.columns)
    width = x.shape[-1] if x.ndim else 1
    if fit.excluded is not None and width == d + 1:
        x = np.delete(x, fit.excluded, axis=-1)
    elif width != d and not (d == 0 and x.size == 0):
        raise DimensionMismatch(f"fit uses {d} covariates, got {width}")
    return fit.m_hat(x)
