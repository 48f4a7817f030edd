"""Central finite-difference gradient checking, the house test oracle."""

import numpy as np

from ..errors import NumericError


def central_diff(f, x, eps=1e-5):
    """Central-difference gradient estimate of a scalar map at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        old = xf[i]
        xf[i] = old + eps
        fp = float(f(x))
        xf[i] = old - eps
        fm = float(f(x))
        xf[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite f at coordinate {i}", (fp, fm))
        flat[i] = (fp - fm) / (2.0 * eps)
    return grad


def finite_diff_check(f, x, analytic, eps=1e-5):
    """Max over coordinates of |analytic - central| / max(1, |central|)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = central_diff(f, x, eps)
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
