"""NumPy implementation of the rotational heat-kernel series.

The compiled backend in ``_series_cy`` implements the same three entry
points with identical truncation semantics; either may be selected at
import time.  Sums run over l = 0..lmax inclusive.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 262144  # cap on theta-by-l temporary size


def _weights(eps: float, lmax: int) -> tuple[np.ndarray, np.ndarray]:
    ls = np.arange(lmax + 1, dtype=np.float64)
    return ls, (2.0 * ls + 1.0) * np.exp(-eps * ls * (ls + 1.0))


def series_f(theta: np.ndarray, eps: float, lmax: int, theta_small: float = 1e-4) -> np.ndarray:
    """Density series sum_l (2l+1) e^{-eps l(l+1)} sin((l+1/2)theta)/sin(theta/2).

    Below ``theta_small`` the continuous extension sum_l (2l+1)^2 e^{-...}
    is used.
    """
    theta = np.asarray(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    ls, w = _weights(eps, lmax)
    limit0 = float(np.sum(w * (2.0 * ls + 1.0)))
    out = np.empty_like(flat)
    step = max(1, _CHUNK // (lmax + 1))
    for i in range(0, flat.size, step):
        th = flat[i:i + step, None]
        small = th[:, 0] < theta_small
        ratio = np.sin((ls + 0.5) * th) / np.sin(0.5 * np.where(small[:, None], 1.0, th))
        vals = ratio @ w
        out[i:i + step] = np.where(small, limit0, vals)
    return out.reshape(theta.shape)


def series_df(theta: np.ndarray, eps: float, lmax: int) -> np.ndarray:
    """Angle derivative of the density series.

    Per-l terms are [(l+1) sin(l theta) - l sin((l+1) theta)] / (cos theta - 1).
    Valid for theta in (0, pi]; callers handle the small-angle branch.
    """
    theta = np.asarray(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    ls, w = _weights(eps, lmax)
    out = np.empty_like(flat)
    step = max(1, _CHUNK // (lmax + 1))
    for i in range(0, flat.size, step):
        th = flat[i:i + step, None]
        num = (ls + 1.0) * np.sin(ls * th) - ls * np.sin((ls + 1.0) * th)
        out[i:i + step] = (num / (np.cos(th) - 1.0)) @ w
    return out.reshape(theta.shape)


def series_moment(eps: float, lmax: int) -> float:
    """c(eps) = sum_l w_l (2l+1) l(l+1) / (3 sum_l w_l (2l+1)).

    Small-angle score slope: score -> -c(eps) * rotvec as theta -> 0.
    """
    ls, w = _weights(eps, lmax)
    num = float(np.sum(w * (2.0 * ls + 1.0) * ls * (ls + 1.0)))
    den = float(np.sum(w * (2.0 * ls + 1.0)))
    return num / (3.0 * den)
