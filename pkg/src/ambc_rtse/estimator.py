"""Blind estimation of the received powers and timing offset from one block.

The K per-window average powers are sorted and split into quartiles; with
equiprobable bits the four quartiles collect, in order, the pure low-power
windows, the two mixed cases and the pure high-power windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detector import Threshold
from .mathkit import DomainError
from .model import SymbolStream, SystemParams, windows
from .theory import _near_opt_generic

__all__ = [
    "EstimationError",
    "EstimatedParams",
    "block_powers",
    "estimate_params",
    "estimated_threshold",
    "estimate_from_stream",
    "gamma_diff",
]


class EstimationError(ArithmeticError):
    """The block does not separate the two power levels."""


@dataclass(frozen=True)
class EstimatedParams:
    sigma_min_hat: float
    sigma_max_hat: float
    n_a_hat: float
    quartile_means: tuple
    n_a_raw: float = math.nan


def block_powers(wins) -> np.ndarray:
    """Average power of each window: A_k = sum |y|^2 / N."""
    w = np.asarray(wins)
    if w.ndim != 2 or w.shape[1] == 0:
        raise DomainError("expected a (K, N) array of windows")
    return (w.real ** 2 + w.imag ** 2).sum(axis=1) / w.shape[1]


def estimate_params(powers, N: int) -> EstimatedParams:
    A = np.asarray(powers, dtype=float).ravel()
    K = A.size
    if K < 4 or K % 4:
        raise DomainError(f"need a positive multiple of 4 powers, got {K}")
    E = np.sort(A, kind="stable").reshape(4, K // 4).mean(axis=1)
    e1, e2, e3, e4 = (float(x) for x in E)
    if e4 == e1:
        raise EstimationError("all window powers are equal; cannot separate the hypotheses")
    raw = 0.5 * N * (1.0 - (e3 - e2) / (e4 - e1))
    # keep the estimate inside [0, N/2)
    na = min(max(raw, 0.0), math.nextafter(0.5 * N, 0.0))
    return EstimatedParams(e1, e4, na, (e1, e2, e3, e4), raw)


def estimated_threshold(est: EstimatedParams, params: SystemParams,
                        noise_power: float | None = None) -> Threshold:
    """Near-optimal threshold from estimated quantities.

    For a PSK source the energy variances 2 sigma^2 - N_w need the noise
    power, which is taken as known (``noise_power`` or ``params.noise_power``).
    """
    lo, hi, na, N = est.sigma_min_hat, est.sigma_max_hat, est.n_a_hat, params.N
    if params.source.is_psk:
        nw = params.noise_power if noise_power is None else noise_power
        vlo, vhi = 2.0 * lo - nw, 2.0 * hi - nw
        if vlo <= 0 or vhi <= 0:
            raise EstimationError("estimated power below half the noise power")
        g = _near_opt_generic(lo, hi, vlo, vhi, N, na)
    else:
        g = _near_opt_generic(lo, hi, lo * lo, hi * hi, N, na)
    return Threshold(g, "near_opt_estimated")


def estimate_from_stream(stream: SymbolStream) -> EstimatedParams:
    return estimate_params(block_powers(windows(stream)), stream.params.N)


def gamma_diff(estimate: float, truth: float) -> float:
    """Relative threshold error |estimate - truth| / truth."""
    return abs(float(estimate) - float(truth)) / float(truth)
