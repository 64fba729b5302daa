"""Monte Carlo inner loops.

Each kernel has a numba version and a plain numpy version with identical
results.  Set ``AMBC_RTSE_DISABLE_NUMBA=1`` to force the numpy path (numba is
also skipped silently when it is not installed).
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("AMBC_RTSE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# --- window energies ------------------------------------------------------

def _window_energies_np(bits, s, w, h, mu, N, shift):
    """Energies of the K payload windows of each block.

    bits: (B, K+2) int8; s, w: (B, (K+2)*N) complex; returns (B, K) float64.
    """
    B, L = s.shape
    K = bits.shape[1] - 2
    coef = np.where(bits.astype(bool), mu, h)
    y = np.repeat(coef, N, axis=1) * s + w
    p = y.real * y.real + y.imag * y.imag
    start = N + shift
    return p[:, start:start + K * N].reshape(B, K, N).sum(axis=2)


def _case_energies_np(coef, s, w):
    """Energies of forced windows: coef (N,), s and w (M, N) complex -> (M,)."""
    y = coef[None, :] * s + w
    return (y.real * y.real + y.imag * y.imag).sum(axis=1)


def _count_errors_np(energy, truth, adjacent, thresholds, order_flag):
    """Errors per (threshold, case) for the decision rule with >= semantics.

    Returns (errors (G, 4), totals (4,)) with case index 2*adjacent + truth.
    """
    case = 2 * adjacent.astype(np.int64) + truth.astype(np.int64)
    G = thresholds.size
    errors = np.zeros((G, 4), dtype=np.int64)
    totals = np.zeros(4, dtype=np.int64)
    for c in range(4):
        e = np.sort(energy[case == c])
        totals[c] = e.size
        # number of energies strictly below each threshold -> decided "low"
        below = np.searchsorted(e, thresholds, side="left")
        truth_bit = c & 1
        low_bit = 0 if order_flag else 1
        errors[:, c] = below if truth_bit != low_bit else e.size - below
    return errors, totals


if HAVE_NUMBA:

    @njit(cache=True)
    def _window_energies_nb(bits, s, w, h, mu, N, shift):  # pragma: no cover - jitted
        B = s.shape[0]
        K = bits.shape[1] - 2
        out = np.empty((B, K))
        for b in range(B):
            for k in range(K):
                acc = 0.0
                start = (k + 1) * N + shift
                for n in range(start, start + N):
                    c = mu if bits[b, n // N] else h
                    y = c * s[b, n] + w[b, n]
                    acc += y.real * y.real + y.imag * y.imag
                out[b, k] = acc
        return out

    @njit(cache=True)
    def _case_energies_nb(coef, s, w):  # pragma: no cover - jitted
        M, N = s.shape
        out = np.empty(M)
        for m in range(M):
            acc = 0.0
            for n in range(N):
                y = coef[n] * s[m, n] + w[m, n]
                acc += y.real * y.real + y.imag * y.imag
            out[m] = acc
        return out

    @njit(cache=True)
    def _count_errors_nb(energy, truth, adjacent, thresholds, order_flag):  # pragma: no cover
        G = thresholds.size
        errors = np.zeros((G, 4), dtype=np.int64)
        totals = np.zeros(4, dtype=np.int64)
        order = np.argsort(thresholds)
        ts = thresholds[order]
        for m in range(energy.size):
            c = 2 * adjacent[m] + truth[m]
            totals[c] += 1
            high = (truth[m] == 1) == order_flag  # truth sits on the ">=" side
            # first threshold index with ts[idx] > energy: decision is ">=" for idx < pos
            e = energy[m]
            lo, hi = 0, G
            while lo < hi:
                mid = (lo + hi) // 2
                if ts[mid] <= e:
                    lo = mid + 1
                else:
                    hi = mid
            if high:
                for g in range(lo, G):
                    errors[order[g], c] += 1
            else:
                for g in range(lo):
                    errors[order[g], c] += 1
        return errors, totals


def window_energies(bits, s, w, h, mu, N, shift):
    bits = np.ascontiguousarray(bits, dtype=np.int8)
    s = np.ascontiguousarray(s, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    if HAVE_NUMBA:
        return _window_energies_nb(bits, s, w, complex(h), complex(mu), int(N), int(shift))
    return _window_energies_np(bits, s, w, complex(h), complex(mu), int(N), int(shift))


def case_energies(coef, s, w):
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    s = np.ascontiguousarray(s, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    if HAVE_NUMBA:
        return _case_energies_nb(coef, s, w)
    return _case_energies_np(coef, s, w)


def count_errors(energy, truth, adjacent, thresholds, order_flag):
    energy = np.ascontiguousarray(energy, dtype=np.float64).ravel()
    truth = np.ascontiguousarray(truth, dtype=np.int64).ravel()
    adjacent = np.ascontiguousarray(adjacent, dtype=np.int64).ravel()
    thresholds = np.ascontiguousarray(np.atleast_1d(thresholds), dtype=np.float64)
    if HAVE_NUMBA:
        return _count_errors_nb(energy, truth, adjacent, thresholds, bool(order_flag))
    return _count_errors_np(energy, truth, adjacent, thresholds, bool(order_flag))
