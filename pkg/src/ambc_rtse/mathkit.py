"""Special functions and quadrature used by the analytical BER formulas.

The regularized incomplete gamma function is evaluated with the classic
series / continued-fraction split, with every prefactor kept in log domain so
that shape parameters in the thousands do not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special

__all__ = [
    "DomainError",
    "ConvergenceError",
    "QuadratureSpec",
    "q_function",
    "q_inverse",
    "log_gamma",
    "upper_incomplete_gamma_regularized",
    "lower_incomplete_gamma_regularized",
    "log_gamma_pdf",
    "integrate",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class ConvergenceError(ArithmeticError):
    """Numerical procedure stopped before reaching its tolerance.

    ``estimate`` carries the best value obtained so far.
    """

    def __init__(self, message: str, estimate: float = math.nan):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def q_function(x):
    """Gaussian upper-tail probability Q(x) = P(Z > x).

    Accepts a scalar or an array; non-finite input raises DomainError.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"q_function needs finite input, got {x!r}")
    out = 0.5 * _special.erfc(arr / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_inverse(p: float) -> float:
    """Inverse of :func:`q_function` on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"q_inverse needs 0 < p < 1, got {p!r}")
    return float(-_special.ndtri(p))


def log_gamma(s: float) -> float:
    if not (math.isfinite(s) and s > 0):
        raise DomainError(f"log_gamma needs s > 0, got {s!r}")
    return math.lgamma(s)


def _check_gamma_args(s: float, x: float) -> None:
    if not (math.isfinite(s) and s > 0):
        raise DomainError(f"shape must be > 0, got {s!r}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"argument must be >= 0, got {x!r}")


def _log_prefactor(s: float, x: float) -> float:
    # log(x^s e^-x / Gamma(s))
    return s * math.log(x) - x - math.lgamma(s)


def _lower_series(s: float, x: float) -> float:
    """P(s, x) by the power series, valid (and fast) for x < s + 1."""
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return math.exp(_log_prefactor(s, x) + math.log(total))
    raise ConvergenceError("incomplete gamma series did not converge",
                           math.exp(_log_prefactor(s, x) + math.log(total)))


def _upper_continued_fraction(s: float, x: float) -> float:
    """Q(s, x) by the Lentz continued fraction, valid for x >= s + 1."""
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(s, x) + math.log(h))
    raise ConvergenceError("incomplete gamma continued fraction did not converge",
                           math.exp(_log_prefactor(s, x) + math.log(h)))


def upper_incomplete_gamma_regularized(s: float, x: float) -> float:
    """Q(s, x) = Gamma(s, x) / Gamma(s)."""
    s = float(s)
    x = float(x)
    _check_gamma_args(s, x)
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < s + 1.0:
        return max(0.0, 1.0 - _lower_series(s, x))
    return _upper_continued_fraction(s, x)


def lower_incomplete_gamma_regularized(s: float, x: float) -> float:
    """P(s, x) = 1 - Q(s, x), computed from whichever branch keeps accuracy."""
    s = float(s)
    x = float(x)
    _check_gamma_args(s, x)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return _lower_series(s, x)
    return max(0.0, 1.0 - _upper_continued_fraction(s, x))


def log_gamma_pdf(z: float, shape: float, scale: float) -> float:
    """Log density of a gamma variable with the given shape and scale."""
    if z < 0:
        return -math.inf
    if z == 0:
        if shape == 1:
            return -math.log(scale)
        return -math.inf if shape > 1 else math.inf
    return (shape - 1.0) * math.log(z) - z / scale - shape * math.log(scale) - math.lgamma(shape)


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    Raises ConvergenceError (with the best estimate attached) when the
    subdivision budget runs out before the requested tolerance is met.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integration limits must be finite")
    if a > b:
        raise DomainError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    inner = None
    if points is not None:
        inner = sorted(p for p in points if a < p < b) or None
    out = _integrate.quad(
        f, a, b,
        epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=spec.max_subdivisions, points=inner, full_output=1,
    )
    value, abserr = out[0], out[1]
    if len(out) > 3:
        # ier != 0: QUADPACK attached a diagnostic message
        tol = max(spec.abs_tol, spec.rel_tol * abs(value))
        if abserr > tol:
            raise ConvergenceError(f"quadrature did not converge: {out[3]}", value)
    return float(value)
