"""Analytical BER and threshold formulas for the energy detector.

Notation: a window of N samples holds ``n_a`` samples of the adjacent symbol
(bit i) and ``N - n_a`` samples of the current symbol (bit j).  For a complex
Gaussian source each sample energy is exponential with mean sigma_b^2, so the
window energy of case (i, j) is Gamma(n_a, sigma_i^2) + Gamma(N - n_a, sigma_j^2).

Functions taking ``params`` read N and n_a from it; most accept an ``n_a``
override (real values allowed for the Gaussian-approximation formulas).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import stats as _stats

from .detector import CASES, Threshold
from .mathkit import (
    ConvergenceError,
    DomainError,
    QuadratureSpec,
    integrate,
    log_gamma_pdf,
    lower_incomplete_gamma_regularized,
    q_function,
    upper_incomplete_gamma_regularized,
)
from .model import ChannelState, SystemParams

__all__ = [
    "GaussianStat",
    "BerBreakdown",
    "perfect_ber",
    "perfect_ber_exact",
    "perfect_opt_threshold",
    "exact_case_pdf",
    "exact_case_cdf",
    "exact_ber",
    "closed_form_case_pdf",
    "closed_form_case_cdf",
    "closed_form_exact_ber",
    "gaussian_stats",
    "approx_ber",
    "ber_difference",
    "ber_difference_upper_bound",
    "conditional_opt_thresholds",
    "balance_residuals",
    "near_opt_threshold",
    "ml_conditional_thresholds",
    "ml_density_residual",
    "conditional_error_rates",
    "ber_floor",
    "psk_perfect_ber",
    "psk_opt_threshold",
    "psk_approx_ber",
    "psk_near_opt_threshold",
    "psk_conditional_opt_thresholds",
    "psk_exact_ber",
    "psk_analytics",
]

# Exact-theory quadrature: relative accuracy only, tail probabilities can be tiny.
EXACT_QUADRATURE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-11, max_subdivisions=500)
_TRUNCATION = 1e-18
_NEAR_EQUAL = 1e-6


@dataclass(frozen=True)
class GaussianStat:
    mean: float
    variance: float
    i: int
    j: int


@dataclass(frozen=True)
class BerBreakdown:
    total: float
    per_case: dict
    method: str


def _n_a(params: SystemParams, n_a):
    na = params.n_a if n_a is None else n_a
    if na < 0 or na > params.N:
        raise DomainError(f"n_a must lie in [0, N], got {na}")
    return na


def _breakdown(per_case: dict, method: str) -> BerBreakdown:
    per_case = {k: min(1.0, max(0.0, float(v))) for k, v in per_case.items()}
    return BerBreakdown(sum(per_case.values()) / 4.0, per_case, method)


def _q_ratio(num: float, den: float) -> float:
    """Q(num / den) with num/0 read as +-inf and 0/0 as 0."""
    if den == 0:
        if num == 0:
            return 0.5
        return 0.0 if num > 0 else 1.0
    return q_function(num / den)


# --- perfect timing --------------------------------------------------------

def perfect_ber(gamma: float, channel: ChannelState, N: int) -> float:
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    rn = math.sqrt(N)
    return 0.5 * q_function((gamma - N * lo) / (rn * lo)) + 0.5 * q_function((N * hi - gamma) / (rn * hi))


def perfect_ber_exact(gamma: float, channel: ChannelState, N: int) -> float:
    """Perfect-timing BER from the exact gamma laws of the window energy."""
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    return 0.5 * upper_incomplete_gamma_regularized(N, gamma / lo) + \
        0.5 * lower_incomplete_gamma_regularized(N, gamma / hi)


def perfect_opt_threshold(channel: ChannelState, N: int) -> Threshold:
    s0, s1 = channel.sigma0_sq, channel.sigma1_sq
    return Threshold(2.0 * N * s0 * s1 / (s0 + s1), "perfect_opt")


# --- exact theory (complex Gaussian source) --------------------------------

def _components(case, channel: ChannelState, params: SystemParams, n_a=None):
    """Gamma (shape, scale) components of the window energy for ``case``."""
    i, j = case
    if i not in (0, 1) or j not in (0, 1):
        raise DomainError(f"case bits must be 0/1, got {case}")
    N = params.N
    na = _n_a(params, n_a)
    if int(na) != na:
        raise DomainError("exact theory needs an integer n_a")
    na = int(na)
    si, sj = channel.sigma_sq(i), channel.sigma_sq(j)
    if na == 0 or i == j or abs(si - sj) / channel.sigma0_sq < _NEAR_EQUAL:
        return [(N, sj)]
    if na == N:
        return [(N, si)]
    return [(na, si), (N - na, sj)]


def _gamma_tail(shape, scale, z, upper):
    x = z / scale
    if upper:
        return upper_incomplete_gamma_regularized(shape, x)
    return lower_incomplete_gamma_regularized(shape, x)


def _truncation_point(shape, scale):
    """u beyond which a Gamma(shape, scale) variable has negligible mass."""
    x = shape + 10.0 * math.sqrt(shape) + 10.0
    while upper_incomplete_gamma_regularized(shape, x) > _TRUNCATION:
        x *= 1.5
    return x * scale


def _breakpoints(lo, hi, *cands):
    return [c for c in cands if lo < c < hi]


def exact_case_cdf(z: float, case, channel: ChannelState, params: SystemParams,
                   upper: bool = False, n_a=None, spec: QuadratureSpec = EXACT_QUADRATURE) -> float:
    """P(Gamma <= z), or P(Gamma > z) with ``upper``, for window case (i, j).

    The mixed case conditions on the adjacent-symbol energy u:
    P(X1 + X2 <= z) = int_0^z f1(u) P2(z - u) du and
    P(X1 + X2 > z) = Q1(z) + int_0^z f1(u) Q2(z - u) du,
    so each tail is computed directly without cancellation.
    """
    if z < 0:
        raise DomainError("energy must be >= 0")
    comps = _components(case, channel, params, n_a)
    if len(comps) == 1:
        return _gamma_tail(*comps[0], z, upper)
    if z == 0:
        return 1.0 if upper else 0.0
    (a1, s1), (a2, s2) = comps
    u_hi = min(z, _truncation_point(a1, s1))

    def integrand(u):
        lf = log_gamma_pdf(u, a1, s1)
        if lf == -math.inf:
            return 0.0
        t = _gamma_tail(a2, s2, z - u, upper)
        return math.exp(lf) * t if t > 0 else 0.0

    pts = _breakpoints(0.0, u_hi, (a1 - 1) * s1, z - a2 * s2)
    val = integrate(integrand, 0.0, u_hi, spec, pts)
    if upper:
        val += _gamma_tail(a1, s1, z, True)
    return min(1.0, max(0.0, val))


def exact_case_pdf(z: float, case, channel: ChannelState, params: SystemParams,
                   n_a=None, spec: QuadratureSpec = EXACT_QUADRATURE) -> float:
    """Density of the window energy for case (i, j).

    Mixed cases convolve the two gamma densities numerically, with the
    integrand rescaled by its maximum log value before exponentiation.
    """
    if z < 0:
        return 0.0
    comps = _components(case, channel, params, n_a)
    if len(comps) == 1:
        return math.exp(log_gamma_pdf(z, *comps[0]))
    if z == 0:
        return 0.0
    (a1, s1), (a2, s2) = comps

    def logf(u):
        return log_gamma_pdf(u, a1, s1) + log_gamma_pdf(z - u, a2, s2)

    grid = np.linspace(0.0, z, 257)[1:-1]
    peak = max(logf(u) for u in grid)
    if peak == -math.inf:
        return 0.0
    pts = _breakpoints(0.0, z, (a1 - 1) * s1, z - (a2 - 1) * s2, float(grid[np.argmax([logf(u) for u in grid])]))
    val = integrate(lambda u: math.exp(logf(u) - peak), 0.0, z, spec, pts)
    return val * math.exp(peak)


def _case_error(case, gamma, channel, cdf):
    """Conditional error probability of case (i, j) given tail evaluator ``cdf``."""
    j = case[1]
    # bit j is the low-energy hypothesis when its power is the smaller one
    low = (j == 0) == channel.order_flag
    return cdf(case, upper=low)


def exact_ber(gamma: float, channel: ChannelState, params: SystemParams, n_a=None,
              spec: QuadratureSpec = EXACT_QUADRATURE) -> BerBreakdown:
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    cdf = lambda case, upper: exact_case_cdf(gamma, case, channel, params, upper, n_a, spec)
    return _breakdown({c: _case_error(c, gamma, channel, cdf) for c in CASES}, "exact")


# Closed-form mixed density, evaluated in multiprecision.  Stable for small N only.

def _mp_partial_integral(s: int, c, z):
    """int_0^z t^(s-1) exp(-c t) dt for either sign of c."""
    if c > 0:
        return mpmath.gammainc(s, 0, c * z) / c ** s
    if c == 0:
        return z ** s / s
    return z ** s / s * mpmath.hyp1f1(s, s + 1, -c * z)


def _closed_mixed_pdf(z, na: int, m: int, alpha_adj, beta_cur):
    # density of Gamma(na, 2/alpha_adj) + Gamma(m, 2/beta_cur)
    N = na + m
    c = (beta_cur - alpha_adj) / 2
    acc = mpmath.mpf(0)
    for k in range(na):
        acc += mpmath.binomial(na - 1, k) * (-1) ** k * z ** (na - 1 - k) * _mp_partial_integral(m + k, c, z)
    pref = alpha_adj ** na * beta_cur ** m * mpmath.exp(-alpha_adj * z / 2)
    return pref * acc / (2 ** N * mpmath.gamma(na) * mpmath.gamma(m))


def closed_form_case_pdf(z: float, case, channel: ChannelState, params: SystemParams,
                         n_a=None, dps: int = 50) -> float:
    with mpmath.workdps(dps):
        return float(_closed_case_pdf_mp(mpmath.mpf(z), case, channel, params, n_a))


def _closed_case_pdf_mp(z, case, channel, params, n_a):
    comps = _components(case, channel, params, n_a)
    if len(comps) == 1:
        shape, scale = comps[0]
        scale = mpmath.mpf(scale)
        return z ** (shape - 1) * mpmath.exp(-z / scale) / (scale ** shape * mpmath.gamma(shape))
    (na, si), (m, sj) = comps
    return _closed_mixed_pdf(z, na, m, 2 / mpmath.mpf(si), 2 / mpmath.mpf(sj))


def closed_form_case_cdf(z: float, case, channel: ChannelState, params: SystemParams,
                         upper: bool = False, n_a=None, dps: int = 50) -> float:
    """CDF from the closed-form density, integrated in multiprecision."""
    if z < 0:
        raise DomainError("energy must be >= 0")
    with mpmath.workdps(dps):
        comps = _components(case, channel, params, n_a)
        zz = mpmath.mpf(z)
        if len(comps) == 1:
            shape, scale = comps[0]
            lower = mpmath.gammainc(shape, 0, zz / scale, regularized=True)
        else:
            lower = mpmath.quad(lambda t: _closed_case_pdf_mp(t, case, channel, params, n_a),
                                mpmath.linspace(0, zz, 9)) if zz > 0 else mpmath.mpf(0)
        return float(1 - lower) if upper else float(lower)


def closed_form_exact_ber(gamma: float, channel: ChannelState, params: SystemParams,
                          n_a=None, dps: int = 50) -> BerBreakdown:
    cdf = lambda case, upper: closed_form_case_cdf(gamma, case, channel, params, upper, n_a, dps)
    return _breakdown({c: _case_error(c, gamma, channel, cdf) for c in CASES}, "exact")


# --- Gaussian approximation ------------------------------------------------

def _stats_generic(s0, s1, v0, v1, N, na):
    pw = {0: s0, 1: s1}
    var = {0: v0, 1: v1}
    out = {}
    for i, j in CASES:
        out[(i, j)] = GaussianStat(na * pw[i] + (N - na) * pw[j], na * var[i] + (N - na) * var[j], i, j)
    return out


def gaussian_stats(channel: ChannelState, params: SystemParams, n_a=None) -> dict:
    """Mean and variance of the window energy per case (i, j), complex Gaussian source."""
    na = _n_a(params, n_a)
    s0, s1 = channel.sigma0_sq, channel.sigma1_sq
    return _stats_generic(s0, s1, s0 * s0, s1 * s1, params.N, na)


def _four_terms(gamma, smin, smax, vmin, vmax, N, na):
    """The four Q terms in min/max form, in the order (pure-min, pure-max, mix-low, mix-high)."""
    m3 = na * smax + (N - na) * smin
    v3 = na * vmax + (N - na) * vmin
    m4 = na * smin + (N - na) * smax
    v4 = na * vmin + (N - na) * vmax
    return (
        _q_ratio(gamma - N * smin, math.sqrt(N * vmin)),
        _q_ratio(N * smax - gamma, math.sqrt(N * vmax)),
        _q_ratio(gamma - m3, math.sqrt(v3)),
        _q_ratio(m4 - gamma, math.sqrt(v4)),
    )


def _terms_to_cases(terms, order_flag):
    t1, t2, t3, t4 = terms
    if order_flag:  # bit 0 is the low-power hypothesis
        return {(0, 0): t1, (1, 1): t2, (1, 0): t3, (0, 1): t4}
    return {(1, 1): t1, (0, 0): t2, (0, 1): t3, (1, 0): t4}


def approx_ber(gamma: float, channel: ChannelState, params: SystemParams, n_a=None) -> BerBreakdown:
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    na = _n_a(params, n_a)
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    terms = _four_terms(gamma, lo, hi, lo * lo, hi * hi, params.N, na)
    return _breakdown(_terms_to_cases(terms, channel.order_flag), "approximate")


def ber_difference(channel: ChannelState, params: SystemParams, n_a=None) -> float:
    """BER increase caused by the timing error, both sides at the perfect-timing optimum."""
    g = perfect_opt_threshold(channel, params.N).value
    return approx_ber(g, channel, params, n_a).total - perfect_ber(g, channel, params.N)


def ber_difference_upper_bound(channel: ChannelState, params: SystemParams) -> float:
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    return 0.25 - 0.5 * q_function(math.sqrt(params.N) * (hi - lo) / (lo + hi))


# --- thresholds ------------------------------------------------------------

def _balanced(a: GaussianStat, b: GaussianStat) -> float:
    # equalizes (gamma - m_a)/sd_a and (m_b - gamma)/sd_b
    sa, sb = math.sqrt(a.variance), math.sqrt(b.variance)
    return (a.mean * sb + b.mean * sa) / (sa + sb)


def _conditional_generic(st):
    return _balanced(st[(0, 0)], st[(0, 1)]), _balanced(st[(1, 0)], st[(1, 1)])


def conditional_opt_thresholds(channel: ChannelState, params: SystemParams, n_a=None):
    """Thresholds that balance the two conditional error rates for each adjacent bit."""
    return _conditional_generic(gaussian_stats(channel, params, n_a))


def balance_residuals(thresholds, channel: ChannelState, params: SystemParams, n_a=None, psk=False):
    """Relative mismatch of the two Q arguments at each conditional threshold."""
    st = _psk_stats(channel, params, n_a) if psk else gaussian_stats(channel, params, n_a)
    out = []
    for i, g in zip((0, 1), thresholds):
        a, b = st[(i, 0)], st[(i, 1)]
        xa = (g - a.mean) / math.sqrt(a.variance)
        xb = (b.mean - g) / math.sqrt(b.variance)
        scale = max(abs(xa), abs(xb), 1e-300)
        out.append(abs(xa - xb) / scale if (xa or xb) else 0.0)
    return tuple(out)


def _near_opt_generic(smin, smax, vmin, vmax, N, na):
    rvmin, rvmax = math.sqrt(N * vmin), math.sqrt(N * vmax)
    v3 = na * vmax + (N - na) * vmin
    m3 = na * smax + (N - na) * smin
    v4 = na * vmin + (N - na) * vmax
    m4 = na * smin + (N - na) * smax
    r3, r4 = math.sqrt(v3), math.sqrt(v4)
    first = 0.5 * (N * smin * r4 + m4 * rvmin) / (rvmin + r4)
    second = 0.5 * (m3 * rvmax + N * smax * r3) / (r3 + rvmax)
    return first + second


def near_opt_threshold(channel: ChannelState, params: SystemParams, n_a=None) -> Threshold:
    na = _n_a(params, n_a)
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    return Threshold(_near_opt_generic(lo, hi, lo * lo, hi * hi, params.N, na), "near_opt")


def _ml_root(a: GaussianStat, b: GaussianStat) -> float:
    """Point where the two Gaussian densities are equal, between the means."""
    m0, v0, m1, v1 = a.mean, a.variance, b.mean, b.variance
    C = v1 / v0
    lnC = math.log(C)
    qa = C - 1.0
    qb = m1 - C * m0
    qc = C * m0 * m0 - m1 * m1 - v1 * lnC
    disc = C * (m1 - m0) ** 2 + (C - 1.0) * v1 * lnC
    sq = math.sqrt(max(disc, 0.0))
    # roots of qa z^2 + 2 qb z + qc = 0, cancellation-free
    q = -(qb + math.copysign(sq, qb)) if (qb or sq) else 0.0
    roots = []
    if q != 0.0:
        roots.append(qc / q)
    if qa != 0.0:
        roots.append(q / qa)
    if not roots:
        return 0.5 * (m0 + m1)
    plus = (-qb + sq) / qa if qa != 0.0 else None
    lo, hi = min(m0, m1), max(m0, m1)
    if plus is not None and lo <= plus <= hi:
        # printed branch, recomputed from the stable pair to avoid cancellation
        return min(roots, key=lambda r: abs(r - plus))
    inside = [r for r in roots if lo <= r <= hi]
    if inside:
        return inside[0]
    mid = 0.5 * (m0 + m1)
    return min(roots, key=lambda r: abs(r - mid))


def ml_conditional_thresholds(channel: ChannelState, params: SystemParams, n_a=None, psk=False):
    st = _psk_stats(channel, params, n_a) if psk else gaussian_stats(channel, params, n_a)
    return _ml_root(st[(0, 0)], st[(0, 1)]), _ml_root(st[(1, 0)], st[(1, 1)])


def ml_density_residual(thresholds, channel: ChannelState, params: SystemParams, n_a=None, psk=False):
    """Relative gap between the two Gaussian log-densities at each ML threshold."""
    st = _psk_stats(channel, params, n_a) if psk else gaussian_stats(channel, params, n_a)
    out = []
    for i, g in zip((0, 1), thresholds):
        lp = []
        for j in (0, 1):
            s = st[(i, j)]
            lp.append(-0.5 * (g - s.mean) ** 2 / s.variance - 0.5 * math.log(2 * math.pi * s.variance))
        out.append(abs(lp[0] - lp[1]) / max(abs(lp[0]), abs(lp[1]), 1.0))
    return tuple(out)


def conditional_error_rates(thresholds, channel: ChannelState, params: SystemParams, n_a=None, psk=False):
    """Gaussian-approximate error probability of each case (i, j).

    ``thresholds`` is one value or a pair indexed by the adjacent bit.
    """
    if np.ndim(thresholds) == 0:
        thresholds = (float(thresholds), float(thresholds))
    st = _psk_stats(channel, params, n_a) if psk else gaussian_stats(channel, params, n_a)
    out = {}
    for (i, j), s in st.items():
        g = thresholds[i]
        low = (j == 0) == channel.order_flag
        sd = math.sqrt(s.variance)
        out[(i, j)] = _q_ratio(g - s.mean, sd) if low else _q_ratio(s.mean - g, sd)
    return out


# --- high-SNR floor --------------------------------------------------------

def ber_floor(channel: ChannelState, params: SystemParams, n_a=None) -> float:
    """Limit of the approximate BER at the near-optimal threshold as SNR grows.

    Every Q argument is a ratio of degree-0 homogeneous expressions in the
    received powers, so the limit replaces sigma_b^2 with |c_b|^2.
    """
    na = _n_a(params, n_a)
    N = params.N
    a0, a1 = abs(channel.h) ** 2, abs(channel.mu) ** 2
    lo, hi = min(a0, a1), max(a0, a1)
    if hi == 0:
        return 0.5
    rvmin, rvmax = math.sqrt(N) * lo, math.sqrt(N) * hi
    r3 = math.sqrt(na * hi * hi + (N - na) * lo * lo)
    r4 = math.sqrt(na * lo * lo + (N - na) * hi * hi)
    m3 = na * hi + (N - na) * lo
    m4 = na * lo + (N - na) * hi
    first = 0.5 * (N * lo * r4 + m4 * rvmin) / (rvmin + r4) if rvmin + r4 > 0 else 0.0
    second = 0.5 * (m3 * rvmax + N * hi * r3) / (r3 + rvmax)
    g = first + second
    terms = (
        _q_ratio(g - N * lo, rvmin),
        _q_ratio(N * hi - g, rvmax),
        _q_ratio(g - m3, r3),
        _q_ratio(m4 - g, r4),
    )
    return sum(terms) / 4.0


# --- PSK source ------------------------------------------------------------

def _xi_pair(channel: ChannelState):
    x0, x1 = channel.xi0, channel.xi1
    if x0 <= 0 or x1 <= 0:
        raise DomainError("PSK energy variances must be positive")
    return x0, x1


def _psk_stats(channel: ChannelState, params: SystemParams, n_a=None) -> dict:
    na = _n_a(params, n_a)
    x0, x1 = _xi_pair(channel)
    return _stats_generic(channel.sigma0_sq, channel.sigma1_sq, x0, x1, params.N, na)


def psk_perfect_ber(gamma: float, channel: ChannelState, N: int) -> float:
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    _xi_pair(channel)
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    return 0.5 * q_function((gamma - N * lo) / math.sqrt(N * channel.xi_min)) + \
        0.5 * q_function((N * hi - gamma) / math.sqrt(N * channel.xi_max))


def psk_opt_threshold(channel: ChannelState, N: int) -> Threshold:
    _xi_pair(channel)
    lo, hi = channel.sigma_min_sq, channel.sigma_max_sq
    rx0, rx1 = math.sqrt(channel.xi_min), math.sqrt(channel.xi_max)
    return Threshold(N * (lo * rx1 + hi * rx0) / (rx0 + rx1), "perfect_opt")


def psk_approx_ber(gamma: float, channel: ChannelState, params: SystemParams, n_a=None) -> BerBreakdown:
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    _xi_pair(channel)
    na = _n_a(params, n_a)
    terms = _four_terms(gamma, channel.sigma_min_sq, channel.sigma_max_sq,
                        channel.xi_min, channel.xi_max, params.N, na)
    return _breakdown(_terms_to_cases(terms, channel.order_flag), "psk_approximate")


def psk_near_opt_threshold(channel: ChannelState, params: SystemParams, n_a=None) -> Threshold:
    _xi_pair(channel)
    na = _n_a(params, n_a)
    return Threshold(_near_opt_generic(channel.sigma_min_sq, channel.sigma_max_sq,
                                       channel.xi_min, channel.xi_max, params.N, na), "near_opt")


def psk_conditional_opt_thresholds(channel: ChannelState, params: SystemParams, n_a=None):
    return _conditional_generic(_psk_stats(channel, params, n_a))


def psk_exact_ber(gamma: float, channel: ChannelState, params: SystemParams, n_a=None) -> BerBreakdown:
    """Exact BER for a constant-modulus source.

    With |s(n)|^2 = P_s fixed, 2 Gamma / N_w is noncentral chi-square with 2N
    degrees of freedom and noncentrality 2 P_s sum|c_n|^2 / N_w.
    """
    if gamma < 0:
        raise DomainError("threshold must be >= 0")
    na = _n_a(params, n_a)
    N, P, nw = params.N, channel.source_power, channel.noise_power
    pw = {0: abs(channel.h) ** 2, 1: abs(channel.mu) ** 2}
    x = 2.0 * gamma / nw
    per = {}
    for i, j in CASES:
        nc = 2.0 * P * (na * pw[i] + (N - na) * pw[j]) / nw
        low = (j == 0) == channel.order_flag
        dist = _stats.ncx2(2 * N, nc) if nc > 0 else _stats.chi2(2 * N)
        per[(i, j)] = float(dist.sf(x) if low else dist.cdf(x))
    return _breakdown(per, "exact")


def psk_analytics(gamma: float, channel: ChannelState, params: SystemParams, n_a=None) -> dict:
    return {
        "psk_perfect_ber": psk_perfect_ber(gamma, channel, params.N),
        "psk_opt_threshold": psk_opt_threshold(channel, params.N),
        "psk_approx_ber": psk_approx_ber(gamma, channel, params, n_a),
        "psk_near_opt_threshold": psk_near_opt_threshold(channel, params, n_a),
    }
