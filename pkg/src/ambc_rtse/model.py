"""System parameters, channel realizations and received-sample synthesis.

A block carries ``K`` payload symbols of the backscatter tag plus one guard
symbol on each side, each symbol spanning ``N`` source samples.  The receiver
cuts one ``N``-sample window per payload symbol; under a residual timing
error of ``n_a`` samples the window slides left (``rtse_sign = -1``, it opens
inside the previous symbol) or right (``+1``, it closes inside the next one).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .mathkit import DomainError

__all__ = [
    "SourceKind",
    "COMPLEX_GAUSSIAN",
    "psk",
    "SystemParams",
    "ChannelState",
    "SymbolStream",
    "derive_channel_state",
    "channel_for_variances",
    "eta_from_db",
    "make_rng",
    "draw_bits",
    "draw_source",
    "draw_noise",
    "synthesize_stream",
    "random_stream",
    "window",
    "windows",
    "case_coefficients",
    "write_stream",
    "read_stream_samples",
]


@dataclass(frozen=True)
class SourceKind:
    """Ambient source model: circular complex Gaussian or constant-modulus M-PSK."""

    kind: str = "complex_gaussian"
    order: int = 0

    def __post_init__(self):
        if self.kind == "complex_gaussian":
            if self.order != 0:
                raise DomainError("complex_gaussian source takes no order")
        elif self.kind == "psk":
            if self.order < 2:
                raise DomainError(f"PSK order must be >= 2, got {self.order}")
        else:
            raise DomainError(f"unknown source kind {self.kind!r}")

    @property
    def is_psk(self) -> bool:
        return self.kind == "psk"

    def __str__(self) -> str:
        return f"psk{self.order}" if self.is_psk else "gaussian"

    @classmethod
    def parse(cls, text: str) -> "SourceKind":
        t = str(text).strip().lower().replace("-", "").replace("_", "")
        if t in ("gaussian", "complexgaussian", "cg"):
            return COMPLEX_GAUSSIAN
        if t.startswith("psk"):
            return psk(int(t[3:] or 4))
        raise DomainError(f"cannot parse source kind {text!r}")


COMPLEX_GAUSSIAN = SourceKind()


def psk(order: int) -> SourceKind:
    return SourceKind("psk", int(order))


def eta_from_db(attenuation_db: float) -> complex:
    """Tag attenuation given in dB of power loss, as a complex amplitude factor."""
    return complex(10.0 ** (-attenuation_db / 20.0))


@dataclass(frozen=True)
class SystemParams:
    samples_per_symbol: int = 100
    symbols_per_block: int = 100
    source_power: float = 100.0
    noise_power: float = 1.0
    bt_attenuation: complex = field(default_factory=lambda: eta_from_db(1.1))
    rtse_magnitude: int = 0
    rtse_sign: int = 0
    source: SourceKind = COMPLEX_GAUSSIAN

    def __post_init__(self):
        N, K = self.samples_per_symbol, self.symbols_per_block
        if int(N) != N or N < 2:
            raise DomainError(f"samples_per_symbol must be an integer >= 2, got {N}")
        if int(K) != K or K < 4 or K % 4:
            raise DomainError(f"symbols_per_block must be >= 4 and divisible by 4, got {K}")
        if not (self.source_power >= 0 and math.isfinite(self.source_power)):
            raise DomainError("source_power must be finite and >= 0")
        if not (self.noise_power > 0 and math.isfinite(self.noise_power)):
            raise DomainError("noise_power must be finite and > 0")
        if not np.isfinite(complex(self.bt_attenuation)):
            raise DomainError("bt_attenuation must be finite")
        na = self.rtse_magnitude
        if int(na) != na or na < 0 or 2 * na >= N:
            raise DomainError(f"rtse_magnitude must be an integer in [0, N/2), got {na}")
        if self.rtse_sign not in (-1, 0, 1):
            raise DomainError(f"rtse_sign must be -1, 0 or +1, got {self.rtse_sign}")
        if (na == 0) != (self.rtse_sign == 0):
            raise DomainError("rtse_sign must be 0 exactly when rtse_magnitude is 0")
        object.__setattr__(self, "samples_per_symbol", int(N))
        object.__setattr__(self, "symbols_per_block", int(K))
        object.__setattr__(self, "rtse_magnitude", int(na))
        object.__setattr__(self, "bt_attenuation", complex(self.bt_attenuation))

    @property
    def N(self) -> int:
        return self.samples_per_symbol

    @property
    def K(self) -> int:
        return self.symbols_per_block

    @property
    def n_a(self) -> int:
        return self.rtse_magnitude

    @property
    def shift(self) -> int:
        """Signed window offset in samples relative to the aligned window."""
        return self.rtse_sign * self.rtse_magnitude

    @property
    def snr(self) -> float:
        return self.source_power / self.noise_power

    @property
    def block_length(self) -> int:
        return (self.symbols_per_block + 2) * self.samples_per_symbol

    def with_rtse(self, n_a: int, sign: int = -1) -> "SystemParams":
        return replace(self, rtse_magnitude=int(n_a), rtse_sign=(sign if n_a else 0))

    def with_snr_db(self, snr_db: float) -> "SystemParams":
        return replace(self, source_power=self.noise_power * 10.0 ** (snr_db / 10.0))

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelState:
    """Channel coefficients and the per-sample received powers they imply."""

    h: complex
    f: complex
    g: complex
    eta: complex
    source_power: float
    noise_power: float

    @property
    def mu(self) -> complex:
        return self.h + self.eta * self.f * self.g

    @property
    def sigma0_sq(self) -> float:
        return abs(self.h) ** 2 * self.source_power + self.noise_power

    @property
    def sigma1_sq(self) -> float:
        return abs(self.mu) ** 2 * self.source_power + self.noise_power

    @property
    def sigma_min_sq(self) -> float:
        return min(self.sigma0_sq, self.sigma1_sq)

    @property
    def sigma_max_sq(self) -> float:
        return max(self.sigma0_sq, self.sigma1_sq)

    @property
    def xi0(self) -> float:
        return self.noise_power * (2.0 * self.sigma0_sq - self.noise_power)

    @property
    def xi1(self) -> float:
        return self.noise_power * (2.0 * self.sigma1_sq - self.noise_power)

    @property
    def xi_min(self) -> float:
        return min(self.xi0, self.xi1)

    @property
    def xi_max(self) -> float:
        return max(self.xi0, self.xi1)

    @property
    def order_flag(self) -> bool:
        """True when sigma0^2 <= sigma1^2 (a reflecting tag raises the received power)."""
        return self.sigma0_sq <= self.sigma1_sq

    def sigma_sq(self, bit: int) -> float:
        return self.sigma1_sq if bit else self.sigma0_sq

    def coefficient(self, bit: int) -> complex:
        return self.mu if bit else self.h

    def at_snr(self, params: SystemParams) -> "ChannelState":
        """Same coefficients, powers taken from ``params``."""
        return replace(self, source_power=params.source_power,
                       noise_power=params.noise_power, eta=params.bt_attenuation)


def derive_channel_state(h: complex, f: complex, g: complex, params: SystemParams) -> ChannelState:
    vals = [complex(h), complex(f), complex(g)]
    if not all(np.isfinite(v) for v in vals):
        raise DomainError("channel coefficients must be finite")
    if params.noise_power <= 0:
        raise DomainError("noise power must be positive")
    return ChannelState(vals[0], vals[1], vals[2], params.bt_attenuation,
                        params.source_power, params.noise_power)


def channel_for_variances(sigma0_sq: float, sigma1_sq: float, params: SystemParams) -> ChannelState:
    """Real-valued channel that produces the requested per-sample powers.

    Useful for tests stated in terms of sigma0^2 and sigma1^2; requires both to
    be at least the noise power and a nonzero tag attenuation when they differ.
    """
    nw, ps = params.noise_power, params.source_power
    if sigma0_sq < nw or sigma1_sq < nw:
        raise DomainError("received powers cannot be below the noise power")
    if ps <= 0 and (sigma0_sq != nw or sigma1_sq != nw):
        raise DomainError("zero source power only supports noise-only powers")
    h = math.sqrt((sigma0_sq - nw) / ps) if ps > 0 else 0.0
    mu = math.sqrt((sigma1_sq - nw) / ps) if ps > 0 else 0.0
    eta = params.bt_attenuation
    if mu != h and eta == 0:
        raise DomainError("eta = 0 cannot produce distinct powers")
    g = (mu - h) / eta if eta != 0 else 0.0
    return derive_channel_state(h, 1.0, g, params)


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Counter-based generator for the work unit identified by ``keys``.

    Streams for different keys are independent, and a unit's draws do not
    depend on which worker produces it or in what order.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def draw_bits(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.int8)


def _complex_normal(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian samples with E|z|^2 = power."""
    shape = tuple(shape) if isinstance(shape, tuple) else (int(shape),)
    z = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    z *= math.sqrt(power / 2.0)
    return z


def draw_source(rng: np.random.Generator, shape, params: SystemParams) -> np.ndarray:
    src = params.source
    if src.is_psk:
        k = rng.integers(0, src.order, size=shape)
        return math.sqrt(params.source_power) * np.exp(2j * np.pi * k / src.order)
    return _complex_normal(rng, shape, params.source_power)


def draw_noise(rng: np.random.Generator, shape, params: SystemParams) -> np.ndarray:
    return _complex_normal(rng, shape, params.noise_power)


@dataclass(frozen=True)
class SymbolStream:
    """One block: guard + K payload + guard symbols and the samples they produce."""

    bits: np.ndarray
    samples: np.ndarray
    params: SystemParams
    channel: ChannelState
    seed: int

    @property
    def payload_bits(self) -> np.ndarray:
        return self.bits[1:-1]

    def adjacent_bits(self) -> np.ndarray:
        """Neighbour whose samples leak into each payload window.

        B(k-1) for a left shift, B(k+1) for a right shift; with no timing error
        the previous symbol is reported (it has no effect on the window).
        """
        if self.params.rtse_sign > 0:
            return self.bits[2:]
        return self.bits[:-2]


def _coef_per_sample(bits: np.ndarray, channel: ChannelState, N: int) -> np.ndarray:
    coef = np.where(bits.astype(bool), channel.mu, channel.h)
    return np.repeat(coef, N, axis=-1)


def synthesize_stream(params: SystemParams, channel: ChannelState, bits, seed: int = 0) -> SymbolStream:
    """Received samples for explicitly given tag bits (length K + 2, guards included)."""
    bits = np.asarray(bits)
    if bits.shape != (params.K + 2,):
        raise DomainError(f"expected {params.K + 2} bits, got shape {bits.shape}")
    if not np.all((bits == 0) | (bits == 1)):
        raise DomainError("bits must be 0 or 1")
    bits = bits.astype(np.int8)
    rng = make_rng(seed, 1)
    L = params.block_length
    s = draw_source(rng, L, params)
    w = draw_noise(rng, L, params)
    y = _coef_per_sample(bits, channel, params.N) * s + w
    bits.flags.writeable = False
    y.flags.writeable = False
    return SymbolStream(bits, y, params, channel, int(seed))


def random_stream(params: SystemParams, channel: ChannelState, seed: int = 0) -> SymbolStream:
    """Stream with i.i.d. equiprobable tag bits drawn from ``seed``."""
    bits = draw_bits(make_rng(seed, 0), params.K + 2)
    return synthesize_stream(params, channel, bits, seed)


def window(stream: SymbolStream, k: int) -> np.ndarray:
    """Samples the receiver attributes to payload symbol ``k`` (1-based)."""
    p = stream.params
    if not 1 <= k <= p.K:
        raise IndexError(f"payload index {k} outside 1..{p.K}")
    start = k * p.N + p.shift
    return stream.samples[start:start + p.N]


def windows(stream: SymbolStream) -> np.ndarray:
    """All K windows as a (K, N) array."""
    p = stream.params
    start = p.N + p.shift
    return stream.samples[start:start + p.K * p.N].reshape(p.K, p.N)


def case_coefficients(case: tuple[int, int], channel: ChannelState, params: SystemParams) -> np.ndarray:
    """Per-sample channel coefficient inside a window of case (adjacent i, current j)."""
    i, j = case
    N, na = params.N, params.n_a
    coef = np.full(N, channel.coefficient(j), dtype=complex)
    if na:
        if params.rtse_sign < 0:
            coef[:na] = channel.coefficient(i)
        else:
            coef[N - na:] = channel.coefficient(i)
    return coef


def write_stream(stream: SymbolStream, path, fmt: str | None = None) -> Path:
    """Dump samples as interleaved (re, im) float64, raw binary or CSV."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    inter = np.empty(2 * stream.samples.size, dtype="<f8")
    inter[0::2] = stream.samples.real
    inter[1::2] = stream.samples.imag
    if fmt == "bin":
        inter.tofile(path)
    elif fmt == "csv":
        np.savetxt(path, inter.reshape(-1, 2), delimiter=",", header="re,im", comments="", fmt="%.17g")
    else:
        raise DomainError(f"unknown stream format {fmt!r}")
    return path


def read_stream_samples(path, fmt: str | None = None) -> np.ndarray:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    if fmt == "bin":
        inter = np.fromfile(path, dtype="<f8")
    else:
        inter = np.loadtxt(path, delimiter=",", skiprows=1).ravel()
    return inter[0::2] + 1j * inter[1::2]
