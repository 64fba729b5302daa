"""Monte Carlo experiment runner.

Work is split into independent units (grid point, batch of blocks); each unit
draws from its own counter-based generator keyed by (seed, point, batch), and
integer error counts are reduced in unit order, so results do not depend on
the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats as _stats

from . import _kernels
from . import theory as th
from .detector import CASES, Threshold
from .estimator import EstimationError, estimate_params, estimated_threshold
from .mathkit import DomainError, q_inverse
from .model import (
    COMPLEX_GAUSSIAN,
    ChannelState,
    SourceKind,
    SystemParams,
    case_coefficients,
    derive_channel_state,
    draw_bits,
    draw_noise,
    draw_source,
    eta_from_db,
    make_rng,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "BerReport",
    "ExperimentResult",
    "POLICIES",
    "TEST_CHANNEL_HFG",
    "reference_channel_hfg",
    "run_ber_sweep",
    "run_pdf_experiment",
    "run_threshold_table",
    "run_estimator_accuracy",
    "run_balance_experiment",
    "run_floor_check",
    "write_csv",
    "format_csv",
]

POLICIES = ("perfect", "near_opt", "estimated", "ml", "manual")
MIN_BER_TRIALS = 10_000
_CHANNEL_KEY = 7_919  # key namespace for per-block random channels

# h = 1 and eta*f*g = 1 at the default 1.1 dB attenuation
TEST_CHANNEL_HFG = (1.0 + 0j, 1.0 + 0j, complex(1.0 / eta_from_db(1.1).real))

# Moderate-contrast reference operating point: perfect-timing BER and the
# perfect-timing optimal threshold at N = 100, SNR = 20 dB, N_w = 1.
_REF_BER = 0.00450097
_REF_THRESHOLD = 12558.0


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def reference_channel_hfg(N: int = 100, snr_db: float = 20.0, noise_power: float = 1.0,
                          eta_db: float = 1.1):
    """Real (h, f, g) reproducing the reference operating point."""
    r = q_inverse(_REF_BER) / math.sqrt(N)
    harmonic = _REF_THRESHOLD / N
    s0, s1 = harmonic / (1.0 + r), harmonic / (1.0 - r)
    P = noise_power * 10.0 ** (snr_db / 10.0)
    h = math.sqrt((s0 - noise_power) / P)
    mu = math.sqrt((s1 - noise_power) / P)
    return complex(h), 1.0 + 0j, complex((mu - h) / eta_from_db(eta_db).real)


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    channel_mode: str = "fixed"
    h: complex = TEST_CHANNEL_HFG[0]
    f: complex = TEST_CHANNEL_HFG[1]
    g: complex = TEST_CHANNEL_HFG[2]
    snr_db: tuple = (20.0,)
    n_a: tuple = (0,)
    N: tuple = ()
    eta_db: tuple = ()
    K: tuple = ()
    threshold_policy: str = "perfect"
    manual_threshold: float | None = None
    trials: int = 1_000_000
    seed: int = 0
    out: str | None = None
    workers: int = 1
    batch_blocks: int = 100
    gamma_span: float = 0.25
    gamma_points: int = 40
    runs: int = 100
    bins: int = 60
    cases: tuple = CASES
    rtse_sign: int = -1

    def validate(self, ber: bool = True) -> "ExperimentConfig":
        if self.channel_mode not in ("fixed", "random"):
            raise ConfigError(f"channel_mode must be 'fixed' or 'random', got {self.channel_mode!r}")
        if self.threshold_policy not in POLICIES:
            raise ConfigError(f"threshold_policy must be one of {POLICIES}")
        if self.threshold_policy == "manual" and self.manual_threshold is None:
            raise ConfigError("manual policy needs manual_threshold")
        if not self.snr_db or not self.n_a:
            raise ConfigError("snr_db and n_a grids must be non-empty")
        if ber and self.trials < MIN_BER_TRIALS:
            raise ConfigError(f"BER experiments need trials >= {MIN_BER_TRIALS}")
        if self.trials < 1 or self.runs < 1 or self.batch_blocks < 1 or self.workers < 1:
            raise ConfigError("trials, runs, batch_blocks and workers must be positive")
        if self.gamma_points < 2 or not 0 < self.gamma_span < 1:
            raise ConfigError("need gamma_points >= 2 and 0 < gamma_span < 1")
        if self.rtse_sign not in (-1, 1):
            raise ConfigError("rtse_sign must be -1 or +1")
        try:
            for _ in self.points():
                pass
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def points(self):
        """(index, params) for the cartesian product of the grids."""
        base = self.params
        Ns = self.N or (base.N,)
        Ks = self.K or (base.K,)
        etas = self.eta_db or (None,)
        idx = 0
        for N, K, eta, snr, na in itertools.product(Ns, Ks, etas, self.snr_db, self.n_a):
            p = base.replace(samples_per_symbol=int(N), symbols_per_block=int(K),
                             rtse_magnitude=0, rtse_sign=0)
            if eta is not None:
                p = p.replace(bt_attenuation=eta_from_db(eta))
            p = p.with_snr_db(snr).with_rtse(int(na), self.rtse_sign)
            yield idx, p, {"snr_db": float(snr), "eta_db": eta}
            idx += 1

    def channel(self, params: SystemParams) -> ChannelState:
        return derive_channel_state(self.h, self.f, self.g, params)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class BerReport:
    snr_db: float
    N: int
    K: int
    n_a: int
    eta_db: float
    source: str
    channel_mode: str
    policy: str
    threshold: float
    provenance: str
    trials: int
    errors: int
    empirical_ber: float
    std_err: float
    theory_exact: float
    theory_approx: float
    cond: dict

    def as_row(self) -> dict:
        row = {k: v for k, v in asdict(self).items() if k != "cond"}
        for (i, j), v in sorted(self.cond.items()):
            row[f"rate_{i}{j}"] = v
        return row


@dataclass
class ExperimentResult:
    rows: list
    extra: dict = field(default_factory=dict)  # suffix -> rows written beside the main CSV
    path: Path | None = None


# --- thresholds ------------------------------------------------------------

def policy_threshold(policy: str, channel: ChannelState, params: SystemParams,
                     manual: float | None = None) -> Threshold | None:
    """Threshold for ``policy``; None for the per-block estimated policy."""
    psk = params.source.is_psk
    if policy == "perfect":
        return th.psk_opt_threshold(channel, params.N) if psk else th.perfect_opt_threshold(channel, params.N)
    if policy == "near_opt":
        return th.psk_near_opt_threshold(channel, params) if psk else th.near_opt_threshold(channel, params)
    if policy == "ml":
        g0, g1 = th.ml_conditional_thresholds(channel, params, psk=psk)
        return Threshold(0.5 * (g0 + g1), "ml_conditional")
    if policy == "manual":
        return Threshold(float(manual), "manual")
    return None


def theory_pair(gamma: float, channel: ChannelState, params: SystemParams):
    """(exact, approximate) BER at ``gamma`` for the configured source."""
    if params.source.is_psk:
        return (th.psk_exact_ber(gamma, channel, params).total,
                th.psk_approx_ber(gamma, channel, params).total)
    return th.exact_ber(gamma, channel, params).total, th.approx_ber(gamma, channel, params).total


# --- Monte Carlo units -----------------------------------------------------

@dataclass(frozen=True)
class _Task:
    params: SystemParams
    channel: ChannelState | None  # None: random channel per block
    policy: str
    manual: float | None
    grid: tuple
    seed: int
    point: int
    batch: int
    first_block: int
    n_blocks: int
    estimate: bool


def _random_channel(seed: int, point: int, block: int, params: SystemParams) -> ChannelState:
    rng = make_rng(seed, _CHANNEL_KEY, point, block)
    z = rng.standard_normal((3, 2)) / math.sqrt(2.0)
    h, f, g = (complex(a, b) for a, b in z)
    return derive_channel_state(h, f, g, params)


def _draw_batch(rng, params: SystemParams, B: int):
    L = params.block_length
    bits = draw_bits(rng, (B, params.K + 2))
    s = draw_source(rng, (B, L), params)
    w = draw_noise(rng, (B, L), params)
    return bits, s, w


def _adjacent(bits: np.ndarray, sign: int) -> np.ndarray:
    return bits[:, 2:] if sign > 0 else bits[:, :-2]


def _case_errors_per_block(energy, truth, adj, thresholds, order_flag):
    """Errors by case with one threshold per block (rows of ``energy``)."""
    above = energy >= thresholds[:, None]
    decided = above if order_flag else ~above
    wrong = decided != truth.astype(bool)
    case = 2 * adj.astype(np.int64) + truth.astype(np.int64)
    return np.bincount(case[wrong], minlength=4).astype(np.int64)


def _run_task(task: _Task) -> dict:
    p = task.params
    rng = make_rng(task.seed, task.point, task.batch)
    bits, s, w = _draw_batch(rng, p, task.n_blocks)
    truth = bits[:, 1:-1]
    adj = _adjacent(bits, p.rtse_sign)
    case_all = 2 * adj.astype(np.int64) + truth.astype(np.int64)
    totals = np.bincount(case_all.ravel(), minlength=4).astype(np.int64)
    G = len(task.grid)
    out = {"errors": np.zeros(4, np.int64), "totals": totals, "grid": np.zeros((G, 4), np.int64),
           "thr_sum": 0.0, "n_thr": 0, "failed": 0, "failed_totals": np.zeros(4, np.int64),
           "estimates": []}

    if task.channel is not None:
        chans = [task.channel] * task.n_blocks
        energy = _kernels.window_energies(bits, s, w, task.channel.h, task.channel.mu, p.N, p.shift)
    else:
        chans = [_random_channel(task.seed, task.point, task.first_block + b, p) for b in range(task.n_blocks)]
        energy = np.empty((task.n_blocks, p.K))
        for b, ch in enumerate(chans):
            energy[b] = _kernels.window_energies(bits[b:b + 1], s[b:b + 1], w[b:b + 1], ch.h, ch.mu, p.N, p.shift)[0]

    thr = np.empty(task.n_blocks)
    ok = np.ones(task.n_blocks, dtype=bool)
    for b, ch in enumerate(chans):
        if task.estimate or task.policy == "estimated":
            try:
                est = estimate_params(energy[b] / p.N, p.N)
                g_hat = estimated_threshold(est, p).value
                out["estimates"].append((est.n_a_hat, g_hat))
            except EstimationError:
                out["estimates"].append((math.nan, math.nan))
                g_hat = math.nan
        if task.policy == "estimated":
            thr[b] = g_hat
            ok[b] = math.isfinite(g_hat)
        elif task.channel is None or b == 0:
            thr[b] = policy_threshold(task.policy, ch, p, task.manual).value
        else:
            thr[b] = thr[0]

    if task.channel is not None:
        order = np.full(task.n_blocks, task.channel.order_flag)
    else:
        order = np.array([ch.order_flag for ch in chans])
    for flag in (True, False):
        sel = ok & (order == flag)
        if sel.any():
            out["errors"] += _case_errors_per_block(energy[sel], truth[sel], adj[sel], thr[sel], flag)
    if not ok.all():
        out["failed"] = int((~ok).sum())
        out["failed_totals"] = np.bincount(case_all[~ok].ravel(), minlength=4).astype(np.int64)
    out["thr_sum"] = float(thr[ok].sum())
    out["n_thr"] = int(ok.sum())
    if G and task.channel is not None:
        ge, _ = _kernels.count_errors(energy, truth, adj, np.asarray(task.grid), task.channel.order_flag)
        out["grid"] = ge
    return out


def _execute(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=1))


def _tasks_for_point(cfg: ExperimentConfig, point: int, params: SystemParams, channel, grid=(),
                     policy=None, estimate=False, blocks=None):
    n_blocks = blocks if blocks is not None else max(1, math.ceil(cfg.trials / params.K))
    tasks = []
    first = 0
    for b in range(math.ceil(n_blocks / cfg.batch_blocks)):
        nb = min(cfg.batch_blocks, n_blocks - first)
        tasks.append(_Task(params, channel, policy or cfg.threshold_policy, cfg.manual_threshold,
                           tuple(float(x) for x in grid), int(cfg.seed), point, b, first, nb, estimate))
        first += nb
    return tasks


def _reduce(parts):
    acc = {"errors": np.zeros(4, np.int64), "totals": np.zeros(4, np.int64), "thr_sum": 0.0,
           "n_thr": 0, "failed": 0, "failed_totals": np.zeros(4, np.int64), "estimates": []}
    acc["grid"] = sum((p["grid"] for p in parts[1:]), parts[0]["grid"].copy()) if parts else None
    for p in parts:
        for k in ("errors", "totals", "failed_totals"):
            acc[k] = acc[k] + p[k]
        acc["thr_sum"] += p["thr_sum"]
        acc["n_thr"] += p["n_thr"]
        acc["failed"] += p["failed"]
        acc["estimates"].extend(p["estimates"])
    acc["used_totals"] = acc["totals"] - acc["failed_totals"]
    return acc


def _simulate(cfg: ExperimentConfig, jobs):
    """Run [(point, params, channel, kwargs)] and return reduced results in order."""
    tasks, owner = [], []
    for n, (point, params, channel, kw) in enumerate(jobs):
        ts = _tasks_for_point(cfg, point, params, channel, **kw)
        tasks.extend(ts)
        owner.extend([n] * len(ts))
    parts = _execute(_run_task, tasks, cfg.workers)
    grouped = [[] for _ in jobs]
    for n, part in zip(owner, parts):
        grouped[n].append(part)
    return [_reduce(g) for g in grouped]


def _rate(err, tot):
    return err / tot if tot else math.nan


def _se(p, n):
    return math.sqrt(p * (1.0 - p) / n) if n else math.nan


# --- BER sweep -------------------------------------------------------------

def _random_theory(cfg, point, params, gamma_of, count=16):
    """Theory averaged over the first ``count`` random block channels."""
    ex, ap = [], []
    for b in range(count):
        ch = _random_channel(cfg.seed, point, b, params)
        g = gamma_of(ch)
        if g is None:
            g = policy_threshold("near_opt", ch, params).value
        e, a = theory_pair(g, ch, params)
        ex.append(e)
        ap.append(a)
    return float(np.mean(ex)), float(np.mean(ap))


def run_ber_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    fixed = cfg.channel_mode == "fixed"
    pts = list(cfg.points())
    jobs = [(i, p, cfg.channel(p) if fixed else None, {}) for i, p, _ in pts]
    results = _simulate(cfg, jobs)
    rows = []
    for (i, p, meta), res in zip(pts, results):
        used = res["used_totals"]
        n = int(used.sum())
        errs = int(res["errors"].sum())
        ber = _rate(errs, n)
        thr_mean = res["thr_sum"] / res["n_thr"] if res["n_thr"] else math.nan
        if fixed:
            ch = cfg.channel(p)
            t = policy_threshold(cfg.threshold_policy, ch, p, cfg.manual_threshold)
            g = t.value if t is not None else thr_mean
            prov = t.provenance if t is not None else "near_opt_estimated"
            exact, approx = theory_pair(g, ch, p)
        else:
            prov = "near_opt_estimated" if cfg.threshold_policy == "estimated" else \
                policy_threshold(cfg.threshold_policy, _random_channel(cfg.seed, i, 0, p), p,
                                 cfg.manual_threshold).provenance
            exact, approx = _random_theory(
                cfg, i, p, lambda ch: None if cfg.threshold_policy == "estimated" else
                policy_threshold(cfg.threshold_policy, ch, p, cfg.manual_threshold).value)
        eta_db = meta["eta_db"] if meta["eta_db"] is not None else -20.0 * math.log10(abs(p.bt_attenuation))
        cond = {c: _rate(int(res["errors"][2 * c[0] + c[1]]), int(used[2 * c[0] + c[1]])) for c in CASES}
        rows.append(BerReport(meta["snr_db"], p.N, p.K, p.n_a, eta_db, str(p.source), cfg.channel_mode,
                              cfg.threshold_policy, thr_mean, prov, n, errs, ber, _se(ber, n),
                              exact, approx, cond).as_row())
    return _finish(cfg, ExperimentResult(rows))


# --- PDF experiment ---------------------------------------------------------

def _forced_energies(params: SystemParams, channel: ChannelState, case, count: int,
                     seed: int, point: int, batch_size: int = 10_000):
    coef = case_coefficients(case, channel, params)
    out = []
    for b in range(math.ceil(count / batch_size)):
        m = min(batch_size, count - b * batch_size)
        rng = make_rng(seed, point, b)
        s = draw_source(rng, (m, params.N), params)
        w = draw_noise(rng, (m, params.N), params)
        out.append(_kernels.case_energies(coef, s, w))
    return np.concatenate(out)


def _forced_task(args):
    params, channel, case, count, seed, point = args
    return _forced_energies(params, channel, case, count, seed, point)


def run_pdf_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Histogram of the window energy per forced case with analytic overlays."""
    cfg.validate(ber=False)
    rows, summary = [], []
    psk = cfg.params.source.is_psk
    jobs, meta = [], []
    for idx, p, m in cfg.points():
        ch = cfg.channel(p)
        for c_i, case in enumerate(cfg.cases):
            point = idx * 4 + c_i
            jobs.append((p, ch, tuple(case), cfg.trials, cfg.seed, point))
            meta.append((p, ch, tuple(case), m))
    energies = _execute(_forced_task, jobs, cfg.workers)
    for (p, ch, case, m), e in zip(meta, energies):
        st = (th._psk_stats(ch, p) if psk else th.gaussian_stats(ch, p))[case]
        sd = math.sqrt(st.variance)
        lo = min(float(e.min()), st.mean - 5 * sd)
        hi = max(float(e.max()), st.mean + 5 * sd)
        hist, edges = np.histogram(e, bins=cfg.bins, range=(lo, hi), density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        gauss = _stats.norm(st.mean, sd)
        for c, d in zip(centers, hist):
            exact = math.nan if psk else th.exact_case_pdf(float(c), case, ch, p)
            rows.append({"snr_db": m["snr_db"], "N": p.N, "n_a": p.n_a, "case": f"{case[0]}{case[1]}",
                         "bin_center": float(c), "empirical_density": float(d),
                         "gaussian_density": float(gauss.pdf(c)), "exact_density": exact})
        ks = float(_stats.kstest(e, gauss.cdf).statistic)
        mean = float(e.mean())
        summary.append({"snr_db": m["snr_db"], "N": p.N, "n_a": p.n_a, "case": f"{case[0]}{case[1]}",
                        "windows": int(e.size), "empirical_mean": mean,
                        "mean_std_err": float(e.std(ddof=1) / math.sqrt(e.size)),
                        "theory_mean": st.mean, "theory_sd": sd, "ks_gaussian": ks})
    return _finish(cfg, ExperimentResult(rows, {"summary": summary}))


# --- threshold table -------------------------------------------------------

def gamma_grid(center: float, span: float, points: int) -> np.ndarray:
    return center * np.linspace(1.0 - span, 1.0 + span, points)


def _plateau_argmin(grid, errors):
    """Grid value minimizing the error count; ties resolve to the middle of the run."""
    errors = np.asarray(errors)
    best = np.flatnonzero(errors == errors.min())
    return float(grid[best[len(best) // 2]])


def run_threshold_table(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    if cfg.channel_mode != "fixed":
        raise ConfigError("threshold-table needs a fixed channel")
    pts = list(cfg.points())
    jobs, grids = [], []
    for i, p, _ in pts:
        ch = cfg.channel(p)
        g5 = policy_threshold("perfect", ch, p).value
        g21 = policy_threshold("near_opt", ch, p).value
        grid = gamma_grid(g21, cfg.gamma_span, cfg.gamma_points)
        grids.append((g5, g21, grid))
        jobs.append((i, p, ch, {"grid": tuple(grid) + (g5, g21), "policy": "estimated"}))
    results = _simulate(cfg, jobs)
    rows, sweep = [], []
    for (i, p, meta), res, (g5, g21, grid) in zip(pts, results, grids):
        total = int(res["totals"].sum())
        ge = res["grid"].sum(axis=1)
        errs_grid, e5, e21 = ge[:-2], int(ge[-2]), int(ge[-1])
        est = np.array(res["estimates"], dtype=float)
        good = np.isfinite(est[:, 1])
        gd = np.abs(est[good, 1] - g21) / g21
        n22 = int(res["used_totals"].sum())
        ber22 = _rate(int(res["errors"].sum()), n22)
        arg = _plateau_argmin(grid, errs_grid)
        ber5, ber21 = e5 / total, e21 / total
        rows.append({"snr_db": meta["snr_db"], "N": p.N, "K": p.K, "n_a": p.n_a, "source": str(p.source),
                     "gamma_perfect": g5, "gamma_near_opt": g21,
                     "gamma_estimated_mean": float(est[good, 1].mean()) if good.any() else math.nan,
                     "gamma_diff_mean": float(gd.mean()) if good.any() else math.nan,
                     "n_a_hat_mean": float(est[good, 0].mean()) if good.any() else math.nan,
                     "estimation_failures": int((~good).sum()), "trials": total,
                     "ber_perfect": ber5, "se_perfect": _se(ber5, total), "ber_near_opt": ber21, "se_near_opt": _se(ber21, total),
                     "ber_estimated": ber22, "se_estimated": _se(ber22, n22),
                     "argmin_gamma": arg, "argmin_rel_gap": abs(arg - g21) / g21})
        for g, e in zip(grid, errs_grid):
            sweep.append({"n_a": p.n_a, "snr_db": meta["snr_db"], "gamma": float(g), "errors": int(e),
                          "trials": total, "ber": int(e) / total})
    return _finish(cfg, ExperimentResult(rows, {"sweep": sweep}))


# --- estimator accuracy ----------------------------------------------------

def run_estimator_accuracy(cfg: ExperimentConfig) -> ExperimentResult:
    """Per grid point: ``runs`` independent single-block estimates."""
    cfg.validate(ber=False)
    if cfg.channel_mode != "fixed":
        raise ConfigError("estimator-accuracy needs a fixed channel")
    pts = list(cfg.points())
    jobs = [(i, p, cfg.channel(p), {"policy": "estimated", "estimate": True, "blocks": cfg.runs}) for i, p, _ in pts]
    results = _simulate(cfg.replace(batch_blocks=min(cfg.batch_blocks, 25)), jobs)
    rows = []
    for (i, p, meta), res in zip(pts, results):
        ch = cfg.channel(p)
        g_true = policy_threshold("near_opt", ch, p).value
        est = np.array(res["estimates"], dtype=float)
        good = np.isfinite(est[:, 1])
        rows.append({"snr_db": meta["snr_db"], "N": p.N, "K": p.K, "n_a": p.n_a, "source": str(p.source),
                     "runs": int(est.shape[0]), "failures": int((~good).sum()),
                     "n_a_hat_mean": float(est[good, 0].mean()),
                     "n_a_abs_error_mean": float(np.abs(est[good, 0] - p.n_a).mean()),
                     "gamma_true": g_true, "gamma_hat_mean": float(est[good, 1].mean()),
                     "gamma_diff_mean": float((np.abs(est[good, 1] - g_true) / g_true).mean())})
    return _finish(cfg, ExperimentResult(rows))


# --- balance ---------------------------------------------------------------

def _balance_task(args):
    params, channel, adjacent, count, seed, point, grid = args
    rng_bits = make_rng(seed, point, 0, 0)
    current = draw_bits(rng_bits, count)
    e = np.empty(count)
    for j in (0, 1):
        sel = np.flatnonzero(current == j)
        e[sel] = _forced_energies(params, channel, (adjacent, j), sel.size, seed, point * 2 + j + 1)
    adj = np.full(count, adjacent)
    errors, totals = _kernels.count_errors(e, current, adj, np.asarray(grid), channel.order_flag)
    return errors, totals


def run_balance_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Conditional error rates with the adjacent bit forced, for the balanced and ML thresholds."""
    cfg.validate()
    if cfg.channel_mode != "fixed":
        raise ConfigError("balance needs a fixed channel")
    psk = cfg.params.source.is_psk
    jobs, meta = [], []
    for idx, p, m in cfg.points():
        ch = cfg.channel(p)
        bal = th.psk_conditional_opt_thresholds(ch, p) if psk else th.conditional_opt_thresholds(ch, p)
        ml = th.ml_conditional_thresholds(ch, p, psk=psk)
        for adj in (0, 1):
            grid = (bal[adj], ml[adj])
            jobs.append((p, ch, adj, cfg.trials, cfg.seed, idx * 2 + adj, grid))
            meta.append((p, ch, adj, m, grid))
    parts = _execute(_balance_task, jobs, cfg.workers)
    rows = []
    for (p, ch, adj, m, grid), (errors, totals) in zip(meta, parts):
        for k, name in enumerate(("balanced", "ml")):
            g = grid[k]
            theo = th.conditional_error_rates((g, g), ch, p, psk=psk)
            n0, n1 = int(totals[2 * adj]), int(totals[2 * adj + 1])
            r0, r1 = _rate(int(errors[k, 2 * adj]), n0), _rate(int(errors[k, 2 * adj + 1]), n1)
            se = math.sqrt(_se(r0, n0) ** 2 + _se(r1, n1) ** 2)
            rows.append({"snr_db": m["snr_db"], "N": p.N, "n_a": p.n_a, "adjacent": adj, "policy": name,
                         "threshold": g, "trials_0": n0, "trials_1": n1,
                         "rate_err_given_0": r0, "rate_err_given_1": r1,
                         "gap": r0 - r1, "gap_se": se, "gap_z": (r0 - r1) / se if se > 0 else 0.0,
                         "theory_rate_0": theo[(adj, 0)], "theory_rate_1": theo[(adj, 1)]})
    return _finish(cfg, ExperimentResult(rows))


# --- high-SNR floor --------------------------------------------------------

def run_floor_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Approximate BER at the near-optimal threshold versus its high-SNR limit.

    Uses the configured channel plus ``runs - 1`` random channels.
    """
    cfg.validate(ber=False)
    rows = []
    base = cfg.params
    hfgs = [(cfg.h, cfg.f, cfg.g)]
    for c in range(1, cfg.runs):
        z = make_rng(cfg.seed, _CHANNEL_KEY, c).standard_normal((3, 2)) / math.sqrt(2.0)
        hfgs.append(tuple(complex(a, b) for a, b in z))
    Ns = cfg.N or (base.N,)
    for c, (h, f, g) in enumerate(hfgs):
        for N, na in itertools.product(Ns, cfg.n_a):
            p0 = base.replace(samples_per_symbol=int(N), rtse_magnitude=0, rtse_sign=0).with_rtse(int(na), cfg.rtse_sign)
            floor = th.ber_floor(derive_channel_state(h, f, g, p0), p0)
            for snr in cfg.snr_db:
                p = p0.with_snr_db(snr)
                ch = derive_channel_state(h, f, g, p)
                gam = th.near_opt_threshold(ch, p).value
                ber = th.approx_ber(gam, ch, p).total
                rows.append({"channel": c, "N": int(N), "n_a": int(na), "snr_db": float(snr),
                             "approx_ber": ber, "ber_floor": floor, "abs_gap": abs(ber - floor),
                             "rel_gap": abs(ber - floor) / floor if floor > 0 else math.nan})
    return _finish(cfg, ExperimentResult(rows))


# --- output ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def format_csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        cols = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows))
    return path


def _finish(cfg: ExperimentConfig, result: ExperimentResult) -> ExperimentResult:
    if cfg.out:
        result.path = write_csv(result.rows, cfg.out)
        for suffix, rows in result.extra.items():
            p = Path(cfg.out)
            write_csv(rows, p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}"))
    return result
