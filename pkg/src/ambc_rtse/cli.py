"""Command-line entry point.

Settings are layered: subcommand preset < YAML config file < command-line
flags.  ``seed``, ``trials`` and ``out`` have no preset and must come from the
config file or the command line.

Exit codes: 0 success, 1 configuration error, 2 numerical convergence failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import harness
from .harness import ConfigError, ExperimentConfig, reference_channel_hfg
from .mathkit import ConvergenceError, DomainError
from .model import SourceKind, SystemParams, eta_from_db, random_stream, write_stream

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2

_BASE = {"N": [100], "K": [100], "noise_power": 1.0, "eta_db": [1.1], "snr_db": [20.0],
         "channel": "reference", "source": "gaussian", "rtse_sign": -1}

PRESETS = {
    "pdf": {"n_a": [10], "bins": 60},
    "ber-sweep": {"snr_db": [0, 5, 10, 15, 20, 25, 30], "n_a": [0, 10, 20], "policy": "perfect"},
    "threshold-table": {"n_a": [0, 10, 20], "gamma_points": 40, "gamma_span": 0.25},
    "estimator-accuracy": {"n_a": [10, 20], "K": [100, 200, 400], "runs": 100},
    "n-sweep": {"N": [40, 60, 80, 100, 120, 140, 160], "n_a": [10], "policy": "near_opt"},
    "eta-sweep": {"eta_db": [0.5, 1.1, 2, 3, 4, 5, 6], "n_a": [10], "policy": "near_opt"},
    "balance": {"n_a": [10]},
    "floor": {"snr_db": [20, 40, 60, 80, 100, 120], "n_a": [0, 10], "runs": 20},
    "dump-stream": {"n_a": [10], "K": [100]},
}

RUNNERS = {
    "pdf": harness.run_pdf_experiment,
    "ber-sweep": harness.run_ber_sweep,
    "threshold-table": harness.run_threshold_table,
    "estimator-accuracy": harness.run_estimator_accuracy,
    "n-sweep": harness.run_ber_sweep,
    "eta-sweep": harness.run_ber_sweep,
    "balance": harness.run_balance_experiment,
    "floor": harness.run_floor_check,
}

_LIST_KEYS = ("N", "K", "eta_db", "snr_db", "n_a")
_KNOWN = set(_LIST_KEYS) | {"noise_power", "channel", "h", "f", "g", "source", "rtse_sign", "policy",
                            "manual_threshold", "trials", "seed", "out", "workers", "batch_blocks",
                            "gamma_span", "gamma_points", "runs", "bins", "cases", "format"}


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(str(v).replace(" ", "")) if isinstance(v, str) else complex(v)
    except ValueError as exc:
        raise ConfigError(f"cannot read complex value {v!r}") from exc


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def load_config_file(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    data = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(settings: dict) -> ExperimentConfig:
    """Turn merged settings into a validated-shape ExperimentConfig."""
    s = dict(settings)
    for key in ("seed", "trials", "out"):
        if s.get(key) is None:
            raise ConfigError(f"--{key} is required (flag or config file)")
    for k in _LIST_KEYS:
        s[k] = _as_list(s[k])
    try:
        source = SourceKind.parse(s["source"])
        params = SystemParams(samples_per_symbol=int(s["N"][0]), symbols_per_block=int(s["K"][0]),
                              noise_power=float(s["noise_power"]),
                              bt_attenuation=eta_from_db(float(s["eta_db"][0])), source=source)
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    chan = s.get("channel", "reference")
    mode = "fixed"
    if chan == "random":
        mode, hfg = "random", harness.TEST_CHANNEL_HFG
    elif chan == "test":
        hfg = harness.TEST_CHANNEL_HFG
    elif chan == "reference":
        hfg = reference_channel_hfg(params.N, 20.0, params.noise_power, float(s["eta_db"][0]))
    elif chan == "custom":
        hfg = tuple(_complex(s.get(k, 1.0)) for k in ("h", "f", "g"))
    else:
        raise ConfigError(f"channel must be test, reference, custom or random, got {chan!r}")
    if any(s.get(k) is not None for k in ("h", "f", "g")) and chan != "custom":
        raise ConfigError("explicit h/f/g need channel: custom")
    cases = tuple(tuple(int(ch) for ch in str(c)) for c in _as_list(s.get("cases", ["00", "01", "10", "11"])))
    try:
        return ExperimentConfig(
            params=params, channel_mode=mode, h=hfg[0], f=hfg[1], g=hfg[2],
            snr_db=tuple(float(x) for x in s["snr_db"]), n_a=tuple(int(x) for x in s["n_a"]),
            N=tuple(int(x) for x in s["N"]), K=tuple(int(x) for x in s["K"]),
            eta_db=tuple(float(x) for x in s["eta_db"]),
            threshold_policy=str(s.get("policy", "perfect")),
            manual_threshold=None if s.get("manual_threshold") is None else float(s["manual_threshold"]),
            trials=int(s["trials"]), seed=int(s["seed"]), out=str(s["out"]),
            workers=int(s.get("workers", 1)), batch_blocks=int(s.get("batch_blocks", 100)),
            gamma_span=float(s.get("gamma_span", 0.25)), gamma_points=int(s.get("gamma_points", 40)),
            runs=int(s.get("runs", 100)), bins=int(s.get("bins", 60)), cases=cases,
            rtse_sign=int(s.get("rtse_sign", -1)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ambc-rtse", description="Energy-detector experiments under timing error.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(RUNNERS) + ["dump-stream"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML file with experiment settings")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int, help="symbols per grid point (windows per case for pdf)")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--snr-db", dest="snr_db", type=float, nargs="+")
        sp.add_argument("--n-a", dest="n_a", type=int, nargs="+")
        sp.add_argument("--N", dest="N", type=int, nargs="+")
        sp.add_argument("--K", dest="K", type=int, nargs="+")
        sp.add_argument("--eta-db", dest="eta_db", type=float, nargs="+")
        sp.add_argument("--noise-power", dest="noise_power", type=float)
        sp.add_argument("--policy", choices=harness.POLICIES)
        sp.add_argument("--manual-threshold", dest="manual_threshold", type=float)
        sp.add_argument("--channel", choices=("test", "reference", "custom", "random"))
        sp.add_argument("--h")
        sp.add_argument("--f")
        sp.add_argument("--g")
        sp.add_argument("--source", help="gaussian or pskM, e.g. psk4")
        sp.add_argument("--rtse-sign", dest="rtse_sign", type=int, choices=(-1, 1))
        sp.add_argument("--batch-blocks", dest="batch_blocks", type=int)
        sp.add_argument("--gamma-span", dest="gamma_span", type=float)
        sp.add_argument("--gamma-points", dest="gamma_points", type=int)
        sp.add_argument("--runs", type=int)
        sp.add_argument("--bins", type=int)
        sp.add_argument("--cases", nargs="+", help="window cases for pdf, e.g. 00 10")
        sp.add_argument("--format", choices=("bin", "csv"), help="dump-stream output format")
    return ap


def merged_settings(args) -> dict:
    settings = dict(_BASE)
    settings.update(PRESETS[args.command])
    if args.config:
        settings.update(load_config_file(args.config))
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        settings[k] = v
    return settings


def _dump_stream(settings: dict) -> int:
    if settings.get("seed") is None or settings.get("out") is None:
        raise ConfigError("dump-stream needs --seed and --out")
    cfg = build_config({**settings, "trials": settings.get("trials") or 1})
    _, p, _ = next(cfg.points())
    stream = random_stream(p, cfg.channel(p), cfg.seed)
    write_stream(stream, cfg.out, settings.get("format"))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        settings = merged_settings(args)
        if args.command == "dump-stream":
            return _dump_stream(settings)
        cfg = build_config(settings)
        result = RUNNERS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc} (estimate {exc.estimate!r})", file=sys.stderr)
        return EXIT_CONVERGENCE
    print(f"wrote {len(result.rows)} rows to {result.path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
