"""Compare the numba and numpy kernel backends.

Each backend runs in its own interpreter because the choice is made at import
time from AMBC_RTSE_DISABLE_NUMBA.  Usage:

    python3 benchmarks/bench_kernels.py [--repeat 5] [--blocks 100]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _inputs(blocks, K=100, N=100, seed=0):
    rng = np.random.default_rng(seed)
    L = (K + 2) * N
    bits = rng.integers(0, 2, (blocks, K + 2)).astype(np.int8)
    s = (rng.standard_normal((blocks, L)) + 1j * rng.standard_normal((blocks, L))) * 7.0
    w = rng.standard_normal((blocks, L)) + 1j * rng.standard_normal((blocks, L))
    return bits, s, w, N


def _best(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def child(repeat, blocks):
    from ambc_rtse import _kernels as k

    bits, s, w, N = _inputs(blocks)
    t_we, e = _best(lambda: k.window_energies(bits, s, w, 1.0 + 0j, 2.0 + 0j, N, -10), repeat)
    e = e.ravel()
    truth = bits[:, 1:-1].ravel()
    adj = bits[:, :-2].ravel()
    grid = np.linspace(0.8, 1.2, 40) * np.median(e)
    t_ce, (errs, _) = _best(lambda: k.count_errors(e, truth, adj, grid, True), repeat)
    coef = np.full(N, 1.5 + 0j)
    t_cs, c = _best(lambda: k.case_energies(coef, s[:, :N], w[:, :N]), repeat)
    print(json.dumps({
        "backend": k.backend(),
        "window_energies": t_we, "count_errors": t_ce, "case_energies": t_cs,
        "checksum": [float(e.sum()), int(errs.sum()), float(c.sum())],
    }))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--blocks", type=int, default=100)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        child(a.repeat, a.blocks)
        return
    res = {}
    for flag in ("0", "1"):
        env = dict(os.environ, AMBC_RTSE_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(a.repeat),
                              "--blocks", str(a.blocks)], env=env, check=True, capture_output=True, text=True)
        r = json.loads(out.stdout)
        res[r["backend"]] = r
    if "numba" not in res:
        print("numba not available; numpy only")
    print(f"{a.blocks} blocks x 100 symbols x 100 samples, best of {a.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in res) + ("     speedup" if len(res) == 2 else ""))
    for name in ("window_energies", "count_errors", "case_energies"):
        row = f"{name:<18}" + "".join(f"{1e3 * r[name]:>10.2f}ms" for r in res.values())
        if len(res) == 2:
            row += f"{res['numpy'][name] / res['numba'][name]:>11.1f}x"
        print(row)
    if len(res) == 2:
        a_, b_ = res["numpy"]["checksum"], res["numba"]["checksum"]
        same = a_[1] == b_[1] and all(abs(x - y) <= 1e-9 * abs(x) for x, y in ((a_[0], b_[0]), (a_[2], b_[2])))
        print(f"results agree: {same}")


if __name__ == "__main__":
    main()
