"""Compare the compiled kernels with the plain numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time.  Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKLOAD = r"""
import json, time
import numpy as np
from bifurcurve._accel import backend
from bifurcurve.polymap import parse_map
from bifurcurve.tracer import TraceConfig, enumerate_fiber, sphere_crossings
from bifurcurve import kernels

f = parse_map("x + x^2*y", ["x", "y"])
cfg = TraceConfig()
s = f.packed
X = np.random.default_rng(0).uniform(-10, 10, (20000, 2))

def run():
    out = {}
    t0 = time.perf_counter()
    kernels.linear_offsets(s.exps, s.coeffs, s.owner, s.dexps, s.dcoeffs, s.downer, s.nout, s.maxdeg, np.array([0.3]), X)
    out["linear_offsets_20k"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for t in (0.5, 0.25, -0.5):
        sphere_crossings(f, [t], 10.0, cfg)
    out["sphere_crossings_x3"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for t in (0.5, 0.0, -0.25):
        enumerate_fiber(f, [t], cfg)
    out["enumerate_fiber_x3"] = time.perf_counter() - t0
    return out

t0 = time.perf_counter()
first = run()
warm = time.perf_counter() - t0
best = None
for _ in range(REPEAT):
    r = run()
    best = r if best is None else {k: min(best[k], r[k]) for k in r}
print(json.dumps({"backend": backend(), "first_call": warm, "best": best}))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if disable:
        env["BIFURCURVE_DISABLE_NUMBA"] = "1"
    else:
        env.pop("BIFURCURVE_DISABLE_NUMBA", None)
    code = WORKLOAD.replace("REPEAT", str(repeat))
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    start = time.perf_counter()
    rows = [run_backend(False, args.repeat), run_backend(True, args.repeat)]
    names = list(rows[0]["best"])
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for k in names:
        a, b = rows[0]["best"][k], rows[1]["best"][k]
        print(f"{k:<24}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")
    print(f"first call incl. compilation: numba {rows[0]['first_call']:.2f}s, numpy {rows[1]['first_call']:.2f}s")
    print(f"total {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
