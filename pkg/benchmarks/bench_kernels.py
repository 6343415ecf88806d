"""Time the map kernels with numba and with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--evals N]

Each backend runs in its own interpreter because the choice is fixed at import.
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from localft import BACKEND
from localft.config import ELSE_RAY
from localft.flow import Ray, bisect_threshold
from localft.local import GeometryParams, local_map
from localft.model import nonlocal_map

n = int(sys.argv[1])
fn = nonlocal_map()
fl = local_map(geometry=GeometryParams(20, 4))
x, c = np.full(5, 1e-4), np.full(8, 1e-5)
fn(x), fl(c)  # compile / warm caches outside the timed region

def per_call(f, v):
    t0 = time.perf_counter()
    for _ in range(n):
        f(v)
    return (time.perf_counter() - t0) / n

t0 = time.perf_counter()
bisect_threshold(fn, Ray.through(ELSE_RAY))
search = time.perf_counter() - t0
print(json.dumps({"backend": BACKEND, "nonlocal_us": 1e6 * per_call(fn, x),
                  "local_us": 1e6 * per_call(fl, c), "threshold_s": search}))
"""


def run_backend(disable: bool, evals: int) -> dict:
    env = dict(os.environ)
    env.pop("LOCALFT_NO_NUMBA", None)
    if disable:
        env["LOCALFT_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKLOAD, str(evals)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--evals", type=int, default=2000)
    args = ap.parse_args()
    fast = run_backend(False, args.evals)
    slow = run_backend(True, max(args.evals // 10, 50))
    print(f"{'':24}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key, label in (("nonlocal_us", "nonlocal map [us]"), ("local_us", "local map [us]"),
                       ("threshold_s", "threshold search [s]")):
        print(f"{label:24}{fast[key]:12.3f}{slow[key]:12.3f}{slow[key] / fast[key]:10.1f}")


if __name__ == "__main__":
    main()
