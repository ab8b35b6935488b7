"""Time one 12,000-step closed-loop run with and without numba.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scenario NAME]

The pure-Python numbers come from a child process started with
HOTLANE_DISABLE_NUMBA=1, so the same kernel source runs uncompiled.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _time_runs(scenario: str, backend: str, repeat: int) -> list[float]:
    from hotlane import run
    from hotlane.scenario_io import load_bundled

    cfg = load_bundled(scenario)
    run(cfg, backend=backend)  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        run(cfg, backend=backend)
        times.append(time.perf_counter() - start)
    return times


def _child(scenario: str, backend: str, repeat: int) -> list[float]:
    env = dict(os.environ, HOTLANE_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, __file__, "--child", backend, "--scenario", scenario, "--repeat", str(repeat)],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="logit-constant")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", choices=("kernel", "reference"))
    args = ap.parse_args()
    if args.child:
        print(json.dumps(_time_runs(args.scenario, args.child, args.repeat)))
        return

    from hotlane import NUMBA_ENABLED

    rows = [
        ("kernel, numba" if NUMBA_ENABLED else "kernel, numba disabled in parent",
         _time_runs(args.scenario, "kernel", args.repeat)),
        ("kernel, pure Python", _child(args.scenario, "kernel", max(1, args.repeat // 2))),
        ("reference loop", _time_runs(args.scenario, "reference", max(1, args.repeat // 2))),
    ]
    base = min(rows[0][1])
    print(f"scenario {args.scenario}, best of N runs")
    for label, times in rows:
        best = min(times)
        print(f"  {label:<34s} {best * 1e3:10.2f} ms   x{best / base:8.1f}")


if __name__ == "__main__":
    main()
