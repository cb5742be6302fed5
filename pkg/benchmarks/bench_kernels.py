"""Compare the compiled kernels with the pure-Python fallback.

Each backend runs in its own interpreter because the backend is chosen once,
at import time, from SHOCKMETRICS_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat):
    fn()  # warm up (and compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_cases(repeat):
    import numpy as np

    from shockmetrics._accel import backend_name
    from shockmetrics.presets import TABLE1_PARAMS, figure_model
    from shockmetrics.sim import SimConfig, simulate_network, simulate_ttc_mixed
    from shockmetrics.presets import table1_model
    from shockmetrics.steady import RegularParams, regular_graph_steady_state
    from shockmetrics.ttc import expected_ttc, ttc_cdf

    fig = figure_model(8, 0.5, 2.0)
    grid = np.linspace(0.0, 10.0, 201)
    params = RegularParams(**TABLE1_PARAMS)
    net = table1_model(5, 2.0, n=50)

    cases = {
        "ttc_cdf 201 pts": lambda: ttc_cdf(fig, 0, grid),
        "expected_ttc": lambda: expected_ttc(fig, 0),
        "regular fixed point k=10 c=9": lambda: regular_graph_steady_state(10, params.with_c(9.0)),
        "node-mixed sim 20k reps": lambda: simulate_ttc_mixed(
            fig, 0, SimConfig(replications=20_000, seed=1, mode="node-mixed")),
        "network sim 50 nodes T=200": lambda: simulate_network(
            net, cfg=SimConfig(replications=1, seed=1, mode="network", horizon=200.0)),
    }
    out = {"backend": backend_name(), "seconds": {}}
    for name, fn in cases.items():
        out["seconds"][name] = _best(fn, repeat)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(run_cases(args.repeat)))
        return

    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, SHOCKMETRICS_DISABLE_NUMBA=disable)
        proc = subprocess.run(
            [sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    fast, slow = results
    width = max(len(k) for k in fast["seconds"])
    print(f"{'case':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}  speedup")
    for name, t_fast in fast["seconds"].items():
        t_slow = slow["seconds"][name]
        print(f"{name:<{width}}  {t_fast:10.4f}  {t_slow:10.4f}  {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
