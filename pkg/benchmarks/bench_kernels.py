"""Time the hot kernels with numba and with the pure-numpy fallback.

Each engine runs in its own interpreter because the fallback is chosen at
import time by TSGC_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py --size 128 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(size: int, timepoints: int, repeat: int) -> dict:
    import numpy as np

    from tsgc import _accel
    from tsgc.features import time_series_features
    from tsgc.graphbuild import build_graph, region_mean
    from tsgc.maxflow import FlowNetwork, max_flow
    from tsgc.phantom import PhantomConfig, generate

    case = generate(PhantomConfig(size, size, timepoints))
    feats = time_series_features(case.volume)
    mu1 = region_mean(feats, case.roi_healthy)
    mu2 = region_mean(feats, case.roi_tumor)

    def graph():
        return build_graph(feats, mu1, mu2, case.liver_mask)

    def flow():
        return max_flow(net)

    net = FlowNetwork.from_graph(graph())
    timings = {}
    for name, fn in (("build_graph", graph), ("max_flow", flow)):
        fn()  # warm-up, includes JIT compilation
        best = np.inf
        for _ in range(repeat):
            start = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - start)
        timings[name] = best
    return {
        "engine": "numba" if _accel.HAS_NUMBA else "numpy",
        "nodes": net.node_count,
        "arcs": net.arc_count,
        "flow": max_flow(net).flow_value,
        **timings,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--timepoints", type=int, default=59)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        print(json.dumps(measure(args.size, args.timepoints, args.repeat)))
        return

    rows = []
    for disable in ("", "1"):
        env = dict(os.environ, TSGC_DISABLE_NUMBA=disable)
        cmd = [sys.executable, __file__, "--child", "--size", str(args.size),
               "--timepoints", str(args.timepoints), "--repeat", str(args.repeat)]
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
        rows.append(json.loads(out.strip().splitlines()[-1]))

    print(f"{args.size}x{args.size}x{args.timepoints}: {rows[0]['nodes']} nodes, {rows[0]['arcs']} arcs")
    print(f"{'engine':<8}{'build_graph':>14}{'max_flow':>12}{'flow':>16}")
    for r in rows:
        print(f"{r['engine']:<8}{r['build_graph']:>13.4f}s{r['max_flow']:>11.4f}s{r['flow']:>16.6f}")
    if abs(rows[0]["flow"] - rows[1]["flow"]) > 1e-6 * max(1.0, abs(rows[0]["flow"])):
        sys.exit("engines disagree on the flow value")


if __name__ == "__main__":
    main()
