"""Compares the compiled kernel backend against the numpy fallback.

Runs the hot kernels and a few end-to-end operations on one compiled
model and reports per-call times for both backends. The numpy backend is
selected by re-executing this script with XAIBENCH_PURE=1, so both runs
use identical code paths apart from the kernels.

Usage: python benchmarks/kernel_bench.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def run_suite(repeats):
    from xaibench import compiler, dataset, kernels
    from xaibench.methods import MethodConfig, attribute
    from xaibench.network import forward, input_gradient

    net = compiler.compile_model(1)
    ex = dataset.build_example(1, 0, 0, root_seed=0)
    x = ex.image
    rng = np.random.default_rng(0)
    conv_x = rng.random((36, 36, 3))
    conv_w = rng.random((3, 3, 3, 36))
    conv_b = rng.random(36)
    grad = rng.random((12, 12, 36))
    cfg = MethodConfig()

    cases = {
        "conv2d_forward": lambda: kernels.conv2d_forward(conv_x, conv_w, conv_b, 3, 3),
        "conv2d_backward_input": lambda: kernels.conv2d_backward_input(grad, conv_w, 3, 3, 36, 36),
        "maxpool_forward": lambda: kernels.maxpool_forward(conv_x, 2, 2, 2, 2),
        "network_forward": lambda: forward(net, x),
        "input_gradient": lambda: input_gradient(net, x, ex.class_label),
        "integrated_gradients": lambda: attribute("integrated_gradients", net, x,
                                                  ex.class_label, cfg),
        "occlusion": lambda: attribute("occlusion", net, x, ex.class_label, cfg),
    }
    results = {}
    for name, fn in cases.items():
        fn()  # warm-up
        results[name] = _time(fn, repeats)
    return kernels.BACKEND, results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--emit-json", action="store_true",
                        help=argparse.SUPPRESS)  # internal: subprocess mode
    args = parser.parse_args()

    backend, results = run_suite(args.repeats)
    if args.emit_json:
        json.dump({"backend": backend, "results": results}, sys.stdout)
        return

    runs = {backend: results}
    if backend != "numpy":
        env = dict(os.environ, XAIBENCH_PURE="1")
        out = subprocess.run(
            [sys.executable, __file__, "--repeats", str(args.repeats),
             "--emit-json"],
            env=env, capture_output=True, text=True, check=True)
        other = json.loads(out.stdout)
        runs[other["backend"]] = other["results"]

    backends = list(runs)
    header = f"{'case':<24}" + "".join(f"{b + ' (ms)':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for case in results:
        row = f"{case:<24}" + "".join(f"{runs[b][case]:>14.3f}" for b in backends)
        if len(backends) == 2:
            a, b = (runs[backends[0]][case], runs[backends[1]][case])
            row += f"{b / a:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
