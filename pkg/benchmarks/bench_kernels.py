"""Wall-clock comparison of the compiled and pure-Python flow kernels.

Runs the same R1 trajectories through both backends, checks that the
sampled scaled-graph points agree, and prints the speedup.

    python3 benchmarks/bench_kernels.py [--members 5] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time
from unittest import mock

from resetsg import _kernel_py, kernels
from resetsg.model import r1_system
from resetsg.simulator import BatterySpec, battery_inputs, simulate_sample


def run(inputs, flow_segment) -> tuple[float, list]:
    sys = r1_system()
    with mock.patch.object(kernels, "flow_segment", flow_segment):
        t0 = time.perf_counter()
        out = [simulate_sample(sys, inp) for inp in inputs]
        return time.perf_counter() - t0, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--members", type=int, default=4, help="multisine and sigmoid inputs each")
    ap.add_argument("--repeat", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    try:
        from resetsg import _kernel
    except ImportError:
        print("compiled kernel not built; nothing to compare")
        return 1
    spec = BatterySpec(multisine=args.members, sigmoid_a=args.members, sigmoid_nu=1, omega_range=(1e-2, 1e1))
    inputs = battery_inputs(1, spec, args.seed)
    best = {}
    for name, fn in (("cython", _kernel.flow_segment), ("python", _kernel_py.flow_segment)):
        times = []
        for _ in range(args.repeat):
            dt, samples = run(inputs, fn)
            times.append(dt)
        best[name] = (min(times), samples)
        print(f"{name:7s} {min(times):8.3f} s for {len(inputs)} trajectories")
    diff = max(abs(a.z - b.z) for a, b in zip(best["cython"][1], best["python"][1]))
    print(f"max |z_cython - z_python| = {diff:.3e}")
    print(f"speedup {best['python'][0] / best['cython'][0]:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
