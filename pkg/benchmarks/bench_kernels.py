"""Compare the compiled and pure-python integration backends.

Times the workloads that dominate production runs: a one-period density
matrix propagation and a batched conditioned-operator stack of the kind
the correlation sweeps push through the integrator.

Usage: python benchmarks/bench_kernels.py [--fock N]
"""

import argparse
import time

import numpy as np

from darkemit._kernels import compile_system, get_stepper_class
from darkemit.config import ProtocolConfig
from darkemit.dynamics import LindbladSpec
from darkemit.hilbert import basis_state, make_space, singlet_state
from darkemit.models import protocol_schedule


def time_case(stepper_cls, system, stack, t0, t1, repeats=3):
    best = np.inf
    for _ in range(repeats):
        stepper = stepper_cls(system, rtol=1e-8, atol=1e-10)
        y = stack.copy()
        tic = time.perf_counter()
        stepper.advance(y, t0, t1)
        best = min(best, time.perf_counter() - tic)
        evals = stepper.stats["rhs_evals"]
    return best, evals


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fock", type=int, default=8)
    args = parser.parse_args()

    cfg = ProtocolConfig(fock_cutoff=args.fock)
    space = make_space(cfg.fock_cutoff)
    schedule = protocol_schedule(cfg)
    system = compile_system(space, schedule, LindbladSpec.from_config(cfg))

    rho = basis_state(space, 0, 1, 1).density_matrix()[None]
    seed = singlet_state(space, 1).density_matrix()
    stack8 = np.stack([seed] * 8)

    cases = [
        ("transfer ramp, batch 1", rho, 0.0, cfg.t_ramp1),
        ("emission window, batch 1", rho, 90.0, 142.0),
        ("conditioned stack, batch 8", stack8, 90.0, 142.0),
    ]

    backends = []
    for name in ("compiled", "python"):
        try:
            backends.append((name, get_stepper_class(name)))
        except ImportError:
            print(f"[{name} backend unavailable]")

    print(f"dim = {space.dim}, rtol = 1e-8")
    print(f"{'case':30s} " + " ".join(f"{n:>12s}" for n, _ in backends)
          + "   speedup   us/rhs-eval")
    for label, stack, t0, t1 in cases:
        times = []
        for _, cls in backends:
            t, evals = time_case(cls, system, stack.astype(complex), t0, t1)
            times.append((t, evals))
        row = f"{label:30s} " + " ".join(f"{t*1e3:10.1f}ms" for t, _ in times)
        if len(times) == 2:
            row += f"  {times[1][0] / times[0][0]:7.2f}x"
            row += f"   {times[0][0] / times[0][1] * 1e6:8.1f}"
        print(row)


if __name__ == "__main__":
    main()
