"""Timing comparison of the numba and numpy kernel backends.

Runs the same three workloads on each backend through the public API:

  swap        pure-state integration of the fast-envelope Hamiltonian
              over one photon-exchange time
  lindblad    damped swap (density-matrix propagation, two collapse ops)
  laplace     relaxation solve for the electrode coupling factor

and prints wall time per backend plus the cross-backend agreement, so a
regression in either path shows up as a number, not a feeling. The numba
column includes a separate warmup pass: JIT compilation cost is real but
amortizes over a session and would otherwise dominate the table.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--resolution M]
"""

import argparse
import math
import time

import numpy as np

from ionlc.device import effective_coupling
from ionlc.dynamics import EvolutionSpec, evolve_lindblad, evolve_pure
from ionlc.electrostatics import ElectrodeGeometry, geometric_factor
from ionlc.hamiltonians import interaction_frame_hamiltonian, scaled_hierarchy
from ionlc.qalgebra import ModeLayout, annihilation, embed, fock_state, product_state

LAYOUT = ModeLayout((6, 6), ("lc", "motion"))


def _swap_problem():
    p = scaled_hierarchy()
    t_swap = math.pi / (2.0 * effective_coupling(p.g0, p.eta))
    spec = EvolutionSpec(
        hamiltonian=interaction_frame_hamiltonian(p, LAYOUT),
        t_final=t_swap,
        tolerance=1e-8,
    )
    psi = product_state(
        LAYOUT, {"lc": fock_state(6, 1), "motion": fock_state(6, 0)}
    )
    return spec, psi


def bench_swap(backend):
    spec, psi = _swap_problem()
    res = evolve_pure(spec, psi, backend=backend)
    return res.final_state.vector


def bench_lindblad(backend):
    spec, psi = _swap_problem()
    a = embed(LAYOUT, "lc", annihilation(6))
    b = embed(LAYOUT, "motion", annihilation(6))
    damped = EvolutionSpec(
        hamiltonian=spec.hamiltonian,
        t_final=spec.t_final,
        tolerance=1e-7,
        collapse_ops=((a, 0.02), (b, 0.02)),
    )
    res = evolve_lindblad(damped, psi, backend=backend)
    return res.final_state.density


def bench_laplace(backend, resolution):
    geom = ElectrodeGeometry(
        island_side=50e-6, gap=10e-6, ion_height=25e-6, resolution=resolution
    )
    return geometric_factor(geom, backend=backend)


def timed(fn, repeats):
    best, value = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=1, help="take best of N runs")
    ap.add_argument(
        "--resolution",
        type=int,
        default=64,
        help="laplace grid resolution; the backend gap widens with size "
        "(128 runs ~3 min on the numpy path)",
    )
    args = ap.parse_args()

    workloads = {
        "swap": lambda backend: bench_swap(backend),
        "lindblad": lambda backend: bench_lindblad(backend),
        "laplace": lambda backend: bench_laplace(backend, args.resolution),
    }

    print(f"{'workload':<10} {'numpy [s]':>10} {'numba [s]':>10} "
          f"{'speedup':>8} {'agreement':>10}")
    for name, fn in workloads.items():
        t_np, v_np = timed(lambda: fn("numpy"), args.repeats)
        fn("numba")  # warmup: exclude JIT compilation from the timing
        t_nb, v_nb = timed(lambda: fn("numba"), args.repeats)
        diff = float(np.max(np.abs(np.asarray(v_np) - np.asarray(v_nb))))
        print(f"{name:<10} {t_np:>10.4f} {t_nb:>10.4f} "
              f"{t_np / t_nb:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
