"""Compare the compiled and numpy Hamiltonian kernels.

Times one matrix-vector product (``LadderHamiltonian.apply``) and one
propagator step of length ``dt`` (``apply_plan``) with each backend.

    python3 benchmarks/bench_kernels.py --sizes 12 16 20 --repeat 5
"""
import argparse
import json
import time

import numpy as np

from ladderdyn import _fallback, kernels
from ladderdyn.basis import build_basis
from ladderdyn.chebyshev import apply_plan, plan_propagator
from ladderdyn.hamiltonian import LadderHamiltonian

try:
    from ladderdyn._ext import kernels as _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_size(N, repeat, dt):
    h = LadderHamiltonian(build_basis(N))
    rng = np.random.default_rng(0)
    psi = rng.uniform(-1, 1, h.dim).astype(complex)
    psi /= np.linalg.norm(psi)
    plan = plan_propagator(h, dt)
    backends = {"python": _fallback.h_step}
    if _compiled is not None:
        backends["cython"] = _compiled.h_step
    row = {"N": N, "dim": h.dim, "plan_order": plan.order}
    saved = kernels.h_step
    try:
        for name, fn in backends.items():
            kernels.h_step = fn
            row[f"{name}_matvec_s"] = best_of(lambda: h.apply(psi), repeat)
            row[f"{name}_step_s"] = best_of(lambda: apply_plan(plan, psi), max(1, repeat // 2))
    finally:
        kernels.h_step = saved
    if "cython_matvec_s" in row:
        row["speedup_matvec"] = row["python_matvec_s"] / row["cython_matvec_s"]
        row["speedup_step"] = row["python_step_s"] / row["cython_step_s"]
    return row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--sizes", type=int, nargs="+", default=[12, 16, 20])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--dt", type=float, default=0.5, help="propagator step length")
    p.add_argument("--json", help="also write results here")
    args = p.parse_args(argv)

    if _compiled is None:
        print("compiled extension not built; timing the numpy fallback only")
    rows = [bench_size(N, args.repeat, args.dt) for N in args.sizes]
    header = f"{'N':>3} {'dim':>9} {'order':>5} {'matvec py':>10} {'matvec cy':>10} {'x':>5} " \
             f"{'step py':>9} {'step cy':>9} {'x':>5}"
    print(header)
    for r in rows:
        cy_m = r.get("cython_matvec_s", float("nan"))
        cy_s = r.get("cython_step_s", float("nan"))
        print(f"{r['N']:>3} {r['dim']:>9} {r['plan_order']:>5} {r['python_matvec_s']:>10.4f} "
              f"{cy_m:>10.4f} {r.get('speedup_matvec', float('nan')):>5.1f} "
              f"{r['python_step_s']:>9.3f} {cy_s:>9.3f} {r.get('speedup_step', float('nan')):>5.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
