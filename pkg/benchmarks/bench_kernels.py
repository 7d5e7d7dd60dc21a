"""Timing comparison of the compiled and pure kernel backends.

Runs the fused pendulum loops that dominate certification and long-horizon
verification runtimes. Usage:

    python benchmarks/bench_kernels.py --steps 200000 --repeats 3
"""

import argparse
import time

import numpy as np

from criticgate import _kernels_py
from criticgate import envs, policies

try:
    from criticgate import _kernels_cy
except ImportError:
    _kernels_cy = None


def time_backend(mod, steps, repeats, rng):
    pend = envs.make_env("pendulum").params
    fb = policies.fallback_params_for("pendulum")
    uniforms = rng.random(steps)
    outs = [np.zeros(steps, dtype=np.int8)] + [np.empty(steps) for _ in range(5)]
    gdist = np.empty(steps)

    best_shield = best_roll = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        mod.simulate_pendulum_shield(
            3.0, 0.0, steps, uniforms, 0.01, 0.999, 0.5, False, 2.0,
            fb.k_energy, fb.k_p, fb.k_d, fb.switch, fb.e_target,
            pend.g, pend.m, pend.l, pend.dt, pend.max_torque, *outs)
        best_shield = min(best_shield, time.perf_counter() - t0)

        t0 = time.perf_counter()
        mod.rollout_pendulum_fallback(
            3.0, 0.0, steps, fb.k_energy, fb.k_p, fb.k_d, fb.switch,
            fb.e_target, pend.g, pend.m, pend.l, pend.dt, pend.max_torque,
            gdist)
        best_roll = min(best_roll, time.perf_counter() - t0)
    return best_shield, best_roll


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    results = {}
    backends = [("pure", _kernels_py)]
    if _kernels_cy is not None:
        backends.append(("compiled", _kernels_cy))
    else:
        print("compiled backend not built; timing pure only")

    for name, mod in backends:
        shield_s, roll_s = time_backend(mod, args.steps, args.repeats, rng)
        results[name] = (shield_s, roll_s)
        print(f"{name:>8}  shield loop: {args.steps / shield_s:12.0f} steps/s"
              f"   fallback rollout: {args.steps / roll_s:12.0f} steps/s")

    if len(results) == 2:
        pu, co = results["pure"], results["compiled"]
        print(f"speedup   shield loop: {pu[0] / co[0]:6.1f}x"
              f"          fallback rollout: {pu[1] / co[1]:6.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
