"""Produce the committed pendulum checkpoints and verify their quality.

Trains the desk-scale policy and critic stages through the normal CLI path,
then refuses to bless the result unless the gates below hold on the default
master seed. The artifacts directory only gets committed when this exits 0.

    python scripts/make_artifacts.py --out artifacts/pendulum
"""

import argparse
import math

import numpy as np

from criticgate import cli
from criticgate.harness import ExperimentConfig, run_experiment


def mean_reward(records):
    return float(np.mean([r.cumulative_reward for r in records]))


def pooled_std(a, b):
    va = np.var([r.cumulative_reward for r in a], ddof=1)
    vb = np.var([r.cumulative_reward for r in b], ddof=1)
    return math.sqrt(0.5 * (va + vb))


def run_mode(mode, out, seed, trials, horizon, checkpoint="late"):
    kwargs = dict(env_name="pendulum", mode=mode, trials=trials,
                  horizon=horizon, master_seed=seed, checkpoint=checkpoint)
    if mode != "fallback-only":
        kwargs["policy_path"] = f"{out}/policy_{checkpoint}.json"
    if mode in ("conservative", "balanced", "brave"):
        kwargs["critic_path"] = f"{out}/critic_{checkpoint}.json"
    records, _ = run_experiment(ExperimentConfig(**kwargs))
    return records


def main(argv=None):
    ap = argparse.ArgumentParser(description="train and gate the shipped checkpoints")
    ap.add_argument("--out", default="artifacts/pendulum")
    ap.add_argument("--seed", type=int, default=20260822)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--skip-train", action="store_true",
                    help="gate existing checkpoints without retraining")
    args = ap.parse_args(argv)

    if not args.skip_train:
        rc = cli.main(["train", "--env", "pendulum", "--seed", str(args.seed),
                       "--out", args.out])
        if rc != 0:
            print("training failed")
            return rc

    failures = []

    def gate(name, ok, detail):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        if not ok:
            failures.append(name)

    # conservative mode must keep the fallback's goal-reaching intact
    cons_long = run_mode("conservative", args.out, args.seed, args.trials, 1000)
    fb_long = run_mode("fallback-only", args.out, args.seed, args.trials, 1000)
    n_cons = sum(r.reached for r in cons_long)
    n_fb = sum(r.reached for r in fb_long)
    gate("conservative reach", n_cons == args.trials and n_cons >= n_fb,
         f"{n_cons}/{args.trials} reached (fallback-only {n_fb})")

    # freer gating must not cost reward beyond noise
    cons = run_mode("conservative", args.out, args.seed, args.trials, None)
    brave = run_mode("brave", args.out, args.seed, args.trials, None)
    m_c, m_b = mean_reward(cons), mean_reward(brave)
    s = pooled_std(cons, brave)
    gate("mode ordering", m_b >= m_c - s,
         f"brave {m_b:.1f} vs conservative {m_c:.1f} (pooled std {s:.1f})")

    # the trained policy must beat the fallback on its own objective
    base = run_mode("base-only", args.out, args.seed, args.trials, None)
    fb = run_mode("fallback-only", args.out, args.seed, args.trials, None)
    m_base, m_fb = mean_reward(base), mean_reward(fb)
    gate("policy beats fallback", m_base > m_fb,
         f"base-only {m_base:.1f} vs fallback-only {m_fb:.1f}")

    # and training must actually have progressed
    early = run_mode("base-only", args.out, args.seed, args.trials, None,
                     checkpoint="early")
    m_early = mean_reward(early)
    gate("late beats early", m_base > m_early,
         f"late {m_base:.1f} vs early {m_early:.1f}")

    if failures:
        print(f"\n{len(failures)} gate(s) failed: do not commit these artifacts")
        return 1
    print("\nall gates passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
