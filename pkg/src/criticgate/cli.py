"""Command-line surface: run experiments, train, certify, check weights."""

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .config import load_config, merge_options
from .envs import ENV_NAMES, make_env
from .harness import (EXPERIMENT_MODES, ExperimentConfig, emit_plot_data,
                      run_experiment, write_summary_csv)
from .networks import WeightsFormatError, check_probes, load_network, \
    save_network

RUN_DEFAULTS = {
    "env": "pendulum", "mode": "balanced", "p_relax": None, "lam": 0.9999,
    "nu": 0.01, "guard": False, "trials": 30, "seed": 20260822,
    "horizon": None, "policy": None, "critic": None, "checkpoint": "",
    "out": None,
}
TRAIN_DEFAULTS = {
    "env": "pendulum", "seed": 20260822, "iterations": 40, "population": 48,
    "rollouts": 3, "horizon": 200, "gamma": 0.99, "critic_steps": 8000,
    "critic_episodes": 150, "fit_critic": True, "out": "artifacts",
}
CERTIFY_DEFAULTS = {
    "env": "pendulum", "d_circ": 2.0, "d_star": 0.3, "nu": 0.01, "lam": 0.9,
    "p_relax": 0.5, "trials": 30, "seed": 20260822, "out": None,
}


def _add_config_flag(p):
    p.add_argument("--config", help="JSON config file; explicit flags win")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="criticgate",
        description="critic-gated policy switching laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate a mode over seeded trials")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--mode", choices=EXPERIMENT_MODES + ("all",))
    p.add_argument("--p-relax", dest="p_relax", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--guard", action="store_const", const=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--policy", help="portable policy weights file")
    p.add_argument("--critic", help="portable critic weights file")
    p.add_argument("--checkpoint", help="tag written into output rows")
    p.add_argument("--out", help="output directory for CSV files")
    _add_config_flag(p)

    p = sub.add_parser("train", help="desk-scale training with checkpoints")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--rollouts", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--critic-steps", dest="critic_steps", type=int)
    p.add_argument("--critic-episodes", dest="critic_episodes", type=int)
    p.add_argument("--no-critic", dest="fit_critic", action="store_const",
                   const=False)
    p.add_argument("--out", help="checkpoint directory")
    _add_config_flag(p)

    p = sub.add_parser("certify", help="certificate quantities and MC check")
    p.add_argument("--env", choices=("pendulum",))
    p.add_argument("--d-circ", dest="d_circ", type=float)
    p.add_argument("--d-star", dest="d_star", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--p-relax", dest="p_relax", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the full JSON report here")
    _add_config_flag(p)

    p = sub.add_parser("export-check",
                       help="verify a portable weights file and its probes")
    p.add_argument("weights", help="portable weights file to check")
    p.add_argument("--atol", type=float, default=1e-5)

    return parser


def _options(args, defaults):
    config = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {k: getattr(args, k) for k in defaults if hasattr(args, k)}
    return merge_options(defaults, config, flags)


def _cmd_run(args) -> int:
    opt = _options(args, RUN_DEFAULTS)
    modes = EXPERIMENT_MODES if opt["mode"] == "all" else (opt["mode"],)
    env = make_env(opt["env"])
    summaries = []
    results = []
    for mode in modes:
        cfg = ExperimentConfig(
            env_name=opt["env"], mode=mode, p_relax=opt["p_relax"],
            lam=opt["lam"], nu=opt["nu"], guard=opt["guard"],
            trials=opt["trials"], horizon=opt["horizon"],
            master_seed=opt["seed"], policy_path=opt["policy"],
            critic_path=opt["critic"], checkpoint=opt["checkpoint"] or "")
        recs, summary = run_experiment(cfg, env=env, out_dir=opt["out"])
        summaries.append(summary)
        results.append((mode, cfg.checkpoint, recs))
        print(f"{mode:>14}: reached {summary.n_reached}/{summary.trials}  "
              f"mean reward {summary.mean_reward:.3f} "
              f"(std {summary.std_reward:.3f})")
    if opt["out"] is not None:
        out = Path(opt["out"])
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(summaries, out / "summary.csv")
        if len(results) > 1:
            emit_plot_data(results, out)
        print(f"wrote {out / 'summary.csv'}")
    return 0


def _cmd_train(args) -> int:
    from .training import (CriticConfig, PolicySearchConfig, STAGES,
                           make_rng, network_from_vec, policy_act_from_vec,
                           train_critic, train_policy, trial_seed)

    opt = _options(args, TRAIN_DEFAULTS)
    env = make_env(opt["env"])
    out = Path(opt["out"])
    out.mkdir(parents=True, exist_ok=True)
    pcfg = PolicySearchConfig(iterations=opt["iterations"],
                              population=opt["population"],
                              rollouts=opt["rollouts"],
                              horizon=opt["horizon"])
    trained = train_policy(env, pcfg, seed=opt["seed"], verbose=True)
    probe_rng = make_rng(trial_seed(opt["seed"], 2))
    for stage in STAGES:
        net = network_from_vec(trained.checkpoints[stage], trained.sizes,
                               "policy-mean", env, probe_rng=probe_rng)
        save_network(net, out / f"policy_{stage}.json")
    with open(out / "training_log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("iteration", "elite_mean_return"))
        for i, r in enumerate(trained.history, start=1):
            w.writerow((i, repr(float(r))))
    print(f"wrote policy checkpoints and training_log.csv to {out}")
    if opt["fit_critic"]:
        ccfg = CriticConfig(steps=opt["critic_steps"],
                            episodes=opt["critic_episodes"],
                            gamma=opt["gamma"], horizon=opt["horizon"])
        for stage in STAGES:
            act = policy_act_from_vec(env, trained.checkpoints[stage],
                                      trained.sizes)
            fitted = train_critic(env, act, ccfg, seed=opt["seed"])
            net = network_from_vec(fitted.vec, fitted.sizes, "value",
                                   probe_rng=probe_rng)
            save_network(net, out / f"critic_{stage}.json")
            logged = [s for s in range(ccfg.log_every, ccfg.steps + 1,
                                       ccfg.log_every)]
            if ccfg.steps and ccfg.steps % ccfg.log_every:
                logged.append(ccfg.steps)
            with open(out / f"critic_log_{stage}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("step", "td_residual"))
                for s, r in zip(logged, fitted.residuals):
                    w.writerow((s, repr(float(r))))
        print(f"wrote critic checkpoints to {out}")
    return 0


def _cmd_certify(args) -> int:
    from .certificates import certify_pendulum

    opt = _options(args, CERTIFY_DEFAULTS)
    report = certify_pendulum(d_circ=opt["d_circ"], d_star=opt["d_star"],
                              nu=opt["nu"], lam=opt["lam"],
                              p_relax=opt["p_relax"], trials=opt["trials"],
                              master_seed=opt["seed"])
    print(report.summary_text())
    if opt["out"] is not None:
        report.to_json(opt["out"])
        print(f"wrote {opt['out']}")
    return 0


def _cmd_export_check(args) -> int:
    try:
        net = load_network(args.weights)
    except (OSError, WeightsFormatError) as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 1
    ok, worst, n = check_probes(net, atol=args.atol)
    label = "ok" if ok else "FAIL"
    print(f"{label}: role={net.role} layers={len(net.layers)} "
          f"probes={n} max_abs_err={worst:.3e}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "certify":
            return _cmd_certify(args)
        if args.command == "export-check":
            return _cmd_export_check(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
