"""Trial harness: repeated gated episodes over shared seeds, CSV reporting.

The named experiment modes fix the acceptance relaxation: conservative runs
with the lottery closed, balanced and brave open it progressively, and the
two forced modes bypass the gate entirely.  Every mode replays the same
per-trial seeds, so cross-mode comparisons are paired.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .envs import make_env
from .networks import load_network
from .policies import fallback_policy, network_critic, network_policy
from .seeding import trial_seed
from .shield import ShieldConfig, run_episode

RELAX_BY_MODE = {"conservative": 0.0, "balanced": 0.5, "brave": 0.95}
EXPERIMENT_MODES = ("conservative", "balanced", "brave",
                    "base-only", "fallback-only")

SCHEMA_VERSION = 1
TRIAL_COLUMNS = ("trial", "seed", "mode", "checkpoint", "steps", "terminated",
                 "reached", "cumulative_reward", "n_improve",
                 "n_random_accept", "n_base", "n_fallback", "last_base_step",
                 "v_initial", "v_best_final")
SUMMARY_COLUMNS = ("mode", "checkpoint", "trials", "n_reached", "reach_rate",
                   "n_terminated", "mean_reward", "std_reward", "mean_steps",
                   "mean_fallback_frac")
PLOT_COLUMNS = ("mode", "checkpoint", "trial", "reward", "reached")


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str = "pendulum"
    mode: str = "balanced"
    p_relax: Optional[float] = None   # None keeps the fixed per-mode value
    lam: float = 0.9999
    nu: float = 0.01
    guard: bool = False
    trials: int = 30
    horizon: Optional[int] = None     # None uses the env evaluation horizon
    master_seed: int = 20260822
    policy_path: Optional[str] = None
    critic_path: Optional[str] = None
    checkpoint: str = ""              # tag carried into every output row

    def __post_init__(self):
        if self.mode not in EXPERIMENT_MODES:
            raise ValueError(
                f"mode must be one of {EXPERIMENT_MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def resolved_p_relax(cfg: ExperimentConfig) -> float:
    if cfg.p_relax is not None:
        return cfg.p_relax
    return RELAX_BY_MODE.get(cfg.mode, 0.0)


def episode_mode(mode: str) -> str:
    return "shield" if mode in RELAX_BY_MODE else mode


def load_actors(env, cfg: ExperimentConfig):
    """Handles for the configured mode; weight files only where needed."""
    fallback = fallback_policy(env)
    base = critic = None
    em = episode_mode(cfg.mode)
    if em in ("shield", "base-only"):
        if cfg.policy_path is None:
            raise ValueError(f"{cfg.mode} mode needs a policy weights file")
        base = network_policy(load_network(cfg.policy_path))
    if em == "shield":
        if cfg.critic_path is None:
            raise ValueError(f"{cfg.mode} mode needs a critic weights file")
        critic = network_critic(load_network(cfg.critic_path))
    return base, critic, fallback


def shield_config_for(env, cfg: ExperimentConfig) -> ShieldConfig:
    horizon = cfg.horizon if cfg.horizon is not None else env.horizon_eval
    return ShieldConfig(nu=cfg.nu, lam=cfg.lam, p_relax=resolved_p_relax(cfg),
                        guard=cfg.guard, horizon=horizon)


def run_trials(env, base, critic, fallback, scfg: ShieldConfig, mode: str,
               trials: int, master_seed: int, record_arrays: bool = False):
    """One record per trial; trial k always runs under trial_seed(seed, k)."""
    em = episode_mode(mode)
    return [run_episode(env, base, critic, fallback, scfg, mode=em,
                        seed=trial_seed(master_seed, k),
                        record_arrays=record_arrays)
            for k in range(trials)]


def run_experiment(cfg: ExperimentConfig, env=None, actors=None,
                   out_dir=None):
    """Run one mode end to end; returns (records, summary).

    actors lets callers inject (base, critic, fallback) handles directly,
    bypassing the weight files.
    """
    env = env if env is not None else make_env(cfg.env_name)
    base, critic, fallback = actors if actors is not None \
        else load_actors(env, cfg)
    scfg = shield_config_for(env, cfg)
    recs = run_trials(env, base, critic, fallback, scfg, cfg.mode,
                      cfg.trials, cfg.master_seed)
    summary = summarize(recs, cfg.mode, cfg.checkpoint)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"_{cfg.checkpoint}" if cfg.checkpoint else ""
        write_trials_csv(recs, cfg.mode, cfg.checkpoint,
                         out / f"trials_{cfg.mode}{tag}.csv")
    return recs, summary


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class ModeSummary:
    mode: str
    checkpoint: str
    trials: int
    n_reached: int
    n_terminated: int
    mean_reward: float
    std_reward: float
    mean_steps: float
    mean_fallback_frac: float

    @property
    def reach_rate(self) -> float:
        return self.n_reached / self.trials


def summarize(recs, mode: str, checkpoint: str = "") -> ModeSummary:
    if not recs:
        raise ValueError("no trial records to summarize")
    rewards = np.array([r.cumulative_reward for r in recs])
    steps = np.array([r.steps for r in recs])
    fb = np.array([r.n_fallback / max(1, r.steps) for r in recs])
    return ModeSummary(
        mode=mode, checkpoint=checkpoint, trials=len(recs),
        n_reached=sum(r.reached for r in recs),
        n_terminated=sum(r.terminated for r in recs),
        mean_reward=float(rewards.mean()),
        std_reward=float(rewards.std(ddof=1)) if len(recs) > 1 else 0.0,
        mean_steps=float(steps.mean()),
        mean_fallback_frac=float(fb.mean()))


# ---------------------------------------------------------------------------
# CSV emission; floats go through repr so identical runs give identical bytes


def _fmt(x) -> str:
    return repr(float(x))


def write_trials_csv(recs, mode: str, checkpoint: str, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for k, r in enumerate(recs):
            w.writerow([k, r.seed, mode, checkpoint, r.steps,
                        int(r.terminated), int(r.reached),
                        _fmt(r.cumulative_reward), r.n_improve,
                        r.n_random_accept, r.n_base, r.n_fallback,
                        r.last_base_step, _fmt(r.v_initial),
                        _fmt(r.v_best_final)])


def read_trials_csv(path) -> list:
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = tuple(next(rdr))
        if header != TRIAL_COLUMNS:
            raise ValueError(f"unexpected trials header: {header}")
        rows = []
        for raw in rdr:
            rows.append({
                "trial": int(raw[0]), "seed": int(raw[1]), "mode": raw[2],
                "checkpoint": raw[3], "steps": int(raw[4]),
                "terminated": bool(int(raw[5])), "reached": bool(int(raw[6])),
                "cumulative_reward": float(raw[7]), "n_improve": int(raw[8]),
                "n_random_accept": int(raw[9]), "n_base": int(raw[10]),
                "n_fallback": int(raw[11]), "last_base_step": int(raw[12]),
                "v_initial": float(raw[13]), "v_best_final": float(raw[14]),
            })
    return rows


def write_summary_csv(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            w.writerow([s.mode, s.checkpoint, s.trials, s.n_reached,
                        _fmt(s.reach_rate), s.n_terminated,
                        _fmt(s.mean_reward), _fmt(s.std_reward),
                        _fmt(s.mean_steps), _fmt(s.mean_fallback_frac)])


def emit_plot_data(results, out_dir):
    """Long-format per-trial rows plus the aggregate table, plot-ready.

    results is an ordered list of (mode, checkpoint, records) triples.
    """
    if not results:
        raise ValueError("no results to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials_path = out / "plot_trials.csv"
    agg_path = out / "plot_aggregate.csv"
    with open(trials_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        for mode, checkpoint, recs in results:
            for k, r in enumerate(recs):
                w.writerow([mode, checkpoint, k, _fmt(r.cumulative_reward),
                            int(r.reached)])
    write_summary_csv([summarize(recs, mode, checkpoint)
                       for mode, checkpoint, recs in results], agg_path)
    return trials_path, agg_path


def read_plot_data(path) -> list:
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = tuple(next(rdr))
        if header != PLOT_COLUMNS:
            raise ValueError(f"unexpected plot header: {header}")
        return [{"mode": r[0], "checkpoint": r[1], "trial": int(r[2]),
                 "reward": float(r[3]), "reached": bool(int(r[4]))}
                for r in rdr]
