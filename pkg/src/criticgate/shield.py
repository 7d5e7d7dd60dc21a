"""Runtime shield: critic-gated switching between a base policy and a fallback.

Each step the shield accepts the base action if the critic value improved on
the best value seen so far by at least nu, or with a probability that decays
geometrically over time; otherwise the fallback acts.  The decision record of
every step is kept so the switching-count bounds can be checked after the run.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .envs import EnvDescriptor
from .policies import CriticHandle, PolicyHandle
from .seeding import make_rng

DEC_FALLBACK = kernels.DEC_FALLBACK
DEC_BASE_IMPROVE = kernels.DEC_BASE_IMPROVE
DEC_BASE_RANDOM = kernels.DEC_BASE_RANDOM
DEC_BASE_FORCED = 3
DEC_FALLBACK_FORCED = 4

DECISION_LABELS = {
    DEC_FALLBACK: "fallback",
    DEC_BASE_IMPROVE: "base-improve",
    DEC_BASE_RANDOM: "base-random",
    DEC_BASE_FORCED: "base-forced",
    DEC_FALLBACK_FORCED: "fallback-forced",
}
DECISION_CODES = {v: k for k, v in DECISION_LABELS.items()}

MODES = ("shield", "base-only", "fallback-only")


@dataclass(frozen=True)
class ShieldConfig:
    nu: float = 0.01          # required critic improvement per acceptance
    lam: float = 0.9999       # geometric decay of the relaxed acceptance
    p_relax: float = 0.5      # initial relaxed acceptance probability
    guard: bool = False       # zero relaxed acceptance below the initial value
    horizon: int = 200

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")
        if not 0.0 <= self.p_relax <= 1.0:
            raise ValueError(f"p_relax must lie in [0, 1], got {self.p_relax}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


def acceptance_probability(cfg: ShieldConfig, t: int,
                           value: float | None = None,
                           initial_value: float | None = None) -> float:
    """Probability of accepting the base action at step t absent improvement."""
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")
    if cfg.guard:
        if value is None or initial_value is None:
            raise ValueError("guard needs the current and initial critic values")
        if value < initial_value:
            return 0.0
    return cfg.lam ** t * cfg.p_relax


@dataclass
class TrialRecord:
    env_name: str
    mode: str
    seed: Optional[int]
    horizon: int
    steps: int
    terminated: bool
    reached: bool
    cumulative_reward: float
    n_improve: int            # steps accepted on critic improvement
    n_random_accept: int      # steps with U_t below the acceptance probability
    n_base: int               # steps the base policy acted
    n_fallback: int
    last_base_step: int       # -1 when the base never acted
    v_initial: float
    v_best_final: float
    final_state: np.ndarray
    decisions: Optional[np.ndarray] = field(default=None, repr=False)
    v_now: Optional[np.ndarray] = field(default=None, repr=False)
    v_dagger: Optional[np.ndarray] = field(default=None, repr=False)
    rho: Optional[np.ndarray] = field(default=None, repr=False)
    u: Optional[np.ndarray] = field(default=None, repr=False)
    reward: Optional[np.ndarray] = field(default=None, repr=False)
    goal_dist: Optional[np.ndarray] = field(default=None, repr=False)


GOAL_WINDOW = 20  # consecutive closing steps that must sit inside the goal set


def _finalize(env, mode, seed, cfg, steps, terminated, dec, v_now, vdag, rho, u,
              rew, gdist, v0, final_state, record_arrays):
    dec = dec[:steps]
    v_now = v_now[:steps]
    vdag = vdag[:steps]
    rho = rho[:steps]
    u = u[:steps]
    rew = rew[:steps]
    gdist = gdist[:steps]
    base_mask = (dec == DEC_BASE_IMPROVE) | (dec == DEC_BASE_RANDOM) \
        | (dec == DEC_BASE_FORCED)
    n_base = int(base_mask.sum())
    with np.errstate(invalid="ignore"):
        n_random = int(np.sum(u < rho))
    reached = (not terminated) and steps == cfg.horizon and steps >= GOAL_WINDOW \
        and bool(np.all(gdist[-GOAL_WINDOW:] == 0.0))
    last_base = int(np.nonzero(base_mask)[0][-1]) if n_base > 0 else -1
    rec = TrialRecord(
        env_name=env.name, mode=mode, seed=seed, horizon=cfg.horizon,
        steps=steps, terminated=terminated, reached=reached,
        cumulative_reward=float(rew.sum()),
        n_improve=int(np.sum(dec == DEC_BASE_IMPROVE)),
        n_random_accept=n_random,
        n_base=n_base,
        n_fallback=int(np.sum((dec == DEC_FALLBACK) | (dec == DEC_FALLBACK_FORCED))),
        last_base_step=last_base,
        v_initial=v0,
        v_best_final=float(vdag[-1]) if steps > 0 else v0,
        final_state=final_state,
    )
    if record_arrays:
        rec.decisions = dec
        rec.v_now = v_now
        rec.v_dagger = vdag
        rec.rho = rho
        rec.u = u
        rec.reward = rew
        rec.goal_dist = gdist
    return rec


def _fast_eligible(env, base, critic, fallback, mode):
    return (mode == "shield"
            and env.name == "pendulum"
            and critic is not None and critic.meta.get("kind") == "handcrafted"
            and base is not None and "constant" in base.meta
            and fallback is not None and "fallback_params" in fallback.meta)


def run_episode(env: EnvDescriptor,
                base: Optional[PolicyHandle],
                critic: Optional[CriticHandle],
                fallback: Optional[PolicyHandle],
                cfg: ShieldConfig,
                *,
                mode: str = "shield",
                seed: Optional[int] = None,
                rng: Optional[np.random.Generator] = None,
                init_state: Optional[np.ndarray] = None,
                record_arrays: bool = True,
                use_fast="auto") -> TrialRecord:
    """Run one episode and return its decision record.

    The initial state is drawn first, then one uniform per step is pre-drawn,
    so trajectories with the same seed start identically in every mode.
    Termination cuts the episode short; truncation at cfg.horizon does not
    count as termination.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "shield" and (base is None or critic is None or fallback is None):
        raise ValueError("shield mode needs base, critic and fallback handles")
    if mode == "base-only" and base is None:
        raise ValueError("base-only mode needs a base policy")
    if mode == "fallback-only" and fallback is None:
        raise ValueError("fallback-only mode needs a fallback policy")

    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    s = np.asarray(init_state, dtype=np.float64).copy() if init_state is not None \
        else env.sample_initial(rng)
    H = cfg.horizon
    u = rng.random(H)

    n = H
    dec = np.zeros(n, dtype=np.int8)
    v_now = np.full(n, np.nan)
    vdag_arr = np.full(n, np.nan)
    rho_arr = np.full(n, np.nan)
    rew = np.zeros(n)
    gdist = np.zeros(n)

    fast = _fast_eligible(env, base, critic, fallback, mode)
    if use_fast is True and not fast:
        raise ValueError("fast path requested but this configuration is not eligible")
    if use_fast is False:
        fast = False

    if fast:
        fp = fallback.meta["fallback_params"]
        ep = env.params
        th, om = kernels.simulate_pendulum_shield(
            s[0], s[1], n, u, cfg.nu, cfg.lam, cfg.p_relax, cfg.guard,
            float(base.meta["constant"]),
            fp.k_energy, fp.k_p, fp.k_d, fp.switch, fp.e_target,
            ep.g, ep.m, ep.l, ep.dt, ep.max_torque,
            dec, v_now, vdag_arr, rho_arr, rew, gdist)
        v0 = kernels.pendulum_value(s[0], s[1])
        return _finalize(env, mode, seed, cfg, n, False, dec, v_now, vdag_arr,
                         rho_arr, u, rew, gdist, v0, np.array([th, om]),
                         record_arrays)

    obs = env.observe(s)
    v0 = critic.value(s, obs) if critic is not None else math.nan
    vdag = v0
    steps = 0
    terminated = False
    for t in range(H):
        if env.terminated(s):
            terminated = True
            break
        obs = env.observe(s)
        if mode == "shield":
            v = critic.value(s, obs)
            rho = cfg.lam ** t * cfg.p_relax
            if cfg.guard and v < v0:
                rho = 0.0
            if v >= vdag + cfg.nu:
                d = DEC_BASE_IMPROVE
                vdag = v
                a = base.act(s, obs)
            elif u[t] < rho:
                d = DEC_BASE_RANDOM
                a = base.act(s, obs)
            else:
                d = DEC_FALLBACK
                a = fallback.act(s, obs)
            v_now[t] = v
            vdag_arr[t] = vdag
            rho_arr[t] = rho
        elif mode == "base-only":
            d = DEC_BASE_FORCED
            a = base.act(s, obs)
            if critic is not None:
                v_now[t] = critic.value(s, obs)
        else:
            d = DEC_FALLBACK_FORCED
            a = fallback.act(s, obs)
            if critic is not None:
                v_now[t] = critic.value(s, obs)
        dec[t] = d
        rew[t] = env.reward(s, a)
        gdist[t] = env.goal_distance(s)
        s = env.step(s, a)
        steps = t + 1
    return _finalize(env, mode, seed, cfg, steps, terminated, dec, v_now,
                     vdag_arr, rho_arr, u, rew, gdist, v0, s, record_arrays)


# ---------------------------------------------------------------------------
# decision log serialization

LOG_COLUMNS = ("t", "decision", "v_now", "v_dagger", "rho_t", "u_t",
               "reward", "goal_distance")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_decision_log(record: TrialRecord, path) -> None:
    """Per-step decision log; v_dagger holds the post-update best value."""
    if record.decisions is None:
        raise ValueError("record was created with record_arrays=False")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for t in range(record.steps):
            w.writerow([
                t,
                DECISION_LABELS[int(record.decisions[t])],
                _fmt(record.v_now[t]),
                _fmt(record.v_dagger[t]),
                _fmt(record.rho[t]),
                _fmt(record.u[t]),
                _fmt(record.reward[t]),
                _fmt(record.goal_dist[t]),
            ])


def read_decision_log(path) -> dict:
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = tuple(next(rdr))
        if header != LOG_COLUMNS:
            raise ValueError(f"unexpected decision log header: {header}")
        rows = list(rdr)
    out = {
        "t": np.array([int(r[0]) for r in rows], dtype=np.int64),
        "decision": [r[1] for r in rows],
    }
    for j, col in enumerate(LOG_COLUMNS[2:], start=2):
        out[col] = np.array([float(r[j]) for r in rows])
    return out
