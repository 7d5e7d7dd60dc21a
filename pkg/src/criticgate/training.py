"""Desk-scale training: cross-entropy policy search plus a TD(0) critic.

Both trainers operate on small dense networks held as flat parameter vectors.
The policy search needs no gradients at all, and the critic backprop fits in a
page of numpy, so training stays dependency-free and bit-reproducible.
Checkpoints are taken at fixed fractions of the run and exported as portable
weight files with embedded probes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .envs import EnvDescriptor
from .networks import Layer, PortableNetwork
from .seeding import make_rng, trial_seed

STAGES = ("early", "mid", "late")
STAGE_FRACTIONS = {"early": 0.1, "mid": 0.5, "late": 1.0}


def stage_point(stage: str, total: int) -> int:
    """1-based iteration at which the named checkpoint is taken."""
    if stage not in STAGE_FRACTIONS:
        raise ValueError(f"unknown stage {stage!r}")
    return max(1, int(round(STAGE_FRACTIONS[stage] * total)))


# ---------------------------------------------------------------------------
# flat-vector MLP: tanh hidden layers, linear output


def layer_sizes(input_dim: int, hidden, output_dim: int) -> tuple:
    return (int(input_dim),) + tuple(int(h) for h in hidden) + (int(output_dim),)


def num_params(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_params(rng, sizes) -> np.ndarray:
    """Scaled normal weights, zero biases, packed into one flat vector."""
    chunks = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        chunks.append(rng.normal(0.0, 1.0 / math.sqrt(fan_in),
                                 size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack(vec, sizes):
    """Flat vector -> weight list ((out, in) each) and bias list, as views."""
    ws, bs = [], []
    at = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        ws.append(vec[at:at + fan_in * fan_out].reshape(fan_out, fan_in))
        at += fan_in * fan_out
        bs.append(vec[at:at + fan_out])
        at += fan_out
    if at != len(vec):
        raise ValueError(f"vector length {len(vec)} does not match sizes {sizes}")
    return ws, bs


def pack(ws, bs) -> np.ndarray:
    out = []
    for w, b in zip(ws, bs):
        out.append(np.ravel(w))
        out.append(np.ravel(b))
    return np.concatenate(out)


def mlp_forward(ws, bs, x):
    """Batched forward pass; returns the output and per-layer activations."""
    h = np.asarray(x, dtype=np.float64)
    acts = [h]
    for i in range(len(ws) - 1):
        h = np.tanh(h @ ws[i].T + bs[i])
        acts.append(h)
    return h @ ws[-1].T + bs[-1], acts


def mlp_backward(ws, acts, dout):
    """Gradients of sum(dout * output) with respect to every parameter."""
    gws = [None] * len(ws)
    gbs = [None] * len(ws)
    g = np.asarray(dout, dtype=np.float64)
    for i in range(len(ws) - 1, -1, -1):
        gws[i] = g.T @ acts[i]
        gbs[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ ws[i]) * (1.0 - acts[i] * acts[i])
    return gws, gbs


class Adam:
    """Plain Adam on a flat parameter vector."""

    def __init__(self, dim, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.b1 = beta1
        self.b2 = beta2
        self.eps = eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def step(self, x, g):
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * g
        self.v = self.b2 * self.v + (1.0 - self.b2) * g * g
        mh = self.m / (1.0 - self.b1 ** self.t)
        vh = self.v / (1.0 - self.b2 ** self.t)
        return x - self.lr * mh / (np.sqrt(vh) + self.eps)


def squash_action(env: EnvDescriptor, raw: float) -> float:
    """Same map the exported networks apply: tanh into the action box.

    Uses numpy's tanh, which can differ from libm in the last ulp; the
    exported nets squash with it, and actions must match bit for bit."""
    return env.action_low \
        + (float(np.tanh(raw)) + 1.0) * 0.5 * (env.action_high - env.action_low)


def policy_act_from_vec(env, vec, sizes):
    ws, bs = unpack(np.asarray(vec, dtype=np.float64), sizes)

    def act(s, obs):
        out, _ = mlp_forward(ws, bs, obs[None, :])
        return squash_action(env, float(out[0, 0]))

    return act


def make_probes(net: PortableNetwork, rng, n: int = 100, scale: float = 2.0):
    """Random input probes with the raw (pre-squash) outputs they produce."""
    ins = rng.uniform(-scale, scale, size=(n, net.input_dim))
    return [(ins[i].copy(), np.asarray(net.forward(ins[i]), dtype=np.float64))
            for i in range(n)]


def network_from_vec(vec, sizes, role: str, env: EnvDescriptor | None = None,
                     probe_rng=None, n_probes: int = 100) -> PortableNetwork:
    """Wrap a flat parameter vector as a portable network, with probes."""
    ws, bs = unpack(np.asarray(vec, dtype=np.float64), sizes)
    layers = [Layer(weight=w.copy(), bias=b.copy(),
                    activation="tanh" if i < len(ws) - 1 else "linear")
              for i, (w, b) in enumerate(zip(ws, bs))]
    kw = {}
    if role == "policy-mean":
        if env is None:
            raise ValueError("policy export needs the environment action box")
        kw = dict(squash="tanh",
                  action_low=np.full(sizes[-1], env.action_low),
                  action_high=np.full(sizes[-1], env.action_high))
    net = PortableNetwork(role=role, input_dim=sizes[0], output_dim=sizes[-1],
                          layers=layers, **kw)
    if probe_rng is not None:
        net.probes = make_probes(net, probe_rng, n_probes)
    return net


# ---------------------------------------------------------------------------
# cross-entropy policy search


@dataclass(frozen=True)
class PolicySearchConfig:
    iterations: int = 40
    population: int = 48
    elite_frac: float = 0.125
    rollouts: int = 3         # common initial states shared across candidates
    horizon: int = 200
    hidden: tuple = (64, 64)
    init_std: float = 0.5
    min_std: float = 0.02

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0.0 < self.elite_frac < 1.0:
            raise ValueError("elite_frac must lie in (0, 1)")


@dataclass
class TrainedPolicy:
    sizes: tuple
    mean: np.ndarray
    history: np.ndarray      # elite mean return per iteration
    checkpoints: dict        # stage name -> flat parameter vector


def evaluate_policy_vec(env, vec, sizes, horizon, init_states) -> float:
    """Mean return of the squashed policy over the given starts."""
    ws, bs = unpack(vec, sizes)
    total = 0.0
    for s0 in init_states:
        s = s0.copy()
        ret = 0.0
        for _ in range(horizon):
            if env.terminated(s):
                break
            obs = env.observe(s)
            out, _ = mlp_forward(ws, bs, obs[None, :])
            a = squash_action(env, float(out[0, 0]))
            ret += env.reward(s, a)
            s = env.step(s, a)
        total += ret
    return total / len(init_states)


def train_policy(env: EnvDescriptor, cfg: PolicySearchConfig = None,
                 seed: int = 0, verbose: bool = False) -> TrainedPolicy:
    """Search over flat parameter vectors with a diagonal Gaussian.

    Every candidate in an iteration is scored on the same initial states, so
    selection compares policies rather than starting luck.
    """
    cfg = cfg if cfg is not None else PolicySearchConfig()
    rng = make_rng(trial_seed(seed, 0))
    sizes = layer_sizes(env.obs_dim, cfg.hidden, 1)
    mean = init_params(rng, sizes)
    if cfg.iterations == 0:
        return TrainedPolicy(sizes=sizes, mean=mean, history=np.empty(0),
                             checkpoints={st: mean.copy() for st in STAGES})
    std = np.full(mean.size, cfg.init_std)
    n_elite = max(1, int(round(cfg.population * cfg.elite_frac)))
    marks = {stage_point(st, cfg.iterations) for st in STAGES}
    snaps = {}
    history = np.empty(cfg.iterations)
    for it in range(1, cfg.iterations + 1):
        noise = rng.standard_normal((cfg.population, mean.size))
        cands = mean[None, :] + std[None, :] * noise
        starts = [env.sample_initial(rng) for _ in range(cfg.rollouts)]
        scores = np.array([evaluate_policy_vec(env, c, sizes, cfg.horizon, starts)
                           for c in cands])
        if not np.all(np.isfinite(scores)):
            raise RuntimeError(
                f"non-finite candidate returns at iteration {it}; "
                f"worst score {np.nanmin(scores)}")
        order = np.argsort(scores)[::-1]
        elite = cands[order[:n_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), cfg.min_std)
        history[it - 1] = float(scores[order[:n_elite]].mean())
        if it in marks:
            snaps[it] = mean.copy()
        if verbose:
            print(f"iter {it:3d}  elite return {history[it - 1]:10.3f}")
    checkpoints = {st: snaps[stage_point(st, cfg.iterations)] for st in STAGES}
    return TrainedPolicy(sizes=sizes, mean=mean, history=history,
                         checkpoints=checkpoints)


# ---------------------------------------------------------------------------
# TD(0) critic


@dataclass(frozen=True)
class CriticConfig:
    episodes: int = 150
    horizon: int = 200
    gamma: float = 0.99
    lr: float = 1e-2
    batch: int = 64
    steps: int = 8000
    hidden: tuple = (64, 64)
    log_every: int = 50

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.steps < 0 or self.episodes < 1:
            raise ValueError("steps must be >= 0 and episodes >= 1")


@dataclass
class TrainedCritic:
    sizes: tuple
    vec: np.ndarray
    residuals: np.ndarray    # mean squared TD error, every log_every steps
    checkpoints: dict


def collect_transitions(env, act, episodes, horizon, rng):
    """Behavior rollouts as flat (obs, reward, next_obs, continue) arrays."""
    obs_l, rew_l, nxt_l, cont_l = [], [], [], []
    for _ in range(episodes):
        s = env.sample_initial(rng)
        for _ in range(horizon):
            if env.terminated(s):
                break
            obs = env.observe(s)
            a = act(s, obs)
            r = env.reward(s, a)
            s = env.step(s, a)
            obs_l.append(obs)
            rew_l.append(r)
            nxt_l.append(env.observe(s))
            cont_l.append(0.0 if env.terminated(s) else 1.0)
    return (np.array(obs_l), np.array(rew_l), np.array(nxt_l),
            np.array(cont_l))


def train_critic(env: EnvDescriptor, act, cfg: CriticConfig = None,
                 seed: int = 0, verbose: bool = False) -> TrainedCritic:
    """Fit V of the behavior policy by semi-gradient TD(0) on replayed data."""
    cfg = cfg if cfg is not None else CriticConfig()
    rng = make_rng(trial_seed(seed, 1))
    obs, rew, nxt, cont = collect_transitions(env, act, cfg.episodes,
                                              cfg.horizon, rng)
    n = len(obs)
    sizes = layer_sizes(env.obs_dim, cfg.hidden, 1)
    vec = init_params(rng, sizes)
    if cfg.steps == 0:
        return TrainedCritic(sizes=sizes, vec=vec, residuals=np.empty(0),
                             checkpoints={st: vec.copy() for st in STAGES})
    opt = Adam(vec.size, lr=cfg.lr)
    marks = {stage_point(st, cfg.steps) for st in STAGES}
    snaps = {}
    residuals = []
    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, n, size=cfg.batch)
        ws, bs = unpack(vec, sizes)
        v, acts_cache = mlp_forward(ws, bs, obs[idx])
        v_next, _ = mlp_forward(ws, bs, nxt[idx])
        target = rew[idx, None] + cfg.gamma * v_next * cont[idx, None]
        err = v - target                       # target held fixed
        gws, gbs = mlp_backward(ws, acts_cache, (2.0 / cfg.batch) * err)
        vec = opt.step(vec, pack(gws, gbs))
        if step % cfg.log_every == 0 or step == cfg.steps:
            res = float(np.mean(err * err))
            if not math.isfinite(res):
                raise RuntimeError(f"TD residual diverged at step {step}")
            residuals.append(res)
            if verbose:
                print(f"step {step:6d}  td residual {residuals[-1]:10.5f}")
        if step in marks:
            snaps[step] = vec.copy()
    checkpoints = {st: snaps[stage_point(st, cfg.steps)] for st in STAGES}
    return TrainedCritic(sizes=sizes, vec=vec, residuals=np.array(residuals),
                         checkpoints=checkpoints)
