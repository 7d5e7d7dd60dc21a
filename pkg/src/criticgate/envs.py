"""Benchmark environments: torque-limited pendulum and cartpole swing-up.

States are float64 numpy arrays.  Pendulum layout: [theta, omega] with theta
unwrapped (theta = 0 is the goal orientation).  Cartpole layout:
[x, xdot, theta, thetadot] with theta = 0 the upright pole.

Both environments are deterministic; all randomness lives in the initial
state sampler.  Actions are scalars, clamped to the actuation bounds inside
the step and reward kernels.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PendulumParams:
    g: float = 10.0
    m: float = 1.0
    l: float = 1.0
    dt: float = 0.05
    max_torque: float = 2.0


@dataclass(frozen=True)
class CartPoleParams:
    m_cart: float = 1.0
    m_pole: float = 0.1
    l: float = 0.5
    g: float = 9.8
    dt: float = 0.02
    max_force: float = 10.0


@dataclass(frozen=True)
class GoalBox:
    """Axis-aligned goal set on derived features.

    Each entry maps a feature name to its halfwidth around zero.  The goal
    distance is the largest per-feature excess, so it is zero exactly on the
    goal set.
    """

    features: tuple[tuple[str, float], ...]


@dataclass
class EnvDescriptor:
    name: str
    state_dim: int
    obs_dim: int
    action_dim: int
    action_low: float
    action_high: float
    dt: float
    horizon_train: int
    horizon_eval: int
    goal: GoalBox
    params: object
    step: Callable[[np.ndarray, float], np.ndarray] = field(repr=False, default=None)
    reward: Callable[[np.ndarray, float], float] = field(repr=False, default=None)
    observe: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)
    sample_initial: Callable[[np.random.Generator], np.ndarray] = field(repr=False, default=None)
    goal_distance: Callable[[np.ndarray], float] = field(repr=False, default=None)
    terminated: Callable[[np.ndarray], bool] = field(repr=False, default=None)

    def transition_bound(self, state: np.ndarray, action: float) -> float:
        """Norm bound on the successor of (state, action); exact here because
        the dynamics are deterministic."""
        nxt = self.step(state, action)
        return float(np.sqrt(np.sum(nxt * nxt)))


def _check_state(state, dim, name):
    s = np.asarray(state, dtype=np.float64)
    if s.shape != (dim,):
        raise ValueError(f"{name} state must have shape ({dim},), got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite {name} state: {s}")
    return s


# ---------------------------------------------------------------------------
# pendulum


def _pendulum_step(p: PendulumParams, state, action):
    s = _check_state(state, 2, "pendulum")
    th, om = kernels.pendulum_step(s[0], s[1], float(action),
                                   p.g, p.m, p.l, p.dt, p.max_torque)
    return np.array([th, om])


def _pendulum_reward(p: PendulumParams, state, action):
    s = _check_state(state, 2, "pendulum")
    return kernels.pendulum_reward(s[0], s[1], float(action), p.max_torque)


def _pendulum_observe(state):
    s = _check_state(state, 2, "pendulum")
    return np.array([math.cos(s[0]), math.sin(s[0]), s[1]])


def _pendulum_sample(rng):
    th = rng.uniform(-math.pi, math.pi)
    om = rng.uniform(-1.0, 1.0)
    return np.array([th, om])


def _pendulum_goal_distance(state):
    s = _check_state(state, 2, "pendulum")
    return kernels.pendulum_goal_distance(s[0], s[1])


def pendulum_step_batch(theta, omega, torque, p: PendulumParams):
    """Vectorized pendulum step for grid sweeps; mirrors the scalar kernel."""
    u = np.clip(torque, -p.max_torque, p.max_torque)
    om2 = omega + p.dt * (-(3.0 * p.g / (2.0 * p.l)) * np.sin(theta)
                          + (3.0 / (p.m * p.l * p.l)) * u)
    th2 = theta + p.dt * om2
    return th2, om2


def pendulum_goal_distance_batch(theta, omega):
    d = np.maximum(np.abs(np.cos(theta) - 1.0) - 0.05, 0.0)
    d = np.maximum(d, np.maximum(np.abs(np.sin(theta)) - 0.05, 0.0))
    d = np.maximum(d, np.maximum(np.abs(omega) - 0.3, 0.0))
    return d


def pendulum_value_batch(theta, omega):
    return -pendulum_goal_distance_batch(theta, omega) \
        - 0.05 * np.sqrt(theta * theta + omega * omega)


# ---------------------------------------------------------------------------
# cartpole


def _cartpole_step(p: CartPoleParams, state, action):
    s = _check_state(state, 4, "cartpole")
    x, xd, th, thd = kernels.cartpole_step(s[0], s[1], s[2], s[3], float(action),
                                           p.m_cart, p.m_pole, p.l, p.g, p.dt,
                                           p.max_force)
    return np.array([x, xd, th, thd])


def _cartpole_reward(state, action):
    s = _check_state(state, 4, "cartpole")
    return kernels.cartpole_reward(s[0], s[1], s[2], s[3], float(action))


def _cartpole_observe(state):
    s = _check_state(state, 4, "cartpole")
    return np.array([s[0], s[1], math.cos(s[2]), math.sin(s[2]), s[3]])


def _cartpole_sample(rng):
    # draw order (theta, x, thetadot, xdot), stored as [x, xdot, theta, thetadot]
    th = rng.uniform(0.0, 2.0 * math.pi)
    x = rng.uniform(-1.0, 1.0)
    thd = rng.uniform(-1.0, 1.0)
    xd = rng.uniform(-1.0, 1.0)
    return np.array([x, xd, th, thd])


def _cartpole_goal_distance(state):
    s = _check_state(state, 4, "cartpole")
    return kernels.cartpole_goal_distance(s[0], s[1], s[2], s[3])


def _cartpole_terminated(state):
    s = _check_state(state, 4, "cartpole")
    return kernels.cartpole_terminated(s[0], s[1], s[2], s[3])


def cartpole_step_batch(x, xd, th, thd, force, p: CartPoleParams):
    f = np.clip(force, -p.max_force, p.max_force)
    s = np.sin(th)
    c = np.cos(th)
    xdd = (f + p.m_pole * p.l * (thd * thd) * s - p.m_pole * p.g * s * c) \
        / (p.m_cart + p.m_pole * s * s)
    thdd = (p.g * s - xdd * c) / p.l
    xd2 = xd + p.dt * xdd
    thd2 = thd + p.dt * thdd
    return x + p.dt * xd2, xd2, th + p.dt * thd2, thd2


def cartpole_goal_distance_batch(x, xd, th, thd):
    d = np.maximum(np.abs(np.cos(th) - 1.0) - 0.05, 0.0)
    d = np.maximum(d, np.maximum(np.abs(np.sin(th)) - 0.05, 0.0))
    d = np.maximum(d, np.maximum(np.abs(thd) - 0.05, 0.0))
    d = np.maximum(d, np.maximum(np.abs(xd) - 0.3, 0.0))
    d = np.maximum(d, np.maximum(np.abs(x) - 0.3, 0.0))
    return d


# ---------------------------------------------------------------------------
# registry

PENDULUM_GOAL = GoalBox(features=(
    ("cos(theta) - 1", 1.0 / 20.0),
    ("sin(theta)", 1.0 / 20.0),
    ("omega", 3.0 / 10.0),
))

CARTPOLE_GOAL = GoalBox(features=(
    ("cos(theta) - 1", 1.0 / 20.0),
    ("sin(theta)", 1.0 / 20.0),
    ("thetadot", 1.0 / 20.0),
    ("xdot", 3.0 / 10.0),
    ("x", 3.0 / 10.0),
))

ENV_NAMES = ("pendulum", "cartpole_swingup")


def make_env(name: str, **overrides) -> EnvDescriptor:
    """Build an environment descriptor by id.

    Keyword overrides patch the physical parameter dataclass, e.g.
    make_env("pendulum", g=9.81).
    """
    if name == "pendulum":
        p = replace(PendulumParams(), **overrides)
        return EnvDescriptor(
            name=name, state_dim=2, obs_dim=3, action_dim=1,
            action_low=-p.max_torque, action_high=p.max_torque,
            dt=p.dt, horizon_train=200, horizon_eval=200,
            goal=PENDULUM_GOAL, params=p,
            step=lambda s, a, _p=p: _pendulum_step(_p, s, a),
            reward=lambda s, a, _p=p: _pendulum_reward(_p, s, a),
            observe=_pendulum_observe,
            sample_initial=_pendulum_sample,
            goal_distance=_pendulum_goal_distance,
            terminated=lambda s: False,
        )
    if name == "cartpole_swingup":
        p = replace(CartPoleParams(), **overrides)
        return EnvDescriptor(
            name=name, state_dim=4, obs_dim=5, action_dim=1,
            action_low=-p.max_force, action_high=p.max_force,
            dt=p.dt, horizon_train=200, horizon_eval=1000,
            goal=CARTPOLE_GOAL, params=p,
            step=lambda s, a, _p=p: _cartpole_step(_p, s, a),
            reward=_cartpole_reward,
            observe=_cartpole_observe,
            sample_initial=_cartpole_sample,
            goal_distance=_cartpole_goal_distance,
            terminated=_cartpole_terminated,
        )
    raise ValueError(f"unknown environment {name!r}; known: {ENV_NAMES}")
