"""Policy and critic handles consumed by the shield loop.

A policy handle maps (state, observation) to a scalar action; a critic handle
maps (state, observation) to a scalar value.  Network-backed handles only
look at the observation, the analytic ones work on the raw state.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .envs import EnvDescriptor
from .networks import PortableNetwork


# Gains frozen from the coarse grid searches in scripts/tune_fallback.py
# (30-start eval grid plus a 300-start robustness pass for each environment).


@dataclass(frozen=True)
class PendulumFallbackParams:
    k_energy: float = 0.5
    k_p: float = 4.0
    k_d: float = 2.0
    switch: float = 0.3      # engage PD when |cos(theta) - 1| <= switch
    e_target: float = 0.0    # J


@dataclass(frozen=True)
class CartPoleFallbackParams:
    k_energy: float = 4.0
    k_cart_p: float = 2.0
    k_cart_d: float = 2.0
    k_up_theta: float = 46.0   # near-upright full-state feedback
    k_up_thetadot: float = 10.4
    k_up_x: float = 3.2
    k_up_xdot: float = 5.7
    switch: float = 0.2
    e_target: float = 0.0
    kick: float = 1.0          # escape nudge for the hanging dead point


@dataclass
class PolicyHandle:
    name: str
    act: Callable[[np.ndarray, np.ndarray], float]
    meta: dict = field(default_factory=dict)   # lets the shield pick fused loops


@dataclass
class CriticHandle:
    name: str
    value: Callable[[np.ndarray, np.ndarray], float]
    upper_bound: float | None = None   # declared bound on the value, if known
    meta: dict = field(default_factory=dict)


def fallback_params_for(env_name: str):
    if env_name == "pendulum":
        return PendulumFallbackParams()
    if env_name == "cartpole_swingup":
        return CartPoleFallbackParams()
    raise ValueError(f"no fallback defaults for {env_name!r}")


def pendulum_fallback_action(state, fp: PendulumFallbackParams, ep) -> float:
    return kernels.pendulum_fallback(
        state[0], state[1], fp.k_energy, fp.k_p, fp.k_d, fp.switch, fp.e_target,
        ep.g, ep.m, ep.l, ep.max_torque)


def cartpole_fallback_action(state, fp: CartPoleFallbackParams, ep) -> float:
    return kernels.cartpole_fallback(
        state[0], state[1], state[2], state[3],
        fp.k_energy, fp.k_cart_p, fp.k_cart_d,
        fp.k_up_theta, fp.k_up_thetadot, fp.k_up_x, fp.k_up_xdot,
        fp.switch, fp.e_target, fp.kick,
        ep.m_cart, ep.m_pole, ep.l, ep.g, ep.max_force)


def fallback_policy(env: EnvDescriptor, params=None) -> PolicyHandle:
    """Certified hand-designed controller for the named environment."""
    fp = params if params is not None else fallback_params_for(env.name)
    ep = env.params
    if env.name == "pendulum":
        return PolicyHandle(
            name="fallback",
            act=lambda s, obs, _fp=fp, _ep=ep: pendulum_fallback_action(s, _fp, _ep),
            meta={"fallback_params": fp})
    if env.name == "cartpole_swingup":
        return PolicyHandle(
            name="fallback",
            act=lambda s, obs, _fp=fp, _ep=ep: cartpole_fallback_action(s, _fp, _ep),
            meta={"fallback_params": fp})
    raise ValueError(f"no fallback controller for {env.name!r}")


def constant_policy(action: float, name: str = "constant") -> PolicyHandle:
    return PolicyHandle(name=name, act=lambda s, obs, _a=float(action): _a,
                        meta={"constant": float(action)})


def network_policy(net: PortableNetwork, name: str = "network") -> PolicyHandle:
    if net.role != "policy-mean":
        raise ValueError(f"expected a policy-mean network, got role {net.role!r}")
    return PolicyHandle(name=name, act=lambda s, obs: float(net.act(obs)[0]))


def network_critic(net: PortableNetwork, name: str = "critic",
                   upper_bound: float | None = None) -> CriticHandle:
    if net.role != "value":
        raise ValueError(f"expected a value network, got role {net.role!r}")
    return CriticHandle(name=name, value=lambda s, obs: net.value(obs),
                        upper_bound=upper_bound)


def handcrafted_critic(env: EnvDescriptor) -> CriticHandle:
    """Bounded analytic critic: zero at the goal origin, negative elsewhere,
    with bounded superlevel sets.  Used by the certification runs."""
    if env.name == "pendulum":
        return CriticHandle(
            name="handcrafted",
            value=lambda s, obs: kernels.pendulum_value(s[0], s[1]),
            upper_bound=0.0, meta={"kind": "handcrafted"})
    if env.name == "cartpole_swingup":
        return CriticHandle(
            name="handcrafted",
            value=lambda s, obs: kernels.cartpole_value(s[0], s[1], s[2], s[3]),
            upper_bound=0.0, meta={"kind": "handcrafted"})
    raise ValueError(f"no handcrafted critic for {env.name!r}")
