"""Kernel backend selection.

Imports the compiled extension when it is available and falls back to the
pure Python implementation otherwise.  CRITICGATE_PURE=1 forces the fallback.
Both backends implement the same functions with identical numeric behaviour.
"""

import os

if os.environ.get("CRITICGATE_PURE") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

COMPILED = _impl.COMPILED
BACKEND = "compiled" if COMPILED else "pure"

DEC_FALLBACK = _impl.DEC_FALLBACK
DEC_BASE_IMPROVE = _impl.DEC_BASE_IMPROVE
DEC_BASE_RANDOM = _impl.DEC_BASE_RANDOM

wrap_angle = _impl.wrap_angle
pendulum_step = _impl.pendulum_step
pendulum_reward = _impl.pendulum_reward
pendulum_goal_distance = _impl.pendulum_goal_distance
pendulum_value = _impl.pendulum_value
pendulum_fallback = _impl.pendulum_fallback
cartpole_step = _impl.cartpole_step
cartpole_reward = _impl.cartpole_reward
cartpole_goal_distance = _impl.cartpole_goal_distance
cartpole_value = _impl.cartpole_value
cartpole_terminated = _impl.cartpole_terminated
cartpole_fallback = _impl.cartpole_fallback
rollout_pendulum_fallback = _impl.rollout_pendulum_fallback
simulate_pendulum_shield = _impl.simulate_pendulum_shield
