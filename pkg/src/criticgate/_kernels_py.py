"""Pure Python scalar kernels.

Reference implementation of the hot inner loops.  _kernels_cy.pyx mirrors this
module expression for expression; keep the float operation order identical in
both so the two backends agree bit for bit on the same inputs.
"""

import math

COMPILED = False

# decision codes shared by both backends
DEC_FALLBACK = 0
DEC_BASE_IMPROVE = 1
DEC_BASE_RANDOM = 2

TWO_PI = 6.283185307179586


def wrap_angle(th):
    """Map an angle to [-pi, pi)."""
    return th - TWO_PI * math.floor((th + math.pi) / TWO_PI)


# ---------------------------------------------------------------------------
# pendulum


def pendulum_step(th, om, u, g, m, l, dt, umax):
    """One semi-implicit Euler step; torque clamped to [-umax, umax]."""
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    om2 = om + dt * (-(3.0 * g / (2.0 * l)) * math.sin(th) + (3.0 / (m * l * l)) * u)
    th2 = th + dt * om2
    return th2, om2


def pendulum_reward(th, om, u, umax):
    """Negative cost on the current state and the applied (clamped) torque."""
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    c = math.cos(th)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    ang = math.acos(c)
    return -(ang * ang + 0.1 * (om * om) + 0.001 * (u * u))


def pendulum_goal_distance(th, om):
    # box: |cos th - 1| <= 1/20, |sin th| <= 1/20, |om| <= 3/10
    d = math.fabs(math.cos(th) - 1.0) - 0.05
    if d < 0.0:
        d = 0.0
    e = math.fabs(math.sin(th)) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = math.fabs(om) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    return d


def pendulum_value(th, om):
    """Handcrafted bounded critic: 0 on the goal set, decreasing away from it."""
    return -pendulum_goal_distance(th, om) - 0.05 * math.sqrt(th * th + om * om)


def pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax):
    """Energy regulation far from upright, PD capture near it."""
    if math.fabs(math.cos(th) - 1.0) <= switch:
        u = -kp * wrap_angle(th) - kd * om
    else:
        # potential term matches the restoring gravity torque of the dynamics,
        # so e is conserved under zero torque and the law is a strict drain
        e = 0.5 * (m * l * l / 3.0) * (om * om) + (m * g * l / 2.0) * (1.0 - math.cos(th))
        u = ke * om * (e_target - e)
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    return u


# ---------------------------------------------------------------------------
# cartpole


def cartpole_step(x, xd, th, thd, f, mc, mp, l, g, dt, fmax):
    """One semi-implicit Euler step; force clamped to [-fmax, fmax]."""
    if f > fmax:
        f = fmax
    elif f < -fmax:
        f = -fmax
    s = math.sin(th)
    c = math.cos(th)
    xdd = (f + mp * l * (thd * thd) * s - mp * g * s * c) / (mc + mp * s * s)
    thdd = (g * s - xdd * c) / l
    xd2 = xd + dt * xdd
    thd2 = thd + dt * thdd
    x2 = x + dt * xd2
    th2 = th + dt * thd2
    return x2, xd2, th2, thd2


def cartpole_reward(x, xd, th, thd, f):
    c = math.cos(th)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    ang = math.acos(c)
    return -(0.5 * (ang * ang) + 0.5 * (x * x) + 0.05 * (thd * thd) + 0.05 * (xd * xd))


def cartpole_goal_distance(x, xd, th, thd):
    # box: |cos th - 1|, |sin th|, |thd| <= 1/20 and |xd|, |x| <= 3/10
    d = math.fabs(math.cos(th) - 1.0) - 0.05
    if d < 0.0:
        d = 0.0
    e = math.fabs(math.sin(th)) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = math.fabs(thd) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = math.fabs(xd) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = math.fabs(x) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    return d


def cartpole_value(x, xd, th, thd):
    n = math.sqrt(x * x + xd * xd + th * th + thd * thd)
    return -cartpole_goal_distance(x, xd, th, thd) - 0.05 * n


def cartpole_terminated(x, xd, th, thd):
    return math.fabs(x) > 5.0 or math.fabs(xd) > 8.0 or math.fabs(thd) > 10.0


def cartpole_fallback(x, xd, th, thd, ke, kxp, kxd, k1, k2, k3, k4,
                      switch, e_target, kick, mc, mp, l, g, fmax):
    """Pole-energy pumping with cart centering; full-state feedback near upright."""
    s = math.sin(th)
    c = math.cos(th)
    if math.fabs(c - 1.0) <= switch:
        f = k1 * wrap_angle(th) + k2 * thd + k3 * x + k4 * xd
    else:
        e = 0.5 * mp * (l * l) * (thd * thd) + mp * g * l * (c - 1.0)
        xdd_des = ke * (e - e_target) * thd * c - kxp * x - kxd * xd
        # hanging rest is a dead point of the pump; nudge the cart out of it
        if math.fabs(thd) < 0.05 and c < -0.9:
            xdd_des = xdd_des + kick
        f = (mc + mp * s * s) * xdd_des - mp * l * (thd * thd) * s + mp * g * s * c
    if f > fmax:
        f = fmax
    elif f < -fmax:
        f = -fmax
    return f


# ---------------------------------------------------------------------------
# fused loops (pendulum only; these dominate the certification runtimes)


def rollout_pendulum_fallback(th, om, n, ke, kp, kd, switch, e_target,
                              g, m, l, dt, umax, out_gdist):
    """Roll the fallback for n steps, recording d_G of each visited state.

    out_gdist[t] is the distance of the state at step t, before acting.
    Returns the final (th, om).
    """
    for t in range(n):
        out_gdist[t] = pendulum_goal_distance(th, om)
        u = pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax)
        th, om = pendulum_step(th, om, u, g, m, l, dt, umax)
    return th, om


def simulate_pendulum_shield(th, om, n, uniforms, nu, lam, p_relax, guard,
                             base_torque, ke, kp, kd, switch, e_target,
                             g, m, l, dt, umax,
                             out_dec, out_v, out_vdag, out_rho, out_rew, out_gdist):
    """Shielded episode with the handcrafted critic and a constant-torque base.

    uniforms holds one pre-drawn U_t per step; decision codes land in out_dec.
    out_vdag[t] is the best value after the step-t update.  Returns (th, om).
    """
    v0 = pendulum_value(th, om)
    vdag = v0
    for t in range(n):
        v = pendulum_value(th, om)
        rho = math.pow(lam, t) * p_relax
        if guard and v < v0:
            rho = 0.0
        if v >= vdag + nu:
            dec = DEC_BASE_IMPROVE
            vdag = v
            u = base_torque
        elif uniforms[t] < rho:
            dec = DEC_BASE_RANDOM
            u = base_torque
        else:
            dec = DEC_FALLBACK
            u = pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax)
        out_dec[t] = dec
        out_v[t] = v
        out_vdag[t] = vdag
        out_rho[t] = rho
        out_rew[t] = pendulum_reward(th, om, u, umax)
        out_gdist[t] = pendulum_goal_distance(th, om)
        th, om = pendulum_step(th, om, u, g, m, l, dt, umax)
    return th, om
