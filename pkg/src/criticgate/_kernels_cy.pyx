# cython: language_level=3
"""Compiled scalar kernels.

Transliteration of _kernels_py.py.  Keep the float operation order identical
to the reference module: both backends must agree bit for bit on the same
inputs, and the parity tests enforce that.
"""

from libc.math cimport sin, cos, acos, sqrt, fabs, floor, pow, M_PI

COMPILED = True

DEC_FALLBACK = 0
DEC_BASE_IMPROVE = 1
DEC_BASE_RANDOM = 2

TWO_PI = 6.283185307179586

cdef double _TWO_PI = 6.283185307179586
cdef signed char _DEC_FALLBACK = 0
cdef signed char _DEC_BASE_IMPROVE = 1
cdef signed char _DEC_BASE_RANDOM = 2


cdef inline double _wrap_angle(double th) nogil:
    return th - _TWO_PI * floor((th + M_PI) / _TWO_PI)


def wrap_angle(double th):
    """Map an angle to [-pi, pi)."""
    return _wrap_angle(th)


# ---------------------------------------------------------------------------
# pendulum


cdef inline void _pendulum_step(double* th, double* om, double u,
                                double g, double m, double l, double dt,
                                double umax) nogil:
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    om[0] = om[0] + dt * (-(3.0 * g / (2.0 * l)) * sin(th[0]) + (3.0 / (m * l * l)) * u)
    th[0] = th[0] + dt * om[0]


def pendulum_step(double th, double om, double u,
                  double g, double m, double l, double dt, double umax):
    """One semi-implicit Euler step; torque clamped to [-umax, umax]."""
    _pendulum_step(&th, &om, u, g, m, l, dt, umax)
    return th, om


cdef inline double _pendulum_reward(double th, double om, double u,
                                    double umax) nogil:
    cdef double c, ang
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    c = cos(th)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    ang = acos(c)
    return -(ang * ang + 0.1 * (om * om) + 0.001 * (u * u))


def pendulum_reward(double th, double om, double u, double umax):
    return _pendulum_reward(th, om, u, umax)


cdef inline double _pendulum_goal_distance(double th, double om) nogil:
    cdef double d, e
    d = fabs(cos(th) - 1.0) - 0.05
    if d < 0.0:
        d = 0.0
    e = fabs(sin(th)) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = fabs(om) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    return d


def pendulum_goal_distance(double th, double om):
    return _pendulum_goal_distance(th, om)


cdef inline double _pendulum_value(double th, double om) nogil:
    return -_pendulum_goal_distance(th, om) - 0.05 * sqrt(th * th + om * om)


def pendulum_value(double th, double om):
    """Handcrafted bounded critic: 0 on the goal set, decreasing away from it."""
    return _pendulum_value(th, om)


cdef inline double _pendulum_fallback(double th, double om, double ke,
                                      double kp, double kd, double switch,
                                      double e_target, double g, double m,
                                      double l, double umax) nogil:
    cdef double u, e
    if fabs(cos(th) - 1.0) <= switch:
        u = -kp * _wrap_angle(th) - kd * om
    else:
        e = 0.5 * (m * l * l / 3.0) * (om * om) + (m * g * l / 2.0) * (1.0 - cos(th))
        u = ke * om * (e_target - e)
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    return u


def pendulum_fallback(double th, double om, double ke, double kp, double kd,
                      double switch, double e_target, double g, double m,
                      double l, double umax):
    """Energy regulation far from upright, PD capture near it."""
    return _pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax)


# ---------------------------------------------------------------------------
# cartpole


cdef inline void _cartpole_step(double* x, double* xd, double* th, double* thd,
                                double f, double mc, double mp, double l,
                                double g, double dt, double fmax) nogil:
    cdef double s, c, xdd, thdd
    if f > fmax:
        f = fmax
    elif f < -fmax:
        f = -fmax
    s = sin(th[0])
    c = cos(th[0])
    xdd = (f + mp * l * (thd[0] * thd[0]) * s - mp * g * s * c) / (mc + mp * s * s)
    thdd = (g * s - xdd * c) / l
    xd[0] = xd[0] + dt * xdd
    thd[0] = thd[0] + dt * thdd
    x[0] = x[0] + dt * xd[0]
    th[0] = th[0] + dt * thd[0]


def cartpole_step(double x, double xd, double th, double thd, double f,
                  double mc, double mp, double l, double g, double dt,
                  double fmax):
    """One semi-implicit Euler step; force clamped to [-fmax, fmax]."""
    _cartpole_step(&x, &xd, &th, &thd, f, mc, mp, l, g, dt, fmax)
    return x, xd, th, thd


def cartpole_reward(double x, double xd, double th, double thd, double f):
    cdef double c, ang
    c = cos(th)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    ang = acos(c)
    return -(0.5 * (ang * ang) + 0.5 * (x * x) + 0.05 * (thd * thd) + 0.05 * (xd * xd))


cdef inline double _cartpole_goal_distance(double x, double xd, double th,
                                           double thd) nogil:
    cdef double d, e
    d = fabs(cos(th) - 1.0) - 0.05
    if d < 0.0:
        d = 0.0
    e = fabs(sin(th)) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = fabs(thd) - 0.05
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = fabs(xd) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    e = fabs(x) - 0.3
    if e < 0.0:
        e = 0.0
    if e > d:
        d = e
    return d


def cartpole_goal_distance(double x, double xd, double th, double thd):
    return _cartpole_goal_distance(x, xd, th, thd)


def cartpole_value(double x, double xd, double th, double thd):
    cdef double n = sqrt(x * x + xd * xd + th * th + thd * thd)
    return -_cartpole_goal_distance(x, xd, th, thd) - 0.05 * n


def cartpole_terminated(double x, double xd, double th, double thd):
    return fabs(x) > 5.0 or fabs(xd) > 8.0 or fabs(thd) > 10.0


def cartpole_fallback(double x, double xd, double th, double thd, double ke,
                      double kxp, double kxd, double k1, double k2, double k3,
                      double k4, double switch, double e_target, double kick,
                      double mc, double mp, double l, double g, double fmax):
    """Pole-energy pumping with cart centering; full-state feedback near upright."""
    cdef double s, c, f, e, xdd_des
    s = sin(th)
    c = cos(th)
    if fabs(c - 1.0) <= switch:
        f = k1 * _wrap_angle(th) + k2 * thd + k3 * x + k4 * xd
    else:
        e = 0.5 * mp * (l * l) * (thd * thd) + mp * g * l * (c - 1.0)
        xdd_des = ke * (e - e_target) * thd * c - kxp * x - kxd * xd
        # hanging rest is a dead point of the pump; nudge the cart out of it
        if fabs(thd) < 0.05 and c < -0.9:
            xdd_des = xdd_des + kick
        f = (mc + mp * s * s) * xdd_des - mp * l * (thd * thd) * s + mp * g * s * c
    if f > fmax:
        f = fmax
    elif f < -fmax:
        f = -fmax
    return f


# ---------------------------------------------------------------------------
# fused loops (pendulum only; these dominate the certification runtimes)


def rollout_pendulum_fallback(double th, double om, Py_ssize_t n, double ke,
                              double kp, double kd, double switch,
                              double e_target, double g, double m, double l,
                              double dt, double umax, double[::1] out_gdist):
    """Roll the fallback for n steps, recording d_G of each visited state."""
    cdef Py_ssize_t t
    cdef double u
    with nogil:
        for t in range(n):
            out_gdist[t] = _pendulum_goal_distance(th, om)
            u = _pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax)
            _pendulum_step(&th, &om, u, g, m, l, dt, umax)
    return th, om


def simulate_pendulum_shield(double th, double om, Py_ssize_t n,
                             double[::1] uniforms, double nu, double lam,
                             double p_relax, bint guard, double base_torque,
                             double ke, double kp, double kd, double switch,
                             double e_target, double g, double m, double l,
                             double dt, double umax,
                             signed char[::1] out_dec, double[::1] out_v,
                             double[::1] out_vdag, double[::1] out_rho,
                             double[::1] out_rew, double[::1] out_gdist):
    """Shielded episode with the handcrafted critic and a constant-torque base.

    uniforms holds one pre-drawn U_t per step; decision codes land in out_dec.
    out_vdag[t] is the best value after the step-t update.  Returns (th, om).
    """
    cdef Py_ssize_t t
    cdef double v0, vdag, v, rho, u
    cdef signed char dec
    with nogil:
        v0 = _pendulum_value(th, om)
        vdag = v0
        for t in range(n):
            v = _pendulum_value(th, om)
            rho = pow(lam, <double> t) * p_relax
            if guard and v < v0:
                rho = 0.0
            if v >= vdag + nu:
                dec = _DEC_BASE_IMPROVE
                vdag = v
                u = base_torque
            elif uniforms[t] < rho:
                dec = _DEC_BASE_RANDOM
                u = base_torque
            else:
                dec = _DEC_FALLBACK
                u = _pendulum_fallback(th, om, ke, kp, kd, switch, e_target, g, m, l, umax)
            out_dec[t] = dec
            out_v[t] = v
            out_vdag[t] = vdag
            out_rho[t] = rho
            out_rew[t] = _pendulum_reward(th, om, u, umax)
            out_gdist[t] = _pendulum_goal_distance(th, om)
            _pendulum_step(&th, &om, u, g, m, l, dt, umax)
    return th, om
