"""Certificate quantities and reaching-time laws for the shielded system.

Works over a rectangular state grid: the critic superlevel set that covers a
given goal-distance band is extracted, the value band is converted into a
budget of accepted improvements, and a fitted exponential decay certificate
for the fallback turns the budget into a finite reaching-time bound.  The
stopping time of the relaxed acceptances is handled by an exact product law
plus a closed-form lower bound, both checkable by Monte Carlo.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import envs as envs_mod
from . import kernels
from .policies import fallback_params_for
from .seeding import make_rng, trial_seed

PROB_TRUNC = 1e-16   # drop product factors once p*lam^k falls below this
TAIL_TRUNC = 1e-12   # residual violation mass allowed past the sampling window


@dataclass(frozen=True)
class Certificate:
    """Exponential decay envelope d(t) <= c * d(0) * exp(-a * t)."""

    c: float
    a: float
    eps: float = 0.0   # residual fraction of fit trajectories left uncovered

    def __post_init__(self):
        if self.c < 1.0:
            raise ValueError(f"certificate c must be >= 1, got {self.c}")
        if self.a <= 0.0:
            raise ValueError(f"certificate a must be positive, got {self.a}")

    def beta(self, d: float, t: float) -> float:
        return self.c * d * math.exp(-self.a * t)

    def kappa(self, d: float) -> float:
        return self.c * d

    def xi(self, r: float) -> float:
        return r ** self.a

    def xi_inv(self, y: float) -> float:
        return y ** (1.0 / self.a)


def improvement_budget(v_bar: float, v_initial: float, nu: float) -> int:
    """Largest possible number of improvement acceptances for a critic bounded
    above by v_bar, starting from value v_initial."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    gap = v_bar - v_initial
    if gap <= 0.0:
        return 0
    return int(math.ceil(gap / nu))


# ---------------------------------------------------------------------------
# superlevel-set quantities on a grid


def superlevel_quantities(values, gdists, d_circ):
    """v_min over the d_G <= d_circ band, the induced superlevel mask, and the
    value maximum over that mask."""
    values = np.asarray(values, dtype=np.float64)
    gdists = np.asarray(gdists, dtype=np.float64)
    band = gdists <= d_circ
    if not band.any():
        raise ValueError(f"no grid point has goal distance <= {d_circ}")
    v_min = float(values[band].min())
    mask = values >= v_min
    v_max = float(values[mask].max())
    return v_min, mask, v_max


def compute_tau(v_max: float, v_min: float, nu: float) -> int:
    """Improvement budget across the certified value band (at least 1)."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    return max(1, int(math.floor((v_max - v_min) / nu)))


def compute_tau_fallback(cert: Certificate, d_max: float, d_star: float):
    """Fallback steps per improvement epoch needed to re-enter d_G <= d_star.

    Returns (tau_f, degenerate); degenerate means the certificate already
    puts the whole envelope below d_star at t=0.
    """
    if d_star <= 0.0 or d_max <= 0.0:
        raise ValueError("d_star and d_max must be positive")
    ratio = d_star / cert.kappa(d_max)
    if ratio >= 1.0:
        return 1, True
    # -log(xi_inv(ratio)) evaluated in log domain; xi_inv underflows for small a
    steps = -math.log(ratio) / cert.a
    return max(1, int(math.ceil(steps))), False


def compute_delta(cert: Certificate, d_max: float) -> float:
    """Worst-case excursion bound delta = beta(d_max, 0)."""
    return cert.beta(d_max, 0.0)


def reaching_time_bound(tau: int, t_rho: int, tau_f: int) -> int:
    return (tau + t_rho) * tau_f


# ---------------------------------------------------------------------------
# stopping-time laws for the relaxed acceptances


def _validate_law_args(lam, p_relax):
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    if not 0.0 <= p_relax <= 1.0:
        raise ValueError(f"p_relax must lie in [0, 1], got {p_relax}")


def reaching_time_cdf(lam: float, p_relax: float, t: int) -> float:
    """P[T <= t] for the stopping time of majorant acceptances p*lam^k.

    Exact infinite product, truncated once factors are within PROB_TRUNC of 1;
    the truncation only overestimates, never below the closed-form bound.
    """
    _validate_law_args(lam, p_relax)
    if t < 0:
        raise ValueError("t must be >= 0")
    if p_relax == 0.0:
        return 1.0
    x0 = p_relax * lam ** t
    if x0 < PROB_TRUNC:
        return 1.0
    n = int(math.ceil((math.log(PROB_TRUNC) - math.log(x0)) / math.log(lam))) + 1
    xs = x0 * np.power(lam, np.arange(n))
    xs = xs[xs < 1.0]
    if len(xs) < n:          # a factor hit zero: the product vanishes
        return 0.0
    return float(np.exp(np.sum(np.log1p(-xs))))


def reaching_time_cdf_batch(lam: float, p_relax: float, ts) -> np.ndarray:
    """reaching_time_cdf over many t with one shared suffix accumulation."""
    _validate_law_args(lam, p_relax)
    ts = np.asarray(ts, dtype=np.int64)
    if (ts < 0).any():
        raise ValueError("t must be >= 0")
    if p_relax == 0.0:
        return np.ones(len(ts))
    k_cut = int(math.ceil((math.log(PROB_TRUNC) - math.log(p_relax))
                          / math.log(lam))) + 1
    xs = p_relax * np.power(lam, np.arange(k_cut))
    logs = np.full(k_cut, -np.inf)
    ok = xs < 1.0
    logs[ok] = np.log1p(-xs[ok])
    suffix = np.concatenate([np.cumsum(logs[::-1])[::-1], [0.0]])
    out = np.ones(len(ts))
    inside = ts < k_cut
    out[inside] = np.exp(suffix[ts[inside]])
    return out


def corollary_lower_bound(lam: float, p_relax: float, t: int) -> float:
    """Closed-form lower bound exp(-lam^t p / ((1-lam) (1-lam^t p))), t >= 1."""
    _validate_law_args(lam, p_relax)
    if t < 1:
        raise ValueError("the closed-form bound needs t >= 1")
    if p_relax == 0.0:
        return 1.0
    x = p_relax * lam ** t
    return math.exp(-x / ((1.0 - lam) * (1.0 - x)))


def stopping_window(lam: float, p_relax: float) -> int:
    """Steps after which the residual majorant mass is below TAIL_TRUNC."""
    _validate_law_args(lam, p_relax)
    if p_relax == 0.0:
        return 0
    k = math.log(TAIL_TRUNC * (1.0 - lam) / p_relax) / math.log(lam)
    return max(0, int(math.ceil(k)))


def stopping_time_from_uniforms(u, lam: float, p_relax: float) -> int:
    """Realized T = inf{t : U_k >= p*lam^k for all k >= t} for drawn uniforms.

    The tail beyond len(u) is taken as violation-free; size the array with
    stopping_window() so the neglected mass is below TAIL_TRUNC.
    """
    _validate_law_args(lam, p_relax)
    u = np.asarray(u, dtype=np.float64)
    viol = u < p_relax * np.power(lam, np.arange(len(u)))
    idx = np.nonzero(viol)[0]
    return 0 if len(idx) == 0 else int(idx[-1]) + 1


def sample_stopping_time(lam: float, p_relax: float, rng) -> int:
    """Draw one realization of the stopping time."""
    window = stopping_window(lam, p_relax)
    if window == 0:
        return 0
    return stopping_time_from_uniforms(rng.random(window), lam, p_relax)


def sample_stopping_times(lam: float, p_relax: float, n: int, rng,
                          chunk: int = 8192) -> np.ndarray:
    """Vectorized stopping-time sampler; one row of uniforms per sample."""
    window = stopping_window(lam, p_relax)
    out = np.zeros(n, dtype=np.int64)
    if window == 0:
        return out
    rho = p_relax * np.power(lam, np.arange(window))
    done = 0
    while done < n:
        m = min(chunk, n - done)
        viol = rng.random((m, window)) < rho
        rev = viol[:, ::-1]
        has = rev.any(axis=1)
        last = window - 1 - np.argmax(rev, axis=1)
        out[done:done + m] = np.where(has, last + 1, 0)
        done += m
    return out


# ---------------------------------------------------------------------------
# certificate fitting from fallback rollouts


def fit_certificate(trajectories, d0_floor: float = 0.1,
                    a_grid=None, overshoot_slack: float = 1.5,
                    c_margin: float = 1.05) -> Certificate:
    """Fit (c, a) so c * d(0) * exp(-a t) envelopes every trajectory.

    For each candidate decay rate the smallest admissible c is the upper
    envelope of lines ln(d(t)/d(0)) + a*t; the chosen rate is the fastest one
    whose required c stays within overshoot_slack of the minimal overshoot
    constant.  Trajectories starting closer than d0_floor to the goal are
    excluded (their relative overshoot is unbounded), and the fraction
    excluded is reported as eps.
    """
    if a_grid is None:
        a_grid = np.geomspace(1e-4, 1.0, 400)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    horizon = max(len(d) for d in trajectories)
    intercept = np.full(horizon, -np.inf)
    n_used = 0
    for d in trajectories:
        d = np.asarray(d, dtype=np.float64)
        if d[0] < d0_floor:
            continue
        n_used += 1
        with np.errstate(divide="ignore"):
            li = np.log(d) - math.log(d[0])
        m = len(d)
        intercept[:m] = np.maximum(intercept[:m], li)
    if n_used == 0:
        raise ValueError("no trajectory starts at or beyond d0_floor")
    ts = np.arange(horizon, dtype=np.float64)
    finite = np.isfinite(intercept)
    ic, tf = intercept[finite], ts[finite]
    # ln c(a) = max_t [ln(d(t)/d(0)) + a t]; minimal overshoot is c(a -> 0)
    log_c = np.array([np.max(ic + a * tf) for a in a_grid])
    log_c_min = float(np.max(ic))
    admissible = log_c <= log_c_min + math.log(overshoot_slack)
    a = float(a_grid[admissible][-1])
    c = float(math.exp(log_c[admissible][-1]) * c_margin)
    eps = 1.0 - n_used / len(trajectories)
    return Certificate(c=max(c, 1.0), a=a, eps=eps)


def collect_fallback_decays(env_name: str, n_traj: int, horizon: int, rng,
                            theta_lim=(-math.pi, math.pi), omega_lim=(-3.0, 3.0)):
    """Goal-distance traces of fallback rollouts from window-uniform starts."""
    if env_name != "pendulum":
        raise NotImplementedError("decay collection is pendulum-only")
    fp = fallback_params_for("pendulum")
    ep = envs_mod.PendulumParams()
    out = np.empty((n_traj, horizon))
    buf = np.empty(horizon)
    for i in range(n_traj):
        th = rng.uniform(theta_lim[0], theta_lim[1])
        om = rng.uniform(omega_lim[0], omega_lim[1])
        kernels.rollout_pendulum_fallback(
            th, om, horizon, fp.k_energy, fp.k_p, fp.k_d, fp.switch, fp.e_target,
            ep.g, ep.m, ep.l, ep.dt, ep.max_torque, buf)
        out[i] = buf
    return out


# ---------------------------------------------------------------------------
# pendulum certification pipeline


@dataclass
class CertifyReport:
    env: str
    d_circ: float
    d_star: float
    nu: float
    lam: float
    p_relax: float
    guard: bool
    grid_n_theta: int
    grid_n_omega: int
    grid_n_actions: int
    theta_lim: tuple
    omega_lim: tuple
    v_min: float
    v_max: float
    tau: int
    d_pbar: float
    d_max: float
    delta: float
    cert_c: float
    cert_a: float
    cert_eps: float
    tau_fallback: int
    tau_fallback_degenerate: bool
    stopping_window: int
    horizon: int
    trials: int
    master_seed: int
    n_within_bound: int = 0
    trial_rows: list = field(default_factory=list)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")

    def summary_text(self) -> str:
        lines = [
            f"certification report: {self.env}",
            f"  critic band: v_min={self.v_min:.6f} v_max={self.v_max:.6f} "
            f"tau={self.tau}",
            f"  transitions: d_pbar={self.d_pbar:.6f} d_max={self.d_max:.6f} "
            f"delta={self.delta:.6f}",
            f"  certificate: c={self.cert_c:.6f} a={self.cert_a:.6f} "
            f"eps={self.cert_eps:.4f}",
            f"  tau_fallback={self.tau_fallback}"
            + (" (degenerate)" if self.tau_fallback_degenerate else ""),
            f"  trials within bound: {self.n_within_bound}/{self.trials}",
        ]
        return "\n".join(lines)


def pendulum_grid(n_theta=201, n_omega=201,
                  theta_lim=(-math.pi, math.pi), omega_lim=(-3.0, 3.0)):
    """Flattened meshgrid over the certification window."""
    th_ax = np.linspace(theta_lim[0], theta_lim[1], n_theta)
    om_ax = np.linspace(omega_lim[0], omega_lim[1], n_omega)
    th, om = np.meshgrid(th_ax, om_ax, indexing="ij")
    return th.ravel(), om.ravel()


def pendulum_d_pbar(theta, omega, mask, n_actions=41,
                    params: envs_mod.PendulumParams | None = None) -> float:
    """Sup of the successor norm over superlevel states and gridded actions."""
    p = params if params is not None else envs_mod.PendulumParams()
    th = theta[mask]
    om = omega[mask]
    best = 0.0
    for u in np.linspace(-p.max_torque, p.max_torque, n_actions):
        th2, om2 = envs_mod.pendulum_step_batch(th, om, u, p)
        norms = np.sqrt(th2 * th2 + om2 * om2)
        best = max(best, float(norms.max()))
    return best


def certify_pendulum(d_circ=2.0, d_star=0.3, nu=0.01, lam=0.9, p_relax=0.5,
                     guard=True, trials=30, master_seed=20260822,
                     n_theta=201, n_omega=201, n_actions=41,
                     fit_trajectories=1000, fit_horizon=1500, d0_floor=0.1,
                     base_torque=2.0, mc_horizon=20000) -> CertifyReport:
    """End-to-end certification with Monte Carlo verification of the bound.

    Each trial runs the shield against a constant-torque adversarial base and
    checks that the first entry into d_G <= d_star happens within
    (tau + T) * tau_fallback, where T is that trial's realized stopping time
    of the majorant acceptance schedule.
    """
    from .shield import ShieldConfig, run_episode  # local to avoid a cycle

    theta_lim = (-math.pi, math.pi)
    omega_lim = (-3.0, 3.0)
    th, om = pendulum_grid(n_theta, n_omega, theta_lim, omega_lim)
    values = envs_mod.pendulum_value_batch(th, om)
    gdists = envs_mod.pendulum_goal_distance_batch(th, om)
    v_min, mask, v_max = superlevel_quantities(values, gdists, d_circ)
    tau = compute_tau(v_max, v_min, nu)
    d_pbar = pendulum_d_pbar(th, om, mask, n_actions)
    d_max = max(d_circ, d_pbar)

    fit_rng = make_rng(trial_seed(master_seed, 10**6))
    decays = collect_fallback_decays("pendulum", fit_trajectories, fit_horizon,
                                     fit_rng)
    cert = fit_certificate(decays, d0_floor=d0_floor)
    delta = compute_delta(cert, d_max)
    tau_f, degenerate = compute_tau_fallback(cert, d_max, d_star)

    window = stopping_window(lam, p_relax)
    # the Monte Carlo runs only need to locate the first entry into d_star;
    # the certified bound itself is usually far larger than the realized time
    horizon = mc_horizon

    env = envs_mod.make_env("pendulum")
    from .policies import constant_policy, fallback_policy, handcrafted_critic
    base = constant_policy(base_torque, name="adversarial")
    critic = handcrafted_critic(env)
    fb = fallback_policy(env)
    cfg = ShieldConfig(nu=nu, lam=lam, p_relax=p_relax, guard=guard,
                       horizon=horizon)

    report = CertifyReport(
        env="pendulum", d_circ=d_circ, d_star=d_star, nu=nu, lam=lam,
        p_relax=p_relax, guard=guard,
        grid_n_theta=n_theta, grid_n_omega=n_omega, grid_n_actions=n_actions,
        theta_lim=theta_lim, omega_lim=omega_lim,
        v_min=v_min, v_max=v_max, tau=tau, d_pbar=d_pbar, d_max=d_max,
        delta=delta, cert_c=cert.c, cert_a=cert.a, cert_eps=cert.eps,
        tau_fallback=tau_f, tau_fallback_degenerate=degenerate,
        stopping_window=window, horizon=horizon, trials=trials,
        master_seed=master_seed)

    for k in range(trials):
        seed = trial_seed(master_seed, k)
        rec = run_episode(env, base, critic, fb, cfg, seed=seed)
        t_rho = stopping_time_from_uniforms(rec.u, lam, p_relax)
        bound = reaching_time_bound(tau, t_rho, tau_f)
        hits = np.nonzero(rec.goal_dist <= d_star)[0]
        t_emp = int(hits[0]) if len(hits) else -1
        ok = t_emp >= 0 and t_emp <= bound
        report.trial_rows.append({
            "trial": k, "seed": seed, "t_rho": t_rho, "bound": bound,
            "t_empirical": t_emp, "within_bound": bool(ok),
        })
        if ok:
            report.n_within_bound += 1
    return report
