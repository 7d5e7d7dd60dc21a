"""End-to-end acceptance suite.

One test per release gate, each with its tolerance and runtime budget pinned
in place. These run against the committed pendulum checkpoints in
artifacts/pendulum and the default master seed, so a green run here means a
fresh clone reproduces the guarantees without retraining anything.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from criticgate import certificates as cert
from criticgate import envs, policies, shield
from criticgate.harness import ExperimentConfig, run_experiment
from criticgate.seeding import make_rng, trial_seed

ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts" / "pendulum"
MASTER_SEED = 20260822


def test_corollary_lower_bounds_reaching_cdf():
    # zero violations over the whole grid; budget 1 s
    t0 = time.perf_counter()
    violations = 0
    for lam in (0.5, 0.9, 0.99, 0.9999):
        for p in (0.5, 0.95, 1.0):
            for t in range(1, 51):
                lower = cert.corollary_lower_bound(lam, p, t)
                exact = cert.reaching_time_cdf(lam, p, t)
                if lower > exact:
                    violations += 1
    elapsed = time.perf_counter() - t0
    assert violations == 0
    assert elapsed < 1.0, f"corollary grid took {elapsed:.2f}s"


def test_reaching_time_law_monte_carlo():
    # 1e5 samples at lam=0.9, p=0.5; CDF within 0.01 for every t <= 100
    t0 = time.perf_counter()
    lam, p = 0.9, 0.5
    rng = make_rng(MASTER_SEED)
    samples = cert.sample_stopping_times(lam, p, 100000, rng)
    ts = np.arange(0, 101)
    law = cert.reaching_time_cdf_batch(lam, p, ts)
    empirical = np.searchsorted(np.sort(samples), ts, side="right") / samples.size
    worst = float(np.max(np.abs(empirical - law)))
    elapsed = time.perf_counter() - t0
    assert worst <= 0.01, f"max CDF deviation {worst:.4f}"
    assert elapsed < 30.0, f"law check took {elapsed:.1f}s"


def test_finitely_many_base_acceptances():
    # 100 seeded 20000-step episodes, handcrafted critic, constant max torque
    # base; every run must hand control to the fallback for good, with the
    # improvement count inside the ceil((v_bar - v0)/nu) budget
    t0 = time.perf_counter()
    env = envs.make_env("pendulum")
    base = policies.constant_policy(2.0)
    critic = policies.handcrafted_critic(env)
    fallback = policies.fallback_policy(env)
    cfg = shield.ShieldConfig(nu=0.01, lam=0.999, p_relax=0.5, horizon=20000)
    v_bar = 0.0          # handcrafted critic is bounded above by zero
    for k in range(100):
        rec = shield.run_episode(env, base, critic, fallback, cfg,
                                 seed=trial_seed(MASTER_SEED, k),
                                 record_arrays=False)
        assert rec.steps == 20000 and not rec.terminated
        assert rec.last_base_step < rec.steps - 1, \
            f"trial {k}: base still acting at the horizon"
        budget = cert.improvement_budget(v_bar, rec.v_initial, cfg.nu)
        assert rec.n_improve <= budget, \
            f"trial {k}: {rec.n_improve} improvements > budget {budget}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"theorem sweep took {elapsed:.1f}s"


def test_conservative_mode_preserves_goal_reaching():
    # p_relax=0, default fallback gains, horizon 1000: 30/30 reached and no
    # worse than the bare fallback on the same seeds
    t0 = time.perf_counter()
    common = dict(env_name="pendulum", trials=30, horizon=1000,
                  master_seed=MASTER_SEED, checkpoint="late")
    cons, _ = run_experiment(ExperimentConfig(
        mode="conservative", policy_path=str(ARTIFACTS / "policy_late.json"),
        critic_path=str(ARTIFACTS / "critic_late.json"), **common))
    fb, _ = run_experiment(ExperimentConfig(mode="fallback-only", **common))
    n_cons = sum(r.reached for r in cons)
    n_fb = sum(r.reached for r in fb)
    elapsed = time.perf_counter() - t0
    assert n_cons == 30, f"conservative reached {n_cons}/30"
    assert n_cons >= n_fb
    assert elapsed < 60.0, f"conservative sweep took {elapsed:.1f}s"


def test_mode_ordering_on_trained_checkpoint():
    # brave mean reward within one pooled std of conservative, 30 shared seeds
    common = dict(env_name="pendulum", trials=30, master_seed=MASTER_SEED,
                  policy_path=str(ARTIFACTS / "policy_late.json"),
                  critic_path=str(ARTIFACTS / "critic_late.json"),
                  checkpoint="late")
    cons, _ = run_experiment(ExperimentConfig(mode="conservative", **common))
    brave, _ = run_experiment(ExperimentConfig(mode="brave", **common))
    r_cons = np.array([r.cumulative_reward for r in cons])
    r_brave = np.array([r.cumulative_reward for r in brave])
    pooled = math.sqrt(0.5 * (r_cons.var(ddof=1) + r_brave.var(ddof=1)))
    assert r_brave.mean() >= r_cons.mean() - pooled, \
        f"brave {r_brave.mean():.2f} < conservative {r_cons.mean():.2f} - {pooled:.2f}"


def test_dynamics_against_naive_evaluator():
    # 1000 random pairs per env within 1e-12 absolute; equilibria exact
    t0 = time.perf_counter()
    rng = make_rng(MASTER_SEED)

    pend = envs.make_env("pendulum")
    g, m, l, dt = (pend.params.g, pend.params.m, pend.params.l, pend.params.dt)
    for _ in range(1000):
        th, om = rng.uniform(-8, 8), rng.uniform(-8, 8)
        u = rng.uniform(-2, 2)
        om2 = om + dt * (u * 3.0 / (m * l * l) - 1.5 * (g / l) * math.sin(th))
        th2 = th + om2 * dt
        got = pend.step(np.array([th, om]), u)
        assert abs(got[0] - th2) <= 1e-12 and abs(got[1] - om2) <= 1e-12

    cart = envs.make_env("cartpole_swingup")
    mc, mp = cart.params.m_cart, cart.params.m_pole
    lc, gc, dtc = cart.params.l, cart.params.g, cart.params.dt
    for _ in range(1000):
        x, xd = rng.uniform(-3, 3), rng.uniform(-5, 5)
        th, thd = rng.uniform(-6, 6), rng.uniform(-8, 8)
        f = rng.uniform(-10, 10)
        sth, cth = math.sin(th), math.cos(th)
        denom = mc + mp * sth * sth
        xdd = (f + mp * lc * thd * thd * sth - mp * gc * sth * cth) / denom
        thdd = (gc * sth - xdd * cth) / lc
        xd2 = xd + dtc * xdd
        thd2 = thd + dtc * thdd
        expect = (x + dtc * xd2, xd2, th + dtc * thd2, thd2)
        got = cart.step(np.array([x, xd, th, thd]), f)
        assert np.max(np.abs(got - np.array(expect))) <= 1e-12

    assert np.array_equal(pend.step(np.zeros(2), 0.0), np.zeros(2))
    assert np.array_equal(cart.step(np.zeros(4), 0.0), np.zeros(4))
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"dynamics oracle took {elapsed:.2f}s"


def test_certificate_pipeline_bounds_reaching():
    # certify with fitted constants at d_circ=2, d_star=0.3: all certificate
    # quantities well formed and at least 29/30 trials inside the bound
    t0 = time.perf_counter()
    report = cert.certify_pendulum(d_circ=2.0, d_star=0.3,
                                   master_seed=MASTER_SEED)
    elapsed = time.perf_counter() - t0
    assert report.tau >= 1
    assert report.tau_fallback >= 1
    assert report.delta >= 0.0
    assert report.trials == 30
    assert report.n_within_bound >= 29, \
        f"only {report.n_within_bound}/30 trials within the certified bound"
    assert elapsed < 120.0, f"certification took {elapsed:.1f}s"
