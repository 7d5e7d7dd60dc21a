"""Experiment harness: paired seeds, aggregation, CSV stability."""

import csv

import numpy as np
import pytest

from criticgate import envs, harness
from criticgate.harness import (ExperimentConfig, emit_plot_data,
                                episode_mode, load_actors, read_plot_data,
                                read_trials_csv, resolved_p_relax,
                                run_experiment, run_trials,
                                shield_config_for, summarize,
                                write_summary_csv, write_trials_csv)
from criticgate.networks import save_network
from criticgate.policies import (CriticHandle, constant_policy,
                                 fallback_policy, handcrafted_critic)
from criticgate.training import init_params, layer_sizes, network_from_vec


@pytest.fixture
def pend():
    return envs.make_env("pendulum")


def pend_actors(pend, base_action=2.0):
    return (constant_policy(base_action), handcrafted_critic(pend),
            fallback_policy(pend))


def tiny_weight_files(pend, tmp_path):
    rng = np.random.default_rng(0)
    psizes = layer_sizes(3, (8,), 1)
    policy = network_from_vec(init_params(rng, psizes), psizes, "policy-mean",
                              pend, probe_rng=np.random.default_rng(1),
                              n_probes=5)
    critic = network_from_vec(init_params(rng, psizes), psizes, "value",
                              probe_rng=np.random.default_rng(2), n_probes=5)
    ppath = tmp_path / "policy.json"
    cpath = tmp_path / "critic.json"
    save_network(policy, ppath)
    save_network(critic, cpath)
    return str(ppath), str(cpath)


class TestConfig:
    def test_mode_presets(self):
        assert resolved_p_relax(ExperimentConfig(mode="conservative")) == 0.0
        assert resolved_p_relax(ExperimentConfig(mode="balanced")) == 0.5
        assert resolved_p_relax(ExperimentConfig(mode="brave")) == 0.95
        # explicit relaxation overrides the fixed mapping
        assert resolved_p_relax(ExperimentConfig(mode="brave", p_relax=0.2)) == 0.2

    def test_episode_mode_mapping(self):
        assert episode_mode("conservative") == "shield"
        assert episode_mode("brave") == "shield"
        assert episode_mode("base-only") == "base-only"
        assert episode_mode("fallback-only") == "fallback-only"

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mode="bold")
        with pytest.raises(ValueError):
            ExperimentConfig(trials=0)

    def test_shield_config_resolution(self, pend):
        cfg = ExperimentConfig(mode="balanced")
        scfg = shield_config_for(pend, cfg)
        assert scfg.horizon == pend.horizon_eval
        assert scfg.p_relax == 0.5
        scfg2 = shield_config_for(pend, ExperimentConfig(mode="balanced",
                                                         horizon=77))
        assert scfg2.horizon == 77


class TestActors:
    def test_missing_weight_files_rejected(self, pend, tmp_path):
        with pytest.raises(ValueError, match="policy"):
            load_actors(pend, ExperimentConfig(mode="balanced"))
        with pytest.raises(ValueError, match="policy"):
            load_actors(pend, ExperimentConfig(mode="base-only"))
        ppath, _ = tiny_weight_files(pend, tmp_path)
        with pytest.raises(ValueError, match="critic"):
            load_actors(pend, ExperimentConfig(mode="balanced",
                                               policy_path=ppath))

    def test_base_only_needs_policy_not_critic(self, pend, tmp_path):
        ppath, _ = tiny_weight_files(pend, tmp_path)
        base, critic, fb = load_actors(
            pend, ExperimentConfig(mode="base-only", policy_path=ppath))
        assert base is not None and critic is None and fb is not None

    def test_fallback_only_needs_nothing(self, pend):
        base, critic, fb = load_actors(pend,
                                       ExperimentConfig(mode="fallback-only"))
        assert base is None and critic is None and fb is not None

    def test_network_modes_run_from_files(self, pend, tmp_path):
        ppath, cpath = tiny_weight_files(pend, tmp_path)
        cfg = ExperimentConfig(mode="balanced", trials=2, horizon=50,
                               policy_path=ppath, critic_path=cpath)
        recs, summary = run_experiment(cfg, env=pend)
        assert len(recs) == 2
        assert summary.trials == 2


class TestTrials:
    def test_seeds_are_paired_across_modes(self, pend):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="fallback-only", trials=4, horizon=60)
        scfg = shield_config_for(pend, cfg)
        a = run_trials(pend, None, None, fb, scfg, "fallback-only", 4, 99)
        flat = CriticHandle(name="flat", value=lambda s, obs: 0.0)
        b = run_trials(pend, base, flat, fb, scfg, "conservative", 4, 99)
        for ra, rb in zip(a, b):
            assert ra.seed == rb.seed
            # closed lottery plus a critic that never improves leaves only
            # the fallback, so the paired trajectories coincide
            assert ra.cumulative_reward == rb.cumulative_reward
            assert np.array_equal(ra.final_state, rb.final_state)

    def test_conservative_never_wins_the_lottery(self, pend):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="conservative", trials=5, horizon=100)
        scfg = shield_config_for(pend, cfg)
        recs = run_trials(pend, base, crit, fb, scfg, "conservative", 5, 7,
                          record_arrays=True)
        for r in recs:
            assert r.n_random_accept == 0
            assert r.n_base == int(np.sum((r.decisions == 1)
                                          | (r.decisions == 2)))
            assert len(r.decisions) == r.steps


class TestAggregation:
    def test_summary_statistics(self, pend):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="balanced", trials=6, horizon=80)
        recs, summary = run_experiment(cfg, env=pend,
                                       actors=(base, crit, fb))
        rewards = [r.cumulative_reward for r in recs]
        assert summary.mean_reward == pytest.approx(np.mean(rewards))
        assert summary.std_reward == pytest.approx(np.std(rewards, ddof=1))
        assert summary.n_reached == sum(r.reached for r in recs)
        assert 0.0 <= summary.reach_rate <= 1.0
        assert 0.0 <= summary.mean_fallback_frac <= 1.0

    def test_single_trial_has_zero_std(self, pend):
        _, summary = run_experiment(
            ExperimentConfig(mode="fallback-only", trials=1, horizon=30),
            env=pend, actors=(None, None, fallback_policy(pend)))
        assert summary.std_reward == 0.0

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            summarize([], "balanced")


class TestCSV:
    def test_trials_round_trip(self, pend, tmp_path):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="balanced", trials=3, horizon=50,
                               checkpoint="late")
        recs, _ = run_experiment(cfg, env=pend, actors=(base, crit, fb),
                                 out_dir=tmp_path)
        path = tmp_path / "trials_balanced_late.csv"
        rows = read_trials_csv(path)
        assert len(rows) == 3
        for k, (row, rec) in enumerate(zip(rows, recs)):
            assert row["trial"] == k
            assert row["seed"] == rec.seed
            assert row["checkpoint"] == "late"
            assert row["cumulative_reward"] == rec.cumulative_reward
            assert row["n_fallback"] == rec.n_fallback
            assert row["v_initial"] == rec.v_initial

    def test_identical_runs_identical_bytes(self, pend, tmp_path):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="balanced", trials=3, horizon=50)
        for d in ("a", "b"):
            recs, summary = run_experiment(cfg, env=pend,
                                           actors=(base, crit, fb),
                                           out_dir=tmp_path / d)
            write_summary_csv([summary], tmp_path / d / "summary.csv")
        for name in ("trials_balanced.csv", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes(), name

    def test_foreign_header_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_trials_csv(bad)
        with pytest.raises(ValueError):
            read_plot_data(bad)


class TestPlotData:
    def test_long_format_and_aggregate(self, pend, tmp_path):
        base, crit, fb = pend_actors(pend)
        cfg = ExperimentConfig(mode="balanced", trials=2, horizon=40)
        recs_a, _ = run_experiment(cfg, env=pend, actors=(base, crit, fb))
        recs_b, _ = run_experiment(
            ExperimentConfig(mode="fallback-only", trials=2, horizon=40),
            env=pend, actors=(None, None, fb))
        tpath, apath = emit_plot_data(
            [("balanced", "late", recs_a), ("fallback-only", "", recs_b)],
            tmp_path)
        rows = read_plot_data(tpath)
        assert len(rows) == 4
        assert rows[0]["mode"] == "balanced"
        assert rows[0]["checkpoint"] == "late"
        assert rows[0]["reward"] == recs_a[0].cumulative_reward
        assert rows[3]["mode"] == "fallback-only"
        with open(apath, newline="") as fh:
            header = tuple(next(csv.reader(fh)))
        assert header == harness.SUMMARY_COLUMNS

    def test_schema_is_env_independent(self, tmp_path):
        cart = envs.make_env("cartpole_swingup")
        recs, _ = run_experiment(
            ExperimentConfig(env_name="cartpole_swingup",
                             mode="fallback-only", trials=2, horizon=60),
            env=cart, actors=(None, None, fallback_policy(cart)))
        tpath, _ = emit_plot_data([("fallback-only", "", recs)], tmp_path)
        with open(tpath, newline="") as fh:
            header = tuple(next(csv.reader(fh)))
        assert header == harness.PLOT_COLUMNS

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot_data([], tmp_path)
