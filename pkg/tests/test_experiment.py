"""Training orchestration, metrics persistence, sweeps, comparisons."""
from dataclasses import replace

import numpy as np
import pytest

from ammtuner.agent import AgentKind, Hyperparams
from ammtuner.errors import ConfigError
from ammtuner.experiment import (
    EpochMetrics,
    compare_runs,
    default_eta,
    make_config,
    moving_average,
    read_metrics_csv,
    run_behavior_change,
    run_dir_name,
    run_seeds,
    run_training,
    scenario_env,
    summarize_run_dir,
    sweep,
    sweep_config,
    terminal_reward,
    write_manifest,
    write_metrics_csv,
)
from ammtuner.market import LOOSE_TOLERANCE, NORMAL_TOLERANCE

FAST = dict(epochs=8, seeds=(1,))


def fast_config(agent=AgentKind.COMBINED, scenario="normal", **kwargs):
    merged = {**FAST, **kwargs}
    return make_config(scenario, agent, **merged)


class TestMakeConfig:
    def test_eta_follows_epochs_unless_overridden(self):
        assert make_config("normal", AgentKind.COMBINED,
                           epochs=3000).hyper.eta == pytest.approx(0.0015)
        assert make_config("normal", AgentKind.COMBINED,
                           epochs=500).hyper.eta == pytest.approx(0.009)
        pinned = make_config("normal", AgentKind.COMBINED, epochs=500,
                             hyper_overrides={"eta": 0.5})
        assert pinned.hyper.eta == 0.5

    def test_scenario_presets(self):
        assert scenario_env("normal").tolerance == NORMAL_TOLERANCE
        assert scenario_env("loose").tolerance == LOOSE_TOLERANCE
        high = scenario_env("high-liquidity")
        assert high.user_balance == 18_000.0
        assert high.amount_max == 18_000.0

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ConfigError):
            make_config("volatile", AgentKind.COMBINED)

    def test_invalid_shape_rejected(self):
        with pytest.raises(ConfigError):
            make_config("normal", AgentKind.COMBINED, epochs=0)
        with pytest.raises(ConfigError):
            make_config("normal", AgentKind.COMBINED, seeds=())
        with pytest.raises(ConfigError):
            make_config("normal", AgentKind.COMBINED, update_interval=0)


class TestRunTraining:
    def test_deterministic_given_seed(self):
        config = fast_config()
        a = run_training(config, 5)
        b = run_training(config, 5)
        assert a.metrics == b.metrics

    def test_baseline_params_constant(self):
        result = run_training(fast_config(agent=AgentKind.BASELINE), 1)
        assert all(m.mean_fee_level == 13.0 for m in result.metrics)
        assert all(m.mean_leverage == 42.0 for m in result.metrics)
        assert all(m.action_stddev == 0.0 for m in result.metrics)

    def test_baseline_invariant_to_hyperparams(self):
        base = fast_config(agent=AgentKind.BASELINE)
        other = replace(base, hyper=Hyperparams(alpha=0.9, gamma=0.1,
                                                eps_min=0.5, eps_max=0.7,
                                                eta=1.0))
        assert run_training(base, 3).metrics == run_training(other, 3).metrics

    def test_metrics_shape_and_identities(self):
        config = fast_config(agent=AgentKind.FEE_ONLY)
        result = run_training(config, 2)
        assert len(result.metrics) == config.epochs
        for epoch, m in enumerate(result.metrics):
            assert m.epoch == epoch
            assert m.success_count + m.canceled_count == 400
            assert m.total_reward == pytest.approx(
                m.fees_collected - m.canceled_count, abs=1e-9)
            assert m.epsilon == pytest.approx(
                0.01 + 0.99 * np.exp(-config.hyper.eta * epoch))

    def test_epoch_callback_sees_conserved_totals(self):
        seen = []

        def check(env, epoch, metrics):
            totals = env.token_totals()
            seen.append(totals)
            assert totals[0] == pytest.approx(40_000.0, abs=1e-6)
            assert totals[1] == pytest.approx(40_000.0, abs=1e-6)

        run_training(fast_config(), 1, on_epoch=check)
        assert len(seen) == FAST["epochs"]

    def test_update_interval_reduces_decision_count(self):
        dense = run_training(fast_config(), 1)
        sparse = run_training(fast_config(update_interval=10), 1)
        # stddev traces exist for both; sparse acts ~10x less often but the
        # epoch still resolves every order
        for m in sparse.metrics:
            assert m.success_count + m.canceled_count == 400

    def test_run_seeds_parallel_matches_serial(self):
        config = fast_config(seeds=(1, 2))
        serial = run_seeds(config, jobs=1)
        threaded = run_seeds(config, jobs=2)
        assert [r.metrics for r in serial] == [r.metrics for r in threaded]


class TestBehaviorChange:
    def test_switch_epoch_is_half(self):
        config = fast_config(scenario="behavior-change",
                             switch_to=LOOSE_TOLERANCE, epochs=2)
        result = run_behavior_change(config, 1)
        assert len(result.metrics) == 2

    def test_first_half_matches_unswitched_run(self):
        epochs = 6
        plain = make_config("normal", AgentKind.BASELINE, epochs=epochs,
                            seeds=(1,))
        switched = make_config("behavior-change", AgentKind.BASELINE,
                               epochs=epochs, seeds=(1,),
                               switch_to=LOOSE_TOLERANCE)
        half = epochs // 2
        plain_metrics = run_training(plain, 9).metrics
        switched_metrics = run_behavior_change(switched, 9).metrics
        assert plain_metrics[:half] == switched_metrics[:half]
        assert plain_metrics[half:] != switched_metrics[half:]

    def test_requires_switch_target(self):
        with pytest.raises(ConfigError):
            make_config("behavior-change", AgentKind.COMBINED, epochs=2)
        config = fast_config()
        with pytest.raises(ConfigError):
            run_behavior_change(config, 1)


class TestMetricsCsv:
    def test_round_trip_exact(self, tmp_path):
        result = run_training(fast_config(), 4)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(result, path)
        assert read_metrics_csv(path) == result.metrics

    def test_line_count_is_header_plus_epochs(self, tmp_path):
        result = run_training(fast_config(), 4)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(result, path)
        assert len(path.read_text().splitlines()) == FAST["epochs"] + 1

    def test_empty_metrics_writes_header_only(self, tmp_path):
        result = run_training(fast_config(epochs=1), 4)
        result.metrics.clear()
        path = tmp_path / "metrics.csv"
        write_metrics_csv(result, path)
        assert path.read_text().splitlines() == [
            "epoch,total_reward,fees_collected,success_count,held_count,"
            "canceled_count,mean_fee_level,mean_leverage,epsilon,action_stddev"]

    def test_unwritable_path_raises_with_context(self, tmp_path):
        result = run_training(fast_config(epochs=1), 4)
        with pytest.raises(ConfigError, match="no-such-dir"):
            write_metrics_csv(result, tmp_path / "no-such-dir" / "metrics.csv")


class TestMovingAverage:
    def test_window_one_is_identity(self):
        assert moving_average([3.0, 1.0, 4.0], 1) == [3.0, 1.0, 4.0]

    def test_short_prefix_uses_partial_window(self):
        assert moving_average([1.0, 2.0, 3.0], 3) == [1.0, 1.5, 2.0]

    def test_constant_series_unchanged(self):
        assert moving_average([2.0] * 5, 4) == [2.0] * 5

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            moving_average([1.0], 0)


class TestSweep:
    def test_singleton_sweep_equals_plain_run(self):
        base = fast_config()
        result = sweep(base, "update-interval", [1.0], [AgentKind.COMBINED])
        assert len(result.rows) == 1
        plain = terminal_reward(run_training(base, 1))
        assert result.rows[0].terminal_reward == pytest.approx(plain)

    def test_rows_sorted_by_value(self):
        base = fast_config()
        result = sweep(base, "update-interval", [5.0, 1.0],
                       [AgentKind.BASELINE])
        assert [r.value for r in result.rows] == [1.0, 5.0]

    def test_swap_size_point_fixes_amounts(self):
        cfg = sweep_config(fast_config(), "swap-size", 3750.0)
        assert cfg.env.amount_min == cfg.env.amount_max == 3750.0
        assert cfg.env.user_balance == 18_000.0

    def test_tolerance_point_sets_mu_sigma(self):
        cfg = sweep_config(fast_config(), "tolerance", 0.4)
        assert cfg.env.tolerance.mu == 0.4
        assert cfg.env.tolerance.sigma == 0.4
        assert cfg.env.tolerance.lower == 0.1

    def test_unknown_param_rejected(self):
        with pytest.raises(ConfigError):
            sweep_config(fast_config(), "users", 1.0)

    def test_empty_values_rejected(self):
        with pytest.raises(ConfigError):
            sweep(fast_config(), "tolerance", [], [AgentKind.COMBINED])


class TestCompare:
    @staticmethod
    def write_run(tmp_path, name, config, seeds):
        out = tmp_path / name
        out.mkdir()
        write_manifest(out, config)
        for seed in seeds:
            sub = out / run_dir_name(config.agent_kind, seed)
            sub.mkdir()
            write_metrics_csv(run_training(config, seed), sub / "metrics.csv")
        return out

    def test_identical_runs_ratio_exactly_one(self, tmp_path):
        config = fast_config(agent=AgentKind.BASELINE)
        a = self.write_run(tmp_path, "a", config, config.seeds)
        b = self.write_run(tmp_path, "b", config, config.seeds)
        summaries, ratios = compare_runs([a, b])
        assert summaries[0].terminal_mean == summaries[1].terminal_mean
        assert all(r[-1] == 1.0 for r in ratios)

    def test_summary_reads_back_terminal_mean(self, tmp_path):
        config = fast_config(agent=AgentKind.BASELINE)
        out = self.write_run(tmp_path, "a", config, config.seeds)
        summary = summarize_run_dir(out)
        expected = np.mean([terminal_reward(run_training(config, s))
                            for s in config.seeds])
        assert summary.terminal_mean == pytest.approx(float(expected))
        assert summary.agent == "baseline"

    def test_single_directory_rejected(self, tmp_path):
        config = fast_config()
        out = self.write_run(tmp_path, "a", config, (1,))
        with pytest.raises(ConfigError):
            compare_runs([out])

    def test_mismatched_scenarios_rejected(self, tmp_path):
        a = self.write_run(tmp_path, "a", fast_config(), (1,))
        b = self.write_run(tmp_path, "b", fast_config(scenario="loose"), (1,))
        with pytest.raises(ConfigError, match="env|scenario"):
            compare_runs([a, b])
