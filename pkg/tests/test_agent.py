"""Q-table mechanics, epsilon schedule, action application, persistence."""
import numpy as np
import pytest

from ammtuner.agent import (
    ACTION_SETS,
    BASELINE_PARAMS,
    ActionEffect,
    AgentKind,
    Hyperparams,
    QTable,
    action_stddev,
    apply_action,
    epsilon_at,
    load_qtable,
    save_qtable,
    select_action,
    td_update,
)
from ammtuner.curve import CurveParams
from oracles import value_iteration

# chi-square 0.999 quantiles (pre-build): df=8 for 9 actions, df=2 for 3
CHI2_999_DF8 = 26.12448155837614
CHI2_999_DF2 = 13.815510557964274


class TestActionSpaces:
    def test_sizes(self):
        assert len(ACTION_SETS[AgentKind.FEE_ONLY]) == 3
        assert len(ACTION_SETS[AgentKind.LEVERAGE_ONLY]) == 3
        assert len(ACTION_SETS[AgentKind.COMBINED]) == 9
        assert len(ACTION_SETS[AgentKind.BASELINE]) == 1

    def test_combined_is_cross_product(self):
        effects = set(ACTION_SETS[AgentKind.COMBINED])
        assert effects == {ActionEffect(df, da)
                           for df in (-1, 0, 1) for da in (-2, 0, 2)}

    def test_fee_only_leaves_leverage_alone(self):
        assert all(e.delta_leverage == 0
                   for e in ACTION_SETS[AgentKind.FEE_ONLY])
        assert all(e.delta_fee_levels == 0
                   for e in ACTION_SETS[AgentKind.LEVERAGE_ONLY])

    def test_baseline_params(self):
        assert BASELINE_PARAMS.fee_rate == pytest.approx(0.17)
        assert BASELINE_PARAMS.leverage_coeff == 42


class TestEpsilon:
    def test_starts_at_max(self):
        assert epsilon_at(0, Hyperparams()) == 1.0

    def test_tends_to_min(self):
        assert epsilon_at(10_000_000, Hyperparams()) == pytest.approx(0.01)

    def test_pinned_value(self):
        hyper = Hyperparams(eps_max=1.0, eps_min=0.01, eta=0.0015)
        assert epsilon_at(1000, hyper) == pytest.approx(0.23089885854694553,
                                                        rel=1e-15)

    def test_monotone_non_increasing(self):
        hyper = Hyperparams()
        values = [epsilon_at(epoch, hyper) for epoch in range(0, 5000, 50)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestSelectAction:
    def test_argmax_when_greedy(self):
        table = QTable(3)
        table._cell((0, 0, 0))[:] = [0.0, 0.0, 5.0]
        rng = np.random.default_rng(0)
        assert select_action(table, (0, 0, 0), 0.0, AgentKind.FEE_ONLY, rng) == 2

    def test_full_tie_breaks_uniformly(self):
        table = QTable(3)
        rng = np.random.default_rng(1)
        counts = np.zeros(3)
        n = 10_000
        for _ in range(n):
            counts[select_action(table, (0, 0, 0), 0.0, AgentKind.FEE_ONLY,
                                 rng)] += 1
        chi2 = float(np.sum((counts - n / 3) ** 2 / (n / 3)))
        assert chi2 < CHI2_999_DF2

    def test_epsilon_one_is_uniform(self):
        table = QTable(9)
        table._cell((0, 0, 0))[:] = np.arange(9)  # values should not matter
        rng = np.random.default_rng(2)
        counts = np.zeros(9)
        n = 10_000
        for _ in range(n):
            counts[select_action(table, (0, 0, 0), 1.0, AgentKind.COMBINED,
                                 rng)] += 1
        chi2 = float(np.sum((counts - n / 9) ** 2 / (n / 9)))
        assert chi2 < CHI2_999_DF8

    def test_baseline_always_noop(self):
        table = QTable(1)
        rng = np.random.default_rng(3)
        assert all(select_action(table, (b, 0, 0), 1.0, AgentKind.BASELINE, rng) == 0
                   for b in range(5))

    def test_reads_do_not_allocate(self):
        table = QTable(3)
        rng = np.random.default_rng(4)
        select_action(table, (1, 2, 3), 0.0, AgentKind.FEE_ONLY, rng)
        assert len(table) == 0


class TestTdUpdate:
    def test_single_step_example(self):
        table = QTable(2)
        td_update(table, "s", 0, 5.0, "t", Hyperparams(alpha=0.1, gamma=0.99))
        assert table.values("s")[0] == pytest.approx(0.5)

    def test_bootstrapped_example(self):
        table = QTable(2)
        table._cell("s")[0] = 0.5
        table._cell("t")[:] = [2.0, 1.0]
        td_update(table, "s", 0, 0.0, "t", Hyperparams(alpha=0.1, gamma=0.99))
        assert table.values("s")[0] == pytest.approx(0.648)

    def test_only_one_cell_changes(self):
        table = QTable(3)
        table._cell("s")[:] = [1.0, 2.0, 3.0]
        table._cell("t")[:] = [4.0, 5.0, 6.0]
        td_update(table, "s", 1, 1.0, "t", Hyperparams())
        assert table.values("s")[0] == 1.0
        assert table.values("s")[2] == 3.0
        assert list(table.values("t")) == [4.0, 5.0, 6.0]
        assert len(table) == 2

    def test_untouched_cells_stay_exactly_zero(self):
        table = QTable(4)
        for step in range(50):
            td_update(table, (step % 3, 0, 0), 0, 1.0, ((step + 1) % 3, 0, 0),
                      Hyperparams())
        for obs, vec in table.items():
            assert all(v == 0.0 for v in vec[1:])

    def test_repeated_update_contracts_geometrically(self):
        table = QTable(2)
        hyper = Hyperparams(alpha=0.25, gamma=0.9)
        target = 3.0  # next state stays all-zero, so fixed point is R
        errors = []
        for _ in range(30):
            td_update(table, "s", 0, target, "terminal", hyper)
            errors.append(abs(table.values("s")[0] - target))
        ratios = [b / a for a, b in zip(errors, errors[1:]) if a > 1e-12]
        assert all(r == pytest.approx(1 - hyper.alpha, rel=1e-9) for r in ratios)

    def test_converges_to_value_iteration_fixed_point(self):
        # two-state, two-action deterministic MDP; action a jumps to state a
        rewards = [[1.0, 0.0], [0.0, 2.0]]
        transitions = [[0, 1], [0, 1]]
        gamma = 0.9
        oracle = value_iteration(rewards, transitions, gamma)

        table = QTable(2)
        hyper = Hyperparams(alpha=0.5, gamma=gamma)
        for _ in range(2_000):
            for s in (0, 1):
                for a in (0, 1):
                    td_update(table, s, a, rewards[s][a], transitions[s][a],
                              hyper)
        for s in (0, 1):
            for a in (0, 1):
                assert table.values(s)[a] == pytest.approx(oracle[s][a],
                                                           abs=1e-3)


class TestApplyAction:
    def test_lower_fee_clamp(self):
        params = CurveParams.from_levels(0, 42)
        moved = apply_action(params, ActionEffect(-1, 0))
        assert moved.fee_level == 0

    def test_upper_leverage_clamp(self):
        params = CurveParams.from_levels(13, 85)
        moved = apply_action(params, ActionEffect(0, 2))
        assert moved.leverage_coeff == 85

    def test_interior_move(self):
        params = CurveParams.from_levels(13, 42)
        moved = apply_action(params, ActionEffect(1, -2))
        assert moved.fee_rate == pytest.approx(0.18)
        assert moved.leverage_coeff == 40

    def test_idempotent_at_boundaries(self):
        params = CurveParams.from_levels(26, 85)
        once = apply_action(params, ActionEffect(1, 2))
        twice = apply_action(once, ActionEffect(1, 2))
        assert once == twice

    def test_never_leaves_bounds(self):
        rng = np.random.default_rng(5)
        params = CurveParams.from_levels(13, 42)
        effects = ACTION_SETS[AgentKind.COMBINED]
        for _ in range(500):
            params = apply_action(params, effects[rng.integers(9)])
            assert 0 <= params.fee_level <= 26
            assert 0 <= params.leverage_coeff <= 85


class TestActionStddev:
    def test_constant_stream_is_zero(self):
        per_epoch, mean = action_stddev([[4, 4, 4, 4]])
        assert per_epoch == [0.0] and mean == 0.0

    def test_two_point_alternation(self):
        per_epoch, mean = action_stddev([[0, 8, 0, 8], [8, 0, 8, 0]])
        assert per_epoch == [4.0, 4.0] and mean == 4.0

    def test_uniform_stream_approaches_discrete_uniform_stddev(self):
        rng = np.random.default_rng(6)
        history = [rng.integers(0, 9, size=20_000).tolist()]
        _, mean = action_stddev(history)
        assert mean == pytest.approx(2.581988897471611, abs=0.05)

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            action_stddev([])


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        table = QTable(9)
        rng = np.random.default_rng(7)
        for _ in range(200):
            obs = (int(rng.integers(500)), int(rng.integers(27)),
                   int(rng.integers(86)))
            table._cell(obs)[:] = rng.standard_normal(9) * rng.uniform(0, 100)
        hyper = Hyperparams(alpha=0.3, gamma=0.9, eta=0.009)
        path = tmp_path / "qtable.json"
        save_qtable(table, AgentKind.COMBINED, hyper, path)

        loaded, kind, loaded_hyper = load_qtable(path)
        assert kind is AgentKind.COMBINED
        assert loaded_hyper == hyper
        assert len(loaded) == len(table)
        for obs, vec in table.items():
            got = loaded.values(tuple(obs))
            assert all(a == b for a, b in zip(got, vec)), "values not bit-exact"

    def test_snapshot_key_format(self, tmp_path):
        table = QTable(3)
        table._cell((250, 13, 42))[0] = 1.5
        path = tmp_path / "qtable.json"
        save_qtable(table, AgentKind.FEE_ONLY, Hyperparams(), path)
        text = path.read_text()
        assert '"250,13,42"' in text
