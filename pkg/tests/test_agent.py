"""Q-table semantics, composite values, soft-max policy, and the two update rules."""

import math

import numpy as np
import pytest

from chunkseg import (Agent, AgentConfig, EpisodeTrace, QTable, State, Word,
                      apply_chunk_action, composite_add, composite_avg,
                      composite_profile, leaf, node, pattern_right_depth,
                      policy_probs, select_action, substate, update_episode)
from conftest import all_tree_shapes, leaf_at, state_from_shape


def d1_state():
    return State(leaf_at(0), leaf_at(1, "N", 2))


def d2_state():
    """([n1, v1], n2)"""
    first = node(leaf_at(0), leaf_at(1, "V"))
    return State(first, leaf_at(2, "N", 2))


class TestLookup:
    def test_fresh_boundary_default(self):
        table = QTable(q_b=1.0, q_c=-1.0)
        assert table.lookup(d1_state(), 1) == 1.0

    def test_fresh_chunk_default(self):
        table = QTable(q_b=1.0, q_c=-1.0)
        assert table.lookup(d1_state(), 0) == -1.0

    def test_read_back(self):
        table = QTable()
        state = d1_state()
        table.store(state, 1, 3.4)
        assert table.lookup(state, 1) == 3.4

    def test_out_of_range(self):
        table = QTable()
        with pytest.raises(ValueError):
            table.lookup(d1_state(), 2)
        with pytest.raises(ValueError):
            table.store(d1_state(), -1, 0.0)

    def test_records_roundtrip(self):
        table = QTable(q_b=2.0, q_c=-3.0)
        table.store(d2_state(), 2, 7.125)
        table.store(d1_state(), 0, -0.1)
        restored = QTable.from_records(table.records(), q_b=2.0, q_c=-3.0)
        assert restored.entries == table.entries


class TestCompositeValues:
    def test_avg_depth1_equals_lookup(self):
        table = QTable()
        state = d1_state()
        for i in (0, 1):
            assert composite_avg(table, state, i) == table.lookup(state, i)
            assert composite_add(table, state, i) == table.lookup(state, i)

    def test_avg_boundary_fresh(self):
        # both the state and its sub-state contribute their boundary default
        assert composite_avg(QTable(), d2_state(), 2) == 1.0

    def test_avg_chunk_at_root_fresh(self):
        # only k=0 passes the gate for i=0
        assert composite_avg(QTable(), d2_state(), 0) == -1.0

    def test_add_boundary_fresh(self):
        assert composite_add(QTable(), d2_state(), 2) == 2.0

    def test_add_middle_action_fresh(self):
        # k=0 contributes a chunk default, k=1 the sub-state's chunk default
        assert composite_add(QTable(), d2_state(), 1) == -2.0

    def test_gate_restricts_contributions(self):
        table = QTable()
        state = d2_state()
        table.store(state, 0, 10.0)
        sub = substate(state, 1)
        table.store(sub, 0, 99.0)  # would only count for i >= 1
        assert composite_avg(table, state, 0) == 10.0
        assert composite_avg(table, state, 1) == pytest.approx((-1.0 + 99.0) / 2)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            composite_avg(QTable(), d2_state(), 3)
        with pytest.raises(ValueError):
            composite_add(QTable(), d2_state(), -1)


class TestPolicy:
    def test_fresh_d1_probabilities(self):
        probs = policy_probs(QTable(), d1_state(), beta=1.0)
        expected_boundary = math.e / (math.e + math.exp(-1.0))
        assert probs[1] == pytest.approx(expected_boundary, abs=1e-12)
        assert probs[0] == pytest.approx(1.0 - expected_boundary, abs=1e-12)

    def test_equal_values_uniform(self):
        table = QTable()
        state = state_from_shape(((1, 1), 1))
        for k in range(state.depth):
            sub = substate(state, k)
            for j in range(sub.depth + 1):
                table.store(sub, j, 2.0)
        probs = policy_probs(table, state, beta=1.7)
        assert probs == pytest.approx([1 / (state.depth + 1)] * (state.depth + 1))

    def test_sharp_beta_concentrates(self):
        probs = policy_probs(QTable(), d1_state(), beta=50.0)
        assert probs[1] >= 0.999

    def test_matches_composite_profile_softmax(self):
        # fused policy computation against the compositional definition
        rng = np.random.default_rng(0)
        for n in range(1, 6):
            for shape in all_tree_shapes(n):
                state = state_from_shape(shape)
                table = QTable()
                for k in range(state.depth):
                    sub = substate(state, k)
                    for j in range(sub.depth + 1):
                        if rng.random() < 0.6:
                            table.store(sub, j, float(rng.normal(scale=10)))
                beta = 0.7
                values = composite_profile(table, state)
                exps = [math.exp(beta * v) for v in values]
                expected = [e / sum(exps) for e in exps]
                assert policy_probs(table, state, beta) == pytest.approx(expected, abs=1e-12)

    def test_shift_invariance(self):
        state = state_from_shape((1, (1, 1)))
        table = QTable()
        rng = np.random.default_rng(1)
        for k in range(state.depth):
            sub = substate(state, k)
            for j in range(sub.depth + 1):
                table.store(sub, j, float(rng.normal(scale=5)))
        before = policy_probs(table, state, beta=1.9)
        shifted = QTable(entries={key: v + 7.25 for key, v in table.entries.items()})
        after = policy_probs(shifted, state, beta=1.9)
        assert after == pytest.approx(before, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        for shape in all_tree_shapes(4):
            probs = policy_probs(QTable(), state_from_shape(shape), beta=1.9)
            assert sum(probs) == pytest.approx(1.0, abs=1e-12)


class TestSelectAction:
    def test_frequency_matches_policy(self):
        rng = np.random.default_rng(7)
        state = d1_state()
        table = QTable()
        draws = 100_000
        boundary = sum(select_action(table, state, 1.0, rng) == 1 for _ in range(draws))
        assert abs(boundary / draws - 0.8808) <= 0.01

    def test_degenerate_distribution(self):
        table = QTable()
        state = d1_state()
        table.store(state, 1, 1000.0)
        rng = np.random.default_rng(0)
        assert all(select_action(table, state, 5.0, rng) == 1 for _ in range(100))

    def test_determinism(self):
        state = d2_state()
        table = QTable()
        a = np.random.default_rng(3)
        b = np.random.default_rng(3)
        seq_a = [select_action(table, state, 1.9, a) for _ in range(1000)]
        seq_b = [select_action(table, state, 1.9, b) for _ in range(1000)]
        assert seq_a == seq_b

    def test_agent_buffered_draws_match_scalar_path(self):
        state = d2_state()
        config = AgentConfig(beta=1.9)
        agent = Agent(config, rng=np.random.default_rng(11))
        reference_rng = np.random.default_rng(11)
        for _ in range(3000):
            expected = select_action(agent.table, state, config.beta, reference_rng)
            assert agent.act(state) == expected


class TestUpdateEpisode:
    def test_q_learning_boundary_arithmetic(self):
        table = QTable()
        state = d1_state()
        trace = EpisodeTrace([(state, 1)], final_reward=25.0)
        update_episode(table, trace, AgentConfig(algorithm="q_learning"))
        assert table.lookup(state, 1) == pytest.approx(1.0 + 0.1 * (25.0 - 1.0))

    def test_rw_shared_prediction_error(self):
        table = QTable()
        state = d2_state()
        trace = EpisodeTrace([(state, 2)], final_reward=25.0)
        update_episode(table, trace, AgentConfig(algorithm="rw_q_learning"))
        # additive composite prediction was 2.0, so both gated entries move by 2.3
        assert table.lookup(state, 2) == pytest.approx(3.3)
        assert table.lookup(substate(state, 1), 1) == pytest.approx(3.3)

    def test_rw_negative_reward(self):
        table = QTable()
        state = d1_state()
        trace = EpisodeTrace([(state, 1)], final_reward=-10.0)
        update_episode(table, trace, AgentConfig(algorithm="rw_q_learning"))
        assert table.lookup(state, 1) == pytest.approx(-0.1)

    def test_equivalence_at_depth_one(self):
        # depth-1 episodes: the additive composite degenerates to the single value
        rng = np.random.default_rng(5)
        tables = {algo: QTable() for algo in ("q_learning", "rw_q_learning")}
        for _ in range(200):
            index = int(rng.integers(1, 6))
            state = State(leaf(Word("N", index, 0)), leaf(Word("N", int(rng.integers(1, 6)), 1)))
            reward = 25.0 if rng.random() < 0.5 else -10.0
            trace = EpisodeTrace([(state, 1)], final_reward=reward)
            for algo, table in tables.items():
                update_episode(table, trace, AgentConfig(algorithm=algo))
        assert tables["q_learning"].entries == tables["rw_q_learning"].entries

    def test_fixed_point_attraction(self):
        # repeating the same episode with constant reward drives predictions to R
        def three_step_trace():
            s0 = d1_state()
            first1 = apply_chunk_action(s0, 0)
            s1 = State(first1, leaf_at(2, "V", 2))
            first2 = apply_chunk_action(s1, 1)
            s2 = State(first2, leaf_at(3, "N", 3))
            return EpisodeTrace([(s0, 0), (s1, 1), (s2, s2.depth)], final_reward=25.0)

        trace = three_step_trace()
        for algorithm in ("q_learning", "rw_q_learning"):
            table = QTable()
            config = AgentConfig(algorithm=algorithm)
            previous_errors = None
            for _ in range(300):
                update_episode(table, trace, config)
                if algorithm == "q_learning":
                    errors = [abs(25.0 - table.entries[key]) for key in table.entries]
                else:
                    errors = [abs(25.0 - composite_add(table, state, i))
                              for state, i in trace.steps]
                if previous_errors is not None:
                    assert all(e <= p + 1e-12 for e, p in zip(errors, previous_errors))
                previous_errors = errors
            assert max(previous_errors) < 1e-6

    def test_gate_audit_exhaustive(self):
        # every key read or written must name a spine subtree and a legal action for it
        class AuditDict(dict):
            def __init__(self):
                super().__init__()
                self.touched = set()

            def get(self, key, default=None):
                self.touched.add(key)
                return super().get(key, default)

            def __setitem__(self, key, value):
                self.touched.add(key)
                super().__setitem__(key, value)

        for algorithm in ("q_learning", "rw_q_learning"):
            for n in range(1, 6):
                for shape in all_tree_shapes(n):
                    state = state_from_shape(shape)
                    depth = state.depth
                    for i in range(depth + 1):
                        table = QTable()
                        audit = AuditDict()
                        table.entries = audit
                        if i == depth:
                            trace = EpisodeTrace([(state, i)], final_reward=-10.0)
                        else:
                            grown = apply_chunk_action(state, i)
                            successor = State(grown, leaf_at(grown.end + 1, "N", 7))
                            trace = EpisodeTrace([(state, i), (successor, successor.depth)],
                                                 final_reward=25.0)
                        update_episode(table, trace, AgentConfig(algorithm=algorithm))
                        valid_keys = set()
                        for st, action in trace.steps:
                            for k, sub in enumerate(st.first.spine):
                                if action - k >= 0:
                                    valid_keys.add((sub.key, st.second.key, action - k))
                        assert audit.touched <= valid_keys
                        for first_key, _, action in audit.touched:
                            assert 0 <= action <= pattern_right_depth(first_key)

    def test_table_growth_bounded_by_visits(self):
        # entries exist only for keys the updates actually wrote
        table = QTable()
        state = d2_state()
        trace = EpisodeTrace([(state, 2)], final_reward=25.0)
        update_episode(table, trace, AgentConfig())
        assert set(table.entries) == {
            (state.first.key, state.second.key, 2),
            (substate(state, 1).first.key, state.second.key, 1),
        }

    def test_update_order_toggle(self):
        # A stream of identical words makes the lexical key (N#1, N#1, 0)
        # collide across steps: step 0 writes it as the full state's chunk
        # action, step 1 writes it again through the sub-state gate.
        s0 = State(leaf_at(0), leaf_at(1, "N", 1))
        s1 = State(apply_chunk_action(s0, 0), leaf_at(2, "N", 1))
        s2 = State(apply_chunk_action(s1, 1), leaf_at(3, "N", 1))
        trace = EpisodeTrace([(s0, 0), (s1, 1), (s2, s2.depth)], final_reward=25.0)
        collision_key = (s0.first.key, s0.second.key, 0)

        in_order = QTable()
        update_episode(in_order, trace, AgentConfig(update_order="in_order"))
        # step 0: -1 + 0.1*(25+1) = 1.6; step 1 rereads 1.6: 1.6 + 0.1*23.4
        assert in_order.entries[collision_key] == pytest.approx(3.94)

        frozen = QTable()
        update_episode(frozen, trace, AgentConfig(update_order="frozen_table"))
        # both writes read the pre-episode default -1; the last write wins
        assert frozen.entries[collision_key] == pytest.approx(1.6)

        # without collisions the two orders agree
        plain = EpisodeTrace([(d2_state(), 2)], final_reward=25.0)
        a, b = QTable(), QTable()
        update_episode(a, plain, AgentConfig(update_order="in_order"))
        update_episode(b, plain, AgentConfig(update_order="frozen_table"))
        assert a.entries == b.entries


class TestTraceValidation:
    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            EpisodeTrace([], 25.0)

    def test_nonfinal_boundary_rejected(self):
        state = d1_state()
        with pytest.raises(ValueError, match="chunk action"):
            EpisodeTrace([(state, 1), (state, 1)], 25.0)

    def test_final_chunk_rejected(self):
        with pytest.raises(ValueError, match="boundary"):
            EpisodeTrace([(d1_state(), 0)], 25.0)


class TestAgentConfig:
    def test_defaults_match_reference_parameters(self):
        config = AgentConfig()
        assert (config.alpha, config.beta) == (0.1, 1.9)
        assert (config.r_plus, config.r_minus) == (25.0, -10.0)
        assert (config.q_b, config.q_c) == (1.0, -1.0)

    @pytest.mark.parametrize("kwargs", [
        {"alpha": 0.0}, {"alpha": 1.5}, {"beta": 0.0}, {"r_minus": 1.0},
        {"r_plus": -1.0}, {"algorithm": "sarsa"}, {"border_condition": "loop"},
        {"update_order": "random"},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            AgentConfig(**kwargs)
