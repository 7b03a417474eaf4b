"""Episode loop: rewards, the boundary oracle, reinitialization, and the guard."""

import numpy as np
import pytest

from chunkseg import (Agent, AgentConfig, DEFAULT_GUARD_LIMIT, StreamCursor,
                      builtin_complexnp, builtin_md, builtin_nvn, builtin_relclause,
                      init_simulation, is_correct_sentence, max_sentence_length,
                      reinitialize, run_episode, split_seed)
from conftest import comb_chunk


class ScriptedAgent:
    """Plays a fixed action script; records traces instead of learning."""

    def __init__(self, actions, config=None):
        self.actions = list(actions)
        self.config = config or AgentConfig()
        self.traces = []

    def act(self, state):
        return self.actions.pop(0)

    def learn(self, trace):
        self.traces.append(trace)


def make_sim(pcfg, config=None, seed=0, **kwargs):
    config = config or AgentConfig(seed=seed)
    stream_rng, _ = split_seed(seed)
    return init_simulation(pcfg, config, stream_rng=stream_rng, **kwargs)


class TestInit:
    def test_initial_state_is_first_two_words(self):
        sim = make_sim(builtin_nvn())
        assert sim.current.first.word.class_name == "N"
        assert sim.current.second.word.class_name == "V"
        assert (sim.current.first.start, sim.current.second.start) == (0, 1)
        assert sim.trial == 0
        assert sim.episode_sentence_length == 3

    def test_determinism(self):
        a = make_sim(builtin_md(), seed=5)
        b = make_sim(builtin_md(), seed=5)
        assert a.current.key == b.current.key

    def test_guard_default_covers_builtin_sentences(self):
        longest = max(max_sentence_length(factory()) for factory in
                      (builtin_nvn, builtin_md, builtin_relclause, builtin_complexnp))
        assert longest == 13
        assert DEFAULT_GUARD_LIMIT >= longest


class TestCorrectSentenceOracle:
    def test_exact_sentence_span(self):
        sim = make_sim(builtin_nvn())
        for _ in range(10):
            sim.cursor.next_word()
        assert is_correct_sentence(comb_chunk(0, 2), sim.cursor) is True

    def test_prefix_span(self):
        sim = make_sim(builtin_nvn())
        for _ in range(10):
            sim.cursor.next_word()
        assert is_correct_sentence(comb_chunk(0, 1), sim.cursor) is False

    def test_unaligned_start(self):
        sim = make_sim(builtin_nvn())
        for _ in range(10):
            sim.cursor.next_word()
        assert is_correct_sentence(comb_chunk(1, 3), sim.cursor) is False

    def test_two_sentences_span(self):
        sim = make_sim(builtin_nvn())
        for _ in range(10):
            sim.cursor.next_word()
        assert is_correct_sentence(comb_chunk(0, 5), sim.cursor) is False

    def test_matches_brute_force_resegmentation(self):
        rng = np.random.default_rng(0)
        for factory in (builtin_nvn, builtin_md, builtin_relclause, builtin_complexnp):
            cursor = StreamCursor(factory(), np.random.default_rng(17))
            flags = [cursor.next_word()[1] for _ in range(400)]
            starts = [p for p, flag in enumerate(flags) if flag]
            true_spans = {(s, e - 1) for s, e in zip(starts, starts[1:])}
            for _ in range(2500):
                start = int(rng.integers(0, 398))
                end = int(rng.integers(start, min(start + 12, 398)))
                expected = (start, end) in true_spans
                assert is_correct_sentence(comb_chunk(start, end), cursor) is expected


class TestRunEpisode:
    def test_correct_identification(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([0, 0, 2])
        record = run_episode(sim, agent)
        assert record.correct is True
        assert record.reward == 25.0
        assert record.sentence_length == 3
        assert record.steps == 3
        assert record.final_tree_pattern == "((N V) N)"
        assert record.trial_index == 0

    def test_right_branching_parse_also_correct(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([0, 1, 3])  # [n, [v, n]] has right-depth 3
        record = run_episode(sim, agent)
        assert record.correct is True
        assert record.final_tree_pattern == "(N (V N))"

    def test_internal_boundary_is_wrong(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([0, 2])
        record = run_episode(sim, agent)
        assert record.correct is False
        assert record.reward == -10.0

    def test_immediate_boundary_is_wrong(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([1])
        record = run_episode(sim, agent)
        assert record.correct is False
        assert record.final_tree_pattern == "N"

    def test_reward_dichotomy(self):
        config = AgentConfig(seed=3)
        _, policy_rng = split_seed(3)
        agent = Agent(config, rng=policy_rng)
        sim = make_sim(builtin_md(), config, seed=3)
        rewards = {run_episode(sim, agent).reward for _ in range(500)}
        assert rewards <= {25.0, -10.0}
        assert -10.0 in rewards

    def test_trial_counter_advances(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([1] * 10)
        records = [run_episode(sim, agent) for _ in range(10)]
        assert [r.trial_index for r in records] == list(range(10))
        assert sim.trial == 10


class TestReinitialization:
    def test_continuous_carries_second_forward(self):
        sim = make_sim(builtin_nvn())
        second_before = sim.current.second
        agent = ScriptedAgent([1])  # immediate boundary
        run_episode(sim, agent)
        assert sim.current.first is second_before

    def test_continuous_after_correct_parse(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([0, 0, 2])
        run_episode(sim, agent)
        # the word after the identified sentence becomes the new first element
        assert sim.current.first.start == 3
        assert sim.current.first.word.class_name == "N"

    def test_next_sentence_realigns(self):
        config = AgentConfig(border_condition="next_sentence")
        sim = make_sim(builtin_nvn(), config)
        agent = ScriptedAgent([1, 1, 1, 1, 1], config)
        for _ in range(5):
            run_episode(sim, agent)
            assert sim.cursor.boundary_before(sim.current.first.start) is True
            assert sim.episode_sentence_length == 3

    def test_unaligned_start_reports_length_zero(self):
        sim = make_sim(builtin_nvn())
        agent = ScriptedAgent([1, 1], AgentConfig())
        run_episode(sim, agent)   # boundary after word 0: next first is word 1, unaligned
        record = run_episode(sim, agent)
        assert record.sentence_length == 0

    def test_conservation_of_positions_continuous(self):
        config = AgentConfig(seed=11)
        _, policy_rng = split_seed(11)
        agent = Agent(config, rng=policy_rng)
        sim = make_sim(builtin_md(), config, seed=11)
        previous_end = -1
        for _ in range(300):
            first_start = sim.current.first.start
            assert first_start == previous_end + 1
            record = run_episode(sim, agent)
            previous_end = first_start + _episode_word_count(record) - 1

    def test_unknown_condition_rejected(self):
        sim = make_sim(builtin_nvn())
        with pytest.raises(ValueError):
            reinitialize(sim, "bounce")


def _episode_word_count(record):
    # the final first element has one leaf per step: the initial word plus
    # one chunked word per non-final step
    return record.steps


class TestGuard:
    def test_runaway_episode_forced_negative(self):
        # a chunk-happy value landscape never places a boundary on its own
        config = AgentConfig(q_b=-100.0, q_c=100.0, beta=5.0, seed=2)
        _, policy_rng = split_seed(2)
        agent = Agent(config, rng=policy_rng)
        sim = make_sim(builtin_nvn(), config, seed=2, guard_limit=4)
        record = run_episode(sim, agent)
        assert sim.guard_events == 1
        assert record.correct is False
        assert record.reward == -10.0
        # forced boundary fires once the first element outgrows the limit
        assert record.steps == 5

    def test_no_guard_events_with_reference_parameters(self):
        config = AgentConfig(seed=1)
        _, policy_rng = split_seed(1)
        agent = Agent(config, rng=policy_rng)
        sim = make_sim(builtin_nvn(), config, seed=1)
        for _ in range(2000):
            run_episode(sim, agent)
        assert sim.guard_events == 0
