"""Episodic task loop: feed words, apply actions, judge boundaries, deliver rewards.

An episode runs until the agent places a boundary.  The boundary is correct
when the state's first chunk spans exactly one true sentence of the stream;
the terminal reward (r_plus or r_minus) then updates every step of the
episode.  A guard limit converts runaway chunk growth into a forced,
negatively rewarded boundary so episodes always terminate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .agent import Agent, AgentConfig, EpisodeTrace
from .chunking import Chunk, State, apply_chunk_action, leaf
from .grammar import Pcfg, StreamCursor, validate_pcfg

DEFAULT_GUARD_LIMIT = 64
DEFAULT_HISTORY = 10_000


class EpisodeRecord(NamedTuple):
    trial_index: int
    correct: bool
    reward: float
    sentence_length: int      # true length at an aligned episode start, else 0
    final_tree_pattern: str
    steps: int


@dataclass
class SimulationState:
    """One agent's view of the task: its stream cursor and working-memory state."""

    cursor: StreamCursor
    current: State
    trial: int = 0
    guard_limit: int = DEFAULT_GUARD_LIMIT
    guard_events: int = 0
    episode_sentence_length: int = 0


def split_seed(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Derive independent (stream, policy) generators from one base seed."""
    stream_seq, policy_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(stream_seq), np.random.default_rng(policy_seq)


def init_simulation(pcfg: Pcfg, config: AgentConfig,
                    stream_rng: np.random.Generator | None = None,
                    guard_limit: int = DEFAULT_GUARD_LIMIT,
                    history: int = DEFAULT_HISTORY) -> SimulationState:
    """Start a simulation with the first two stream words as the initial state."""
    validate_pcfg(pcfg)
    if stream_rng is None:
        stream_rng, _ = split_seed(config.seed)
    cursor = StreamCursor(pcfg, stream_rng, history=history)
    first, _ = cursor.next_word()
    second, _ = cursor.next_word()
    sim = SimulationState(cursor=cursor, current=State(leaf(first), leaf(second)),
                          guard_limit=guard_limit)
    sim.episode_sentence_length = _start_sentence_length(cursor, first.position)
    return sim


def _start_sentence_length(cursor: StreamCursor, start: int) -> int:
    if cursor.boundary_before(start):
        return cursor.sentence_length_at(start)
    return 0


def is_correct_sentence(chunk: Chunk, cursor: StreamCursor) -> bool:
    """True iff the chunk spans exactly one true sentence of the stream."""
    if not cursor.boundary_before(chunk.start):
        return False
    if not cursor.boundary_before(chunk.end + 1):
        return False
    for p in range(chunk.start + 1, chunk.end + 1):
        if cursor.boundary_before(p):
            return False
    return True


def run_episode(sim: SimulationState, agent: Agent) -> EpisodeRecord:
    """Run one episode to boundary placement, learn from it, and reinitialize."""
    config = agent.config
    cursor = sim.cursor
    state = sim.current
    trace_steps: list[tuple[State, int]] = []
    guard = False
    while True:
        action = agent.act(state)
        trace_steps.append((state, action))
        if action == state.first.depth:
            break
        grown = apply_chunk_action(state, action)
        word, _ = cursor.next_word()
        state = State(grown, leaf(word))
        if grown.n_leaves > sim.guard_limit:
            trace_steps.append((state, state.first.depth))
            guard = True
            break
    if guard:
        sim.guard_events += 1
        correct = False
    else:
        correct = is_correct_sentence(state.first, cursor)
    reward = config.r_plus if correct else config.r_minus
    agent.learn(EpisodeTrace(trace_steps, reward))
    record = EpisodeRecord(sim.trial, correct, reward, sim.episode_sentence_length,
                           state.first.pattern, len(trace_steps))
    sim.trial += 1
    sim.current = state
    reinitialize(sim, config.border_condition)
    return record


def reinitialize(sim: SimulationState, condition: str) -> None:
    """Set up the next episode's initial state after a boundary placement."""
    cursor = sim.cursor
    if condition == "continuous":
        first = sim.current.second
    elif condition == "next_sentence":
        first = leaf(cursor.skip_to_next_sentence())
    else:
        raise ValueError(f"unknown border condition {condition!r}")
    word, _ = cursor.next_word()
    sim.current = State(first, leaf(word))
    sim.episode_sentence_length = _start_sentence_length(cursor, first.start)
