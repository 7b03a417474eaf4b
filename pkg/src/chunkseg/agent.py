"""Q-table memory, composite state-action values, soft-max policy, episode updates.

Two temporal-difference rules are supported.  Plain Q-learning updates every
gated (sub-state, action) entry toward the terminal reward independently.
Rescorla-Wagner Q-learning treats the sub-states of a hierarchical state as
elements of a compound stimulus: one shared prediction error, computed from
the additive composite value, drives all of a step's updates, so informative
sub-states block learning on redundant ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chunking import State

ALGORITHMS = ("q_learning", "rw_q_learning")
BORDER_CONDITIONS = ("continuous", "next_sentence")
UPDATE_ORDERS = ("in_order", "frozen_table")


@dataclass
class AgentConfig:
    alpha: float = 0.1             # learning rate
    beta: float = 1.9              # soft-max exploration parameter
    r_plus: float = 25.0           # reward for a correct sentence
    r_minus: float = -10.0         # reward for a wrong boundary placement
    q_b: float = 1.0               # initial value of placing a border
    q_c: float = -1.0              # initial value of chunking
    algorithm: str = "q_learning"
    border_condition: str = "continuous"
    update_order: str = "in_order"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.r_minus < 0.0 < self.r_plus:
            raise ValueError(
                f"rewards must satisfy r_minus < 0 < r_plus, got {self.r_minus}, {self.r_plus}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.border_condition not in BORDER_CONDITIONS:
            raise ValueError(
                f"border_condition must be one of {BORDER_CONDITIONS}, got {self.border_condition!r}")
        if self.update_order not in UPDATE_ORDERS:
            raise ValueError(f"update_order must be one of {UPDATE_ORDERS}, got {self.update_order!r}")


class QTable:
    """Sparse map from (state key, action index) to a learned value.

    Absent entries read as the initial border value q_b when the action is
    the state's boundary action, else as the initial chunk value q_c; an
    entry is stored only once an update writes it.
    """

    __slots__ = ("entries", "q_b", "q_c")

    def __init__(self, q_b: float = 1.0, q_c: float = -1.0, entries: dict | None = None):
        self.q_b = q_b
        self.q_c = q_c
        self.entries: dict[tuple[str, str, int], float] = dict(entries) if entries else {}

    def _get(self, first_key: str, second_key: str, first_depth: int, action: int) -> float:
        value = self.entries.get((first_key, second_key, action))
        if value is None:
            return self.q_b if action == first_depth else self.q_c
        return value

    def lookup(self, state: State, action: int) -> float:
        d = state.first.depth
        if not 0 <= action <= d:
            raise ValueError(f"action {action} out of range for right-depth {d}")
        return self._get(state.first.key, state.second.key, d, action)

    def store(self, state: State, action: int, value: float) -> None:
        d = state.first.depth
        if not 0 <= action <= d:
            raise ValueError(f"action {action} out of range for right-depth {d}")
        self.entries[(state.first.key, state.second.key, action)] = value

    def copy(self) -> "QTable":
        return QTable(self.q_b, self.q_c, self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def records(self) -> list[tuple[str, int, float]]:
        """Serialization records: (state_key, action, value), sorted for stable output."""
        return sorted((fk + "|" + sk, action, value)
                      for (fk, sk, action), value in self.entries.items())

    @classmethod
    def from_records(cls, records, q_b: float = 1.0, q_c: float = -1.0) -> "QTable":
        table = cls(q_b, q_c)
        for state_key, action, value in records:
            fk, _, sk = state_key.partition("|")
            table.entries[(fk, sk, int(action))] = float(value)
        return table


def composite_avg(table: QTable, state: State, i: int) -> float:
    """Average composite value: mean of gated sub-state values for action i.

    Sub-state k contributes its value for action i-k whenever i-k >= 0; the
    divisor is the number of contributing sub-states.  Used for decisions.
    """
    d = state.first.depth
    if not 0 <= i <= d:
        raise ValueError(f"action {i} out of range for right-depth {d}")
    second_key = state.second.key
    total = 0.0
    n = min(i, d - 1) + 1
    for k in range(n):
        sub = state.first.spine[k]
        total += table._get(sub.key, second_key, sub.depth, i - k)
    return total / n


def composite_add(table: QTable, state: State, i: int) -> float:
    """Additive composite value: sum of the same gated terms.  Used by the RW rule."""
    d = state.first.depth
    if not 0 <= i <= d:
        raise ValueError(f"action {i} out of range for right-depth {d}")
    second_key = state.second.key
    total = 0.0
    for k in range(min(i, d - 1) + 1):
        sub = state.first.spine[k]
        total += table._get(sub.key, second_key, sub.depth, i - k)
    return total


def composite_profile(table: QTable, state: State) -> list[float]:
    """composite_avg for every action of `state`."""
    return [composite_avg(table, state, i) for i in range(state.first.depth + 1)]


def policy_probs(table: QTable, state: State, beta: float) -> list[float]:
    """Soft-max over the state's depth+1 legal actions, driven by composite_avg.

    Computed in one fused pass over the sub-states; equals
    ``softmax(beta * composite_profile(table, state))``.
    """
    first = state.first
    d = first.depth
    second_key = state.second.key
    entries = table.entries
    q_b = table.q_b
    q_c = table.q_c
    sums = [0.0] * (d + 1)
    counts = [0] * (d + 1)
    for k, sub in enumerate(first.spine):
        sub_key = sub.key
        sub_depth = sub.depth
        for j in range(sub_depth + 1):
            v = entries.get((sub_key, second_key, j))
            if v is None:
                v = q_b if j == sub_depth else q_c
            sums[k + j] += v
            counts[k + j] += 1
    exp = math.exp
    values = [s / c for s, c in zip(sums, counts)]
    top = max(values)
    exps = [exp(beta * (v - top)) for v in values]
    z = sum(exps)
    return [e / z for e in exps]


def _pick(probs: list[float], u: float) -> int:
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def select_action(table: QTable, state: State, beta: float, rng: np.random.Generator) -> int:
    """Sample an action index from the soft-max policy."""
    return _pick(policy_probs(table, state, beta), rng.random())


@dataclass
class EpisodeTrace:
    """The (state, chosen action) sequence of one episode plus its terminal reward."""

    steps: list[tuple[State, int]]
    final_reward: float

    def __post_init__(self):
        if not self.steps:
            raise ValueError("episode trace must contain at least the boundary step")
        for state, action in self.steps[:-1]:
            if not 0 <= action < state.first.depth:
                raise ValueError(f"non-final step must be a chunk action, got {action}")
        last_state, last_action = self.steps[-1]
        if last_action != last_state.first.depth:
            raise ValueError("final step must be the boundary action")


def update_episode(table: QTable, trace: EpisodeTrace, config: AgentConfig) -> None:
    """Apply the configured learning rule to every step of an episode.

    For each step (state, action i) and each sub-state k with i-k >= 0:
    q_learning moves Q(S^k, a_{i-k}) toward the terminal reward using its own
    prediction error; rw_q_learning uses one shared error, reward minus the
    additive composite value, computed before any of that step's writes.

    Steps are processed in episode order, so with `in_order` (the default)
    later steps see earlier steps' writes; `frozen_table` reads every
    prediction from the pre-episode table instead (sensitivity toggle; on
    duplicate keys the last write wins).
    """
    alpha = config.alpha
    reward = trace.final_reward
    rw = config.algorithm == "rw_q_learning"
    entries = table.entries
    read_entries = dict(entries) if config.update_order == "frozen_table" else entries
    q_b = table.q_b
    q_c = table.q_c
    for state, i in trace.steps:
        first = state.first
        second_key = state.second.key
        spine = first.spine
        n_gated = min(i, first.depth - 1) + 1
        if rw:
            prediction = 0.0
            for k in range(n_gated):
                sub = spine[k]
                v = read_entries.get((sub.key, second_key, i - k))
                if v is None:
                    v = q_b if i - k == sub.depth else q_c
                prediction += v
            error = alpha * (reward - prediction)
        for k in range(n_gated):
            sub = spine[k]
            entry_key = (sub.key, second_key, i - k)
            old = read_entries.get(entry_key)
            if old is None:
                old = q_b if i - k == sub.depth else q_c
            entries[entry_key] = old + error if rw else old + alpha * (reward - old)


class Agent:
    """A learner: Q-table plus policy RNG plus learning configuration.

    The policy RNG is the agent's private action-sampling stream; uniforms
    are drawn in blocks for speed, which consumes the generator identically
    to one scalar draw per decision.
    """

    __slots__ = ("config", "table", "policy_rng", "_uniforms", "_cursor")

    def __init__(self, config: AgentConfig, rng: np.random.Generator | None = None,
                 table: QTable | None = None):
        self.config = config
        self.table = table if table is not None else QTable(config.q_b, config.q_c)
        self.policy_rng = rng if rng is not None else np.random.default_rng(config.seed)
        self._uniforms = None
        self._cursor = 0

    def _uniform(self) -> float:
        u = self._uniforms
        if u is None or self._cursor >= len(u):
            u = self._uniforms = self.policy_rng.random(1024).tolist()
            self._cursor = 0
        value = u[self._cursor]
        self._cursor += 1
        return value

    def act(self, state: State) -> int:
        return _pick(policy_probs(self.table, state, self.config.beta), self._uniform())

    def learn(self, trace: EpisodeTrace) -> None:
        update_episode(self.table, trace, self.config)
