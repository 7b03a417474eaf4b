"""Population experiments: learning curves, logistic fits, grammar extraction, parse tallies.

Agents are fully independent, so a population run is data-parallel: agent i
is seeded with base_seed + i and produces the same results at any worker
count.  Analysis helpers turn the recorded per-trial outcomes into the
standard artifacts: overall and per-sentence-length learning curves, a
logistic fit with learning time 2*x0, class-level rules thresholded out of
a Q-table, and parse-frequency tallies for correctly identified sentences.
"""

from __future__ import annotations

import math
import multiprocessing
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .agent import Agent, AgentConfig, QTable
from .chunking import pattern_instance_total, pattern_leaves, pattern_right_depth
from .environment import (DEFAULT_GUARD_LIMIT, DEFAULT_HISTORY, EpisodeRecord,
                          SimulationState, init_simulation, run_episode, split_seed)
from .grammar import Pcfg, builtin_grammar, load_grammar_file, validate_pcfg


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a population run from a single base seed."""

    grammar: str | Pcfg = "nvn"
    class_sizes: dict[str, int] = field(default_factory=dict)
    agent: AgentConfig = field(default_factory=AgentConfig)
    population_size: int = 100
    total_trials: int = 4000
    base_seed: int = 0
    snapshot_trials: tuple[int, ...] = ()
    extraction_threshold: float = 5.0
    parse_window: tuple[int, int] | None = None
    smoothing_window: int = 51
    guard_limit: int = DEFAULT_GUARD_LIMIT
    history: int = DEFAULT_HISTORY
    snapshot_agents: str = "focal"      # "focal": agent 0 only; "all": every agent
    keep_tables: str = "all"            # "all" | "focal" | "none": final tables to retain
    episode_log: bool = False           # keep the focal agent's full episode records
    workers: int = 1

    def resolve_grammar(self) -> Pcfg:
        if isinstance(self.grammar, Pcfg):
            pcfg = self.grammar
        elif isinstance(self.grammar, str) and self.grammar.endswith((".grammar", ".txt")):
            pcfg = load_grammar_file(self.grammar)
        else:
            pcfg = builtin_grammar(self.grammar, self.class_sizes)
        validate_pcfg(pcfg)
        return pcfg

    def validate(self) -> None:
        if self.population_size < 1:
            raise ValueError(f"population_size must be >= 1, got {self.population_size}")
        if self.total_trials < 1:
            raise ValueError(f"total_trials must be >= 1, got {self.total_trials}")
        if not 0.0 < self.extraction_threshold < self.agent.r_plus:
            raise ValueError(
                f"extraction_threshold must lie in (0, r_plus), got {self.extraction_threshold}")
        for t in self.snapshot_trials:
            if not 1 <= t <= self.total_trials:
                raise ValueError(f"snapshot trial {t} outside [1, {self.total_trials}]")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError(f"smoothing_window must be odd, got {self.smoothing_window}")
        if self.snapshot_agents not in ("focal", "all"):
            raise ValueError(f"snapshot_agents must be 'focal' or 'all', got {self.snapshot_agents!r}")
        if self.keep_tables not in ("all", "focal", "none"):
            raise ValueError(f"keep_tables must be 'all', 'focal' or 'none', got {self.keep_tables!r}")
        if self.parse_window is not None:
            start, end = self.parse_window
            if not 0 <= start < end:
                raise ValueError(f"parse_window must satisfy 0 <= start < end, got {self.parse_window}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class LearningCurve:
    """Per-trial outcomes of a population: correctness and episode sentence length."""

    correct: np.ndarray    # (agents, trials) bool
    lengths: np.ndarray    # (agents, trials) int16; 0 marks unaligned episode starts

    @property
    def n_agents(self) -> int:
        return self.correct.shape[0]

    @property
    def n_trials(self) -> int:
        return self.correct.shape[1]

    @property
    def fraction_correct(self) -> np.ndarray:
        return self.correct.mean(axis=0)

    def observed_lengths(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.lengths))


class LengthCurve(NamedTuple):
    fraction: np.ndarray   # NaN at trials where no agent met this length
    count: np.ndarray


def breakdown_by_length(curve: LearningCurve) -> dict[int, LengthCurve]:
    """Per-sentence-length learning curves.

    At each trial, the fraction for length L is taken over the agents whose
    episode that trial had sentence length L.  Length 0 collects episodes
    that started mid-sentence and is meaningless as a curve.
    """
    out: dict[int, LengthCurve] = {}
    for length in curve.observed_lengths():
        mask = curve.lengths == length
        count = mask.sum(axis=0)
        with np.errstate(invalid="ignore"):
            fraction = np.where(count > 0, (curve.correct & mask).sum(axis=0) / count, np.nan)
        out[length] = LengthCurve(fraction, count)
    return out


@dataclass
class PopulationResult:
    curve: LearningCurve
    snapshots: dict[int, dict[int, QTable]]   # trial -> agent index -> table copy
    final_tables: list    # per agent: QTable, or None when not retained (keep_tables)
    guard_events: int
    agent_seeds: list[int]
    focal_episodes: list[EpisodeRecord] | None = None

    def focal_snapshot(self, trial: int) -> QTable:
        return self.snapshots[trial][0]


def _simulate_agent(args) -> tuple:
    pcfg, config, agent_index, keep_snapshots = args
    seed = config.base_seed + agent_index
    agent_config = replace(config.agent, seed=seed)
    stream_rng, policy_rng = split_seed(seed)
    agent = Agent(agent_config, rng=policy_rng)
    sim = init_simulation(pcfg, agent_config, stream_rng=stream_rng,
                          guard_limit=config.guard_limit, history=config.history)
    n_trials = config.total_trials
    correct = np.zeros(n_trials, dtype=bool)
    lengths = np.zeros(n_trials, dtype=np.int16)
    snapshot_set = set(config.snapshot_trials) if keep_snapshots else ()
    snapshots: dict[int, QTable] = {}
    keep_log = config.episode_log and agent_index == 0
    episodes: list[EpisodeRecord] | None = [] if keep_log else None
    for t in range(n_trials):
        record = run_episode(sim, agent)
        correct[t] = record.correct
        lengths[t] = record.sentence_length
        if keep_log:
            episodes.append(record)
        if t + 1 in snapshot_set:
            snapshots[t + 1] = agent.table.copy()
    keep = config.keep_tables
    table = agent.table if keep == "all" or (keep == "focal" and agent_index == 0) else None
    return correct, lengths, table, snapshots, sim.guard_events, episodes


def run_population(config: ExperimentConfig) -> PopulationResult:
    """Run N independent agents for T trials each; deterministic in (config, base_seed)."""
    config.validate()
    pcfg = config.resolve_grammar()
    n = config.population_size
    tasks = [(pcfg, config, i, config.snapshot_agents == "all" or i == 0)
             for i in range(n)]
    if config.workers > 1 and n > 1:
        chunksize = max(1, n // (config.workers * 4))
        with multiprocessing.Pool(config.workers) as pool:
            results = pool.map(_simulate_agent, tasks, chunksize=chunksize)
    else:
        results = [_simulate_agent(task) for task in tasks]

    correct = np.stack([r[0] for r in results])
    lengths = np.stack([r[1] for r in results])
    snapshots: dict[int, dict[int, QTable]] = {t: {} for t in config.snapshot_trials}
    for i, r in enumerate(results):
        for trial, table in r[3].items():
            snapshots[trial][i] = table
    return PopulationResult(
        curve=LearningCurve(correct, lengths),
        snapshots=snapshots,
        final_tables=[r[2] for r in results],
        guard_events=sum(r[4] for r in results),
        agent_seeds=[config.base_seed + i for i in range(n)],
        focal_episodes=results[0][5],
    )


def merge_tables(tables: list[QTable]) -> QTable:
    """Population-aggregate Q-table: per entry, the mean over agents storing it.

    Entries exist only where some agent visited, so the aggregate reflects
    what the population as a whole learned; extraction from it reports
    class-level rules at population scale rather than for one learner.
    """
    if not tables:
        raise ValueError("merge_tables needs at least one table")
    sums: dict = {}
    counts: dict = {}
    for table in tables:
        for key, value in table.entries.items():
            if key in sums:
                sums[key] += value
                counts[key] += 1
            else:
                sums[key] = value
                counts[key] = 1
    merged = QTable(tables[0].q_b, tables[0].q_c)
    merged.entries = {key: sums[key] / counts[key] for key in sums}
    return merged


class LogisticFit(NamedTuple):
    k: float
    x0: float
    learning_time: float
    residual: float            # sum of squared errors
    ok: bool


def logistic(x, k: float, x0: float):
    return expit(k * (np.asarray(x, dtype=float) - x0))


def fit_logistic(fractions, mse_bound: float = 0.02) -> LogisticFit:
    """Least-squares logistic fit of a learning curve; learning time is 2*x0.

    A coarse grid over (k, x0) seeds a trust-region Gauss-Newton refinement.
    The fit is flagged not-ok (best parameters still returned) when the mean
    squared error exceeds `mse_bound` or the fitted curve is essentially
    flat over the data window, as happens for irregular or degenerate curves.
    """
    y = np.asarray(fractions, dtype=float)
    n = len(y)
    if n < 10:
        raise ValueError(f"curve too short to fit: {n} points")
    x = np.arange(1, n + 1, dtype=float)

    x0_grid = np.linspace(1.0, float(n), 48)
    best_sse = math.inf
    best = (1e-2, float(n) / 2.0)
    for k in np.geomspace(1e-4, 1.0, 40):
        predictions = logistic(x[None, :], k, x0_grid[:, None])
        sses = np.square(predictions - y[None, :]).sum(axis=1)
        idx = int(np.argmin(sses))
        if sses[idx] < best_sse:
            best_sse = float(sses[idx])
            best = (float(k), float(x0_grid[idx]))

    solution = least_squares(
        lambda p: logistic(x, p[0], p[1]) - y,
        x0=np.array(best),
        bounds=([1e-9, -np.inf], [np.inf, np.inf]),
    )
    k, x0 = (float(v) for v in solution.x)
    sse = float(np.sum(np.square(solution.fun)))
    fitted_range = abs(float(logistic(x[-1], k, x0)) - float(logistic(x[0], k, x0)))
    ok = sse / n <= mse_bound and fitted_range >= 0.5
    return LogisticFit(k, x0, 2.0 * x0, sse, ok)


def catalan(n: int) -> int:
    """Number of binary tree shapes over a sentence of n words."""
    if not 1 <= n <= 30:
        raise ValueError(f"sentence length must be in [1, 30], got {n}")
    return math.comb(2 * (n - 1), n - 1) // n


def action_label(action: int, depth: int) -> str:
    """Human-readable action name for a state of the given right-depth."""
    if action == depth:
        return "border"
    if depth == 1:
        return "chunk"
    if action == 0:
        return "chunk at root"
    if action == 1:
        return "chunk deep"
    return "chunk deepest"


@dataclass(frozen=True)
class ExtractedRule:
    first_pattern: str
    second_pattern: str
    action: int
    action_label: str
    mean_q: float
    instance_count: int
    total_instances: int


_INDEX_RE = re.compile(r"#\d+")


def extract_grammar(table: QTable, t_g: float, pcfg: Pcfg) -> list[ExtractedRule]:
    """Threshold the table at t_g and group lexical entries into class-level rules.

    Pure function of (table, t_g): entries with value > t_g are grouped by
    (first pattern, second pattern, action); each rule reports the mean value
    over its instances, the instance count, and the maximum possible number
    of instances.  Sorted shortest-first, then by pattern and action.
    """
    if t_g <= 0.0:
        raise ValueError(f"extraction threshold must be > 0, got {t_g}")
    groups: dict[tuple[str, str, int], list[float]] = {}
    for (first_key, second_key, action), value in table.entries.items():
        if value > t_g:
            pattern_key = (_INDEX_RE.sub("", first_key), _INDEX_RE.sub("", second_key), action)
            groups.setdefault(pattern_key, []).append(value)
    rules = []
    for (first_pattern, second_pattern, action), values in groups.items():
        depth = pattern_right_depth(first_pattern)
        total = (pattern_instance_total(first_pattern, pcfg)
                 * pattern_instance_total(second_pattern, pcfg))
        rules.append(ExtractedRule(
            first_pattern, second_pattern, action, action_label(action, depth),
            mean_q=sum(values) / len(values),
            instance_count=len(values),
            total_instances=total,
        ))
    rules.sort(key=lambda r: (len(pattern_leaves(r.first_pattern)), r.first_pattern,
                              r.second_pattern, r.action))
    return rules


@dataclass
class ParseFrequencyReport:
    """Tree-structure tallies for correctly identified sentences in a trial window."""

    tallies: dict[str, Counter]        # sentence class pattern -> tree pattern -> count
    window: tuple[int, int]

    def frequencies(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for sentence, counts in self.tallies.items():
            total = sum(counts.values())
            out[sentence] = {tree: c / total for tree, c in counts.most_common()}
        return out

    def catalan_bound(self, sentence: str) -> int:
        return catalan(len(sentence.split()))


def record_parse_frequencies(sim: SimulationState, agent: Agent,
                             window: tuple[int, int]) -> ParseFrequencyReport:
    """Drive the simulation through `window`, tallying correct parses; learning stays on.

    Trials are counted from 0; the window is the half-open range
    [start, end), so (500000, 1000000) covers the 500001st through the
    1000000th episode.
    """
    start, end = window
    if sim.trial > start:
        raise ValueError(f"simulation already at trial {sim.trial}, past window start {start}")
    while sim.trial < start:
        run_episode(sim, agent)
    tallies: dict[str, Counter] = {}
    while sim.trial < end:
        record = run_episode(sim, agent)
        if record.correct:
            tree = record.final_tree_pattern
            sentence = " ".join(token.split("#", 1)[0] for token in pattern_leaves(tree))
            tallies.setdefault(sentence, Counter())[tree] += 1
    return ParseFrequencyReport(tallies, window)


def run_parse_frequency_experiment(config: ExperimentConfig) -> ParseFrequencyReport:
    """Train one focal agent from scratch and tally parses over config.parse_window."""
    config.validate()
    if config.parse_window is None:
        raise ValueError("config.parse_window must be set")
    pcfg = config.resolve_grammar()
    agent_config = replace(config.agent, seed=config.base_seed)
    stream_rng, policy_rng = split_seed(config.base_seed)
    agent = Agent(agent_config, rng=policy_rng)
    sim = init_simulation(pcfg, agent_config, stream_rng=stream_rng,
                          guard_limit=config.guard_limit, history=config.history)
    return record_parse_frequencies(sim, agent, config.parse_window)


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average with shrinking edge windows; NaN-aware."""
    y = np.asarray(values, dtype=float)
    if window <= 1:
        return y.copy()
    if window % 2 == 0:
        raise ValueError(f"smoothing window must be odd, got {window}")
    half = window // 2
    valid = ~np.isnan(y)
    filled = np.where(valid, y, 0.0)
    cumsum = np.concatenate([[0.0], np.cumsum(filled)])
    cumcount = np.concatenate([[0], np.cumsum(valid)])
    n = len(y)
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    sums = cumsum[hi] - cumsum[lo]
    counts = cumcount[hi] - cumcount[lo]
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
