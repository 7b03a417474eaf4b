"""Probabilistic context-free grammars and the boundary-masked word stream.

Grammars have word classes as their terminals: a class ``N`` of size 5
rewrites uniformly to one of the symbolic terminals ``n_1 .. n_5``.  A
:class:`StreamCursor` concatenates sampled sentences into an unbounded
stream whose sentence boundaries are hidden from the learner but retained
(in a sliding window) as ground truth for the reward oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

PROB_TOL = 1e-9


class GrammarError(ValueError):
    """Raised when a grammar definition violates a structural invariant."""


class Word(NamedTuple):
    class_name: str
    index: int      # 1-based terminal index within the class
    position: int   # absolute stream position; -1 until emitted


@dataclass(frozen=True)
class WordClass:
    name: str
    size: int


class ProductionRule(NamedTuple):
    lhs: str
    rhs: tuple[str, ...]
    probability: float


@dataclass
class Pcfg:
    """A probabilistic context-free grammar with word-class terminals."""

    nonterminals: frozenset[str]
    classes: dict[str, WordClass]
    rules: tuple[ProductionRule, ...]
    start: str
    name: str = ""
    _by_lhs: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        by_lhs: dict[str, tuple[list[ProductionRule], list[float]]] = {}
        for rule in self.rules:
            group = by_lhs.setdefault(rule.lhs, ([], []))
            group[0].append(rule)
            acc = group[1][-1] if group[1] else 0.0
            group[1].append(acc + rule.probability)
        self._by_lhs = by_lhs

    def rules_for(self, lhs: str) -> list[ProductionRule]:
        return list(self._by_lhs.get(lhs, ([], []))[0])


@dataclass
class SentenceSample:
    """One sampled sentence; word positions are assigned later, at emission."""

    words: list[Word]
    class_sequence: list[str]

    @property
    def length(self) -> int:
        return len(self.words)


def validate_pcfg(pcfg: Pcfg) -> None:
    """Check all grammar invariants, raising GrammarError at the first violation."""
    for cls in pcfg.classes.values():
        if cls.size < 1:
            raise GrammarError(f"word class '{cls.name}': size must be >= 1, got {cls.size}")
        if cls.name in pcfg.nonterminals:
            raise GrammarError(f"symbol '{cls.name}' declared as both nonterminal and word class")
    if pcfg.start not in pcfg.nonterminals:
        raise GrammarError(f"start symbol '{pcfg.start}' is not a declared nonterminal")
    for rule in pcfg.rules:
        if rule.lhs not in pcfg.nonterminals:
            raise GrammarError(f"rule lhs '{rule.lhs}' is not a declared nonterminal")
        if not rule.rhs:
            raise GrammarError(f"rule for '{rule.lhs}' has an empty right-hand side")
        for sym in rule.rhs:
            if sym not in pcfg.nonterminals and sym not in pcfg.classes:
                raise GrammarError(f"undeclared symbol '{sym}' in rule {rule.lhs} -> {' '.join(rule.rhs)}")
        if not 0.0 < rule.probability <= 1.0:
            raise GrammarError(
                f"rule {rule.lhs} -> {' '.join(rule.rhs)}: probability {rule.probability} outside (0, 1]")
    for nt in sorted(pcfg.nonterminals):
        group = pcfg._by_lhs.get(nt)
        if group is None:
            raise GrammarError(f"nonterminal '{nt}' has no production rules")
        total = group[1][-1]
        if abs(total - 1.0) > PROB_TOL:
            raise GrammarError(f"production probabilities for '{nt}' sum to {total!r}, expected 1")

    # reachability from the start symbol
    reachable = {pcfg.start}
    frontier = [pcfg.start]
    while frontier:
        sym = frontier.pop()
        for rule in pcfg._by_lhs.get(sym, ([], []))[0]:
            for s in rule.rhs:
                if s in pcfg.nonterminals and s not in reachable:
                    reachable.add(s)
                    frontier.append(s)
    for nt in sorted(pcfg.nonterminals):
        if nt not in reachable:
            raise GrammarError(f"nonterminal '{nt}' unreachable from start symbol '{pcfg.start}'")

    # every nonterminal must derive some terminal string (no non-terminating symbols)
    generating: set[str] = set()
    changed = True
    while changed:
        changed = False
        for rule in pcfg.rules:
            if rule.lhs in generating:
                continue
            if all(s in pcfg.classes or s in generating for s in rule.rhs):
                generating.add(rule.lhs)
                changed = True
    for nt in sorted(pcfg.nonterminals):
        if nt not in generating:
            raise GrammarError(f"nonterminal '{nt}' cannot derive a terminal string")


def sample_sentence(pcfg: Pcfg, rng: np.random.Generator) -> SentenceSample:
    """Sample one sentence by leftmost expansion from the start symbol."""
    by_lhs = pcfg._by_lhs
    classes = pcfg.classes
    words: list[Word] = []
    class_seq: list[str] = []
    stack = [pcfg.start]
    while stack:
        sym = stack.pop()
        cls = classes.get(sym)
        if cls is not None:
            # floor(u * size) + 1 is uniform over [1, size]
            words.append(Word(sym, int(rng.random() * cls.size) + 1, -1))
            class_seq.append(sym)
            continue
        rules, cumulative = by_lhs[sym]
        if len(rules) == 1:
            chosen = rules[0]
        else:
            u = rng.random()
            chosen = rules[-1]
            for rule, acc in zip(rules, cumulative):
                if u < acc:
                    chosen = rule
                    break
        stack.extend(reversed(chosen.rhs))
    return SentenceSample(words, class_seq)


def enumerate_structures(pcfg: Pcfg, limit: int = 100_000) -> dict[tuple[str, ...], float]:
    """All class sequences derivable from start, with their probabilities.

    Only defined for grammars with a finite structure set; recursion raises
    GrammarError.  Useful as an independent oracle for sampling tests and for
    bounding sentence lengths.
    """
    memo: dict[str, list[tuple[tuple[str, ...], float]]] = {}

    def expand(sym: str, active: frozenset[str]) -> list[tuple[tuple[str, ...], float]]:
        if sym in pcfg.classes:
            return [((sym,), 1.0)]
        if sym in active:
            raise GrammarError(f"nonterminal '{sym}' is recursive; structure set is infinite")
        if sym in memo:
            return memo[sym]
        expansions: dict[tuple[str, ...], float] = {}
        for rule in pcfg._by_lhs[sym][0]:
            partials = [((), rule.probability)]
            for s in rule.rhs:
                subs = expand(s, active | {sym})
                partials = [(seq + sub_seq, p * sub_p)
                            for seq, p in partials for sub_seq, sub_p in subs]
                if len(partials) > limit:
                    raise GrammarError(f"structure set exceeds limit of {limit}")
            for seq, p in partials:
                expansions[seq] = expansions.get(seq, 0.0) + p
        memo[sym] = list(expansions.items())
        return memo[sym]

    return dict(expand(pcfg.start, frozenset()))


def max_sentence_length(pcfg: Pcfg) -> int:
    return max(len(seq) for seq in enumerate_structures(pcfg))


class StreamCursor:
    """Emits the masked word stream one word at a time.

    Sentences are sampled lazily; ground-truth boundary flags and sentence
    lengths are retained only for a sliding window of recent positions so
    that million-trial runs stay in bounded memory.  Single-owner: each
    agent drives its own cursor.
    """

    def __init__(self, pcfg: Pcfg, rng: np.random.Generator, history: int = 10_000):
        self.pcfg = pcfg
        self.rng = rng
        self.history = history
        self.emitted = 0
        self.current_sentence_span: tuple[int, int] | None = None
        self._pending: deque[tuple[str, int]] = deque()
        self._flags: dict[int, bool] = {}
        self._sentence_length: dict[int, int] = {}
        self._last_trim = 0

    def next_word(self) -> tuple[Word, bool]:
        """Return the next stream word and its ground-truth boundary flag."""
        if not self._pending:
            self._begin_sentence()
        class_name, index = self._pending.popleft()
        pos = self.emitted
        self.emitted = pos + 1
        return Word(class_name, index, pos), self._flags[pos]

    def skip_to_next_sentence(self) -> Word:
        """Discard the rest of the current sentence; return the next sentence's first word."""
        self.emitted += len(self._pending)
        self._pending.clear()
        word, _ = self.next_word()
        return word

    def boundary_before(self, position: int) -> bool:
        """Ground-truth flag: does a sentence boundary precede this position?"""
        flag = self._flags.get(position)
        if flag is None:
            raise LookupError(
                f"position {position} outside the retained boundary window "
                f"(history={self.history}); enlarge the window")
        return flag

    def sentence_length_at(self, position: int) -> int | None:
        """Length of the true sentence starting at `position`, or None if not a start."""
        return self._sentence_length.get(position)

    def _begin_sentence(self) -> None:
        sample = sample_sentence(self.pcfg, self.rng)
        start = self.emitted
        flags = self._flags
        flags[start] = True
        for p in range(start + 1, start + sample.length):
            flags[p] = False
        self._sentence_length[start] = sample.length
        self.current_sentence_span = (start, sample.length)
        self._pending.extend((w.class_name, w.index) for w in sample.words)
        if start - self._last_trim > 4096:
            self._trim(start)

    def _trim(self, now: int) -> None:
        floor = now - self.history
        self._last_trim = now
        if floor <= 0:
            return
        for p in [p for p in self._flags if p < floor]:
            del self._flags[p]
        for p in [p for p in self._sentence_length if p < floor]:
            del self._sentence_length[p]


def _make_pcfg(name: str, classes: list[tuple[str, int]],
               rules: list[tuple[str, tuple[str, ...], float]], start: str) -> Pcfg:
    pcfg = Pcfg(
        nonterminals=frozenset(lhs for lhs, _, _ in rules),
        classes={cname: WordClass(cname, size) for cname, size in classes},
        rules=tuple(ProductionRule(lhs, rhs, p) for lhs, rhs, p in rules),
        start=start,
        name=name,
    )
    validate_pcfg(pcfg)
    return pcfg


def builtin_nvn(kn: int = 5, kv: int = 5) -> Pcfg:
    """Sentences are always noun-verb-noun."""
    return _make_pcfg(
        "nvn",
        classes=[("N", kn), ("V", kv)],
        rules=[("S", ("N", "V", "N"), 1.0)],
        start="S",
    )


def builtin_md(kn: int = 5, km: int = 1, kd: int = 1) -> Pcfg:
    """Monotransitive (N MV N) and ditransitive (N DV N N) sentences, 50/50."""
    return _make_pcfg(
        "md",
        classes=[("N", kn), ("MV", km), ("DV", kd)],
        rules=[
            ("S", ("N", "MV", "N"), 0.5),
            ("S", ("N", "DV", "N", "N"), 0.5),
        ],
        start="S",
    )


def builtin_relclause(kn: int = 5, km: int = 1, kd: int = 1, kr: int = 1) -> Pcfg:
    """The md language extended with optional relative clauses on the verb phrase."""
    return _make_pcfg(
        "relclause",
        classes=[("N", kn), ("MV", km), ("DV", kd), ("R", kr)],
        rules=[
            ("S", ("N", "VP"), 1.0),
            ("VP", ("MV", "N"), 0.3),
            ("VP", ("DV", "N", "N"), 0.3),
            ("VP", ("MV", "N", "Rel"), 0.2),
            ("VP", ("DV", "N", "N", "Rel"), 0.2),
            ("Rel", ("R", "MV", "N"), 1.0),
        ],
        start="S",
    )


def builtin_complexnp(kn: int = 1, km: int = 1, kv: int = 1,
                      ka: int = 1, kd: int = 1, kp: int = 1) -> Pcfg:
    """Noun phrases with determiners, adjectives, and prepositional phrases."""
    return _make_pcfg(
        "complexnp",
        classes=[("N", kn), ("MV", km), ("DV", kv), ("A", ka), ("D", kd), ("P", kp)],
        rules=[
            ("S", ("NP", "VP"), 1.0),
            ("NP", ("N",), 0.25),
            ("NP", ("D", "N"), 0.25),
            ("NP", ("D", "A", "N"), 0.1875),
            ("NP", ("D", "A", "A", "N"), 0.0625),
            ("NP", ("N", "P", "N"), 0.25),
            ("VP", ("MV", "NP"), 0.5),
            ("VP", ("DV", "NP", "NP"), 0.5),
        ],
        start="S",
    )


BUILTIN_GRAMMARS: dict[str, tuple] = {
    "nvn": (builtin_nvn, ("N", "V")),
    "md": (builtin_md, ("N", "MV", "DV")),
    "relclause": (builtin_relclause, ("N", "MV", "DV", "R")),
    "complexnp": (builtin_complexnp, ("N", "MV", "DV", "A", "D", "P")),
}


def builtin_grammar(name: str, sizes: dict[str, int] | None = None) -> Pcfg:
    """Instantiate a built-in grammar by name, overriding class sizes by class name."""
    try:
        factory, class_order = BUILTIN_GRAMMARS[name]
    except KeyError:
        raise GrammarError(f"unknown grammar '{name}'; available: {', '.join(sorted(BUILTIN_GRAMMARS))}")
    sizes = dict(sizes or {})
    unknown = set(sizes) - set(class_order)
    if unknown:
        raise GrammarError(f"grammar '{name}' has no class named '{sorted(unknown)[0]}'")
    defaults = factory()
    args = [sizes.get(cname, defaults.classes[cname].size) for cname in class_order]
    return factory(*args)


def load_grammar_file(path: str) -> Pcfg:
    """Parse a grammar definition file.

    Format, one statement per line ('#' starts a comment)::

        start = S
        class N 5
        class V 5
        rule S -> N V N : 1.0
    """
    start = None
    classes: list[tuple[str, int]] = []
    rules: list[tuple[str, tuple[str, ...], float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                if line.startswith("start"):
                    _, _, value = line.partition("=")
                    start = value.strip()
                    if not start:
                        raise ValueError("missing start symbol")
                elif line.startswith("class"):
                    _, cname, size = line.split()
                    classes.append((cname, int(size)))
                elif line.startswith("rule"):
                    body = line[len("rule"):].strip()
                    head, _, tail = body.partition("->")
                    rhs_text, _, prob_text = tail.partition(":")
                    rhs = tuple(rhs_text.split())
                    if not rhs:
                        raise ValueError("empty right-hand side")
                    prob = float(prob_text) if prob_text.strip() else 1.0
                    rules.append((head.strip(), rhs, prob))
                else:
                    raise ValueError(f"unrecognized statement {line.split()[0]!r}")
            except (ValueError, IndexError) as exc:
                raise GrammarError(f"{path}:{lineno}: {exc}") from None
    if start is None:
        raise GrammarError(f"{path}: no 'start = <symbol>' statement")
    if not rules:
        raise GrammarError(f"{path}: no production rules")
    return _make_pcfg(path, classes, rules, start)
