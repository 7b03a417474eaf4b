"""Binary chunk trees over stream words: right-spine actions, keys, patterns.

A chunk is an immutable binary tree whose leaves are contiguous stream
words.  New material attaches only along the right spine, so every chunk
caches its spine, its right-depth (the number of attachment points), and
its two canonical serializations: `key` keeps word identities, `pattern`
keeps only word classes.
"""

from __future__ import annotations

from .grammar import GrammarError, Pcfg, Word


class Chunk:
    """Immutable binary tree over a contiguous run of stream words.

    Built via :func:`leaf` and :func:`node`; all derived attributes are
    computed once at construction.  `spine[k]` is the subtree reached by
    k right-child steps from the root, so `len(spine) == depth`.
    """

    __slots__ = ("left", "right", "word", "start", "end", "n_leaves",
                 "depth", "spine", "key", "pattern")

    left: "Chunk | None"
    right: "Chunk | None"
    word: Word | None

    def is_leaf(self) -> bool:
        return self.word is not None

    def words(self) -> list[Word]:
        """In-order leaf words."""
        if self.word is not None:
            return [self.word]
        return self.left.words() + self.right.words()

    def __repr__(self) -> str:
        return f"Chunk({self.key} @ {self.start}..{self.end})"


def leaf(word: Word) -> Chunk:
    c = Chunk.__new__(Chunk)
    c.left = None
    c.right = None
    c.word = word
    c.start = word.position
    c.end = word.position
    c.n_leaves = 1
    c.depth = 1
    c.spine = (c,)
    c.key = f"{word.class_name}#{word.index}"
    c.pattern = word.class_name
    return c


def node(left: Chunk, right: Chunk) -> Chunk:
    if right.start != left.end + 1:
        raise ValueError(
            f"chunks are not adjacent: left ends at {left.end}, right starts at {right.start}")
    c = Chunk.__new__(Chunk)
    c.left = left
    c.right = right
    c.word = None
    c.start = left.start
    c.end = right.end
    c.n_leaves = left.n_leaves + right.n_leaves
    c.depth = right.depth + 1
    c.spine = (c,) + right.spine
    c.key = "(" + left.key + " " + right.key + ")"
    c.pattern = "(" + left.pattern + " " + right.pattern + ")"
    return c


class State:
    """Working-memory pair: a first chunk plus the most recently read word."""

    __slots__ = ("first", "second")

    def __init__(self, first: Chunk, second: Chunk):
        if second.word is None:
            raise ValueError("second element of a state must be a single word")
        if second.start != first.end + 1:
            raise ValueError(
                f"second element at {second.start} does not follow first ending at {first.end}")
        self.first = first
        self.second = second

    @property
    def depth(self) -> int:
        """Right-depth: the number of chunking actions available; total actions = depth + 1."""
        return self.first.depth

    @property
    def key(self) -> str:
        return self.first.key + "|" + self.second.key

    def __repr__(self) -> str:
        return f"State({self.first.key}, {self.second.key})"


def right_depth(chunk: Chunk) -> int:
    """Number of attachment points for a new right sibling along the right spine."""
    return chunk.depth


def substate(state: State, k: int) -> State:
    """The state rooted k right-steps below the first chunk's root (k=0: the state itself)."""
    if not 0 <= k <= state.first.depth - 1:
        raise ValueError(f"sub-state index {k} out of range for right-depth {state.first.depth}")
    if k == 0:
        return state
    return State(state.first.spine[k], state.second)


def apply_chunk_action(state: State, i: int) -> Chunk:
    """Attach the second element as a right sibling at right-spine depth i.

    i = 0 chunks at the root; i = depth-1 groups the last two stimuli.
    The boundary action (i = depth) is not a chunking action.
    """
    first = state.first
    d = first.depth
    if not 0 <= i < d:
        raise ValueError(f"chunk action {i} out of range for right-depth {d}")
    spine = first.spine
    grown = node(spine[i], state.second)
    for k in range(i - 1, -1, -1):
        grown = node(spine[k].left, grown)
    return grown


def canonical_key(chunk: Chunk) -> str:
    """Position-free serialization keeping word identities, e.g. ``((N#1 V#2) N#4)``."""
    return chunk.key


def structure_pattern(chunk: Chunk) -> str:
    """Position-free serialization keeping only word classes, e.g. ``((N V) N)``."""
    return chunk.pattern


def parse_pattern(text: str):
    """Parse a canonical key/pattern string into nested tuples of leaf tokens."""
    obj, pos = _parse(text, 0)
    if pos != len(text):
        raise ValueError(f"trailing characters in pattern {text!r}")
    return obj


def _parse(text: str, pos: int):
    if pos >= len(text):
        raise ValueError(f"unexpected end of pattern {text!r}")
    if text[pos] == "(":
        left, pos = _parse(text, pos + 1)
        if pos >= len(text) or text[pos] != " ":
            raise ValueError(f"expected space at offset {pos} in pattern {text!r}")
        right, pos = _parse(text, pos + 1)
        if pos >= len(text) or text[pos] != ")":
            raise ValueError(f"expected ')' at offset {pos} in pattern {text!r}")
        return (left, right), pos + 1
    end = pos
    while end < len(text) and text[end] not in " ()":
        end += 1
    if end == pos:
        raise ValueError(f"empty token at offset {pos} in pattern {text!r}")
    return text[pos:end], end


def pattern_leaves(text: str) -> list[str]:
    """In-order leaf tokens of a canonical key or pattern string."""
    leaves: list[str] = []

    def walk(obj):
        if isinstance(obj, str):
            leaves.append(obj)
        else:
            walk(obj[0])
            walk(obj[1])

    walk(parse_pattern(text))
    return leaves


def pattern_right_depth(text: str) -> int:
    """Right-depth of the tree a canonical key or pattern string denotes."""
    obj = parse_pattern(text)
    depth = 1
    while not isinstance(obj, str):
        depth += 1
        obj = obj[1]
    return depth


def pattern_instance_total(pattern: str, pcfg: Pcfg) -> int:
    """Number of distinct lexical instantiations of a class pattern.

    The product of class sizes over the pattern's leaves; multiply the
    totals of a state's two elements to bound its instance count.
    """
    total = 1
    for token in pattern_leaves(pattern):
        cls = token.split("#", 1)[0]
        if cls not in pcfg.classes:
            raise GrammarError(f"unknown word class '{cls}' in pattern {pattern!r}")
        total *= pcfg.classes[cls].size
    return total
