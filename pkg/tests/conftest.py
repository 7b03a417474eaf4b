"""Shared helpers: word factories and exhaustive binary-tree-shape enumeration."""

import itertools

import pytest

from chunkseg import State, Word, leaf, node


def make_word(class_name="N", index=1, position=0):
    return Word(class_name, index, position)


def leaf_at(position, class_name="N", index=1):
    return leaf(Word(class_name, index, position))


def build_chunk(spec, words, _pos=None):
    """Build a chunk from a nested shape spec and a flat (class, index) word list.

    `spec` is an int (number of leaves in a left-unspecified template) or a
    nested pair structure whose leaf count matches len(words); positions are
    assigned in order starting at 0.
    """
    counter = itertools.count() if _pos is None else _pos
    word_iter = iter(words) if isinstance(words, list) else words

    def build(shape):
        if shape == 1 or shape is None:
            class_name, index = next(word_iter)
            return leaf(Word(class_name, index, next(counter)))
        left_shape, right_shape = shape
        left = build(left_shape)
        right = build(right_shape)
        return node(left, right)

    return build(spec)


def all_tree_shapes(n_leaves):
    """All binary tree shapes over n ordered leaves (None marks a leaf)."""
    if n_leaves == 1:
        return [None]
    shapes = []
    for left_n in range(1, n_leaves):
        for left in all_tree_shapes(left_n):
            for right in all_tree_shapes(n_leaves - left_n):
                shapes.append((left, right))
    return shapes


def comb_chunk(start, end, class_name="N"):
    """Left-combed chunk spanning stream positions [start, end]."""
    chunk = leaf_at(start, class_name)
    for pos in range(start + 1, end + 1):
        chunk = node(chunk, leaf_at(pos, class_name))
    return chunk


def default_words(n, classes=("N", "V")):
    """n (class, index) pairs cycling through word classes with distinct indices."""
    return [(classes[i % len(classes)], i + 1) for i in range(n)]


def state_from_shape(shape, words=None, second=("N", 9)):
    """A State whose first chunk has the given shape; positions start at 0."""
    n = _count_leaves(shape)
    if words is None:
        words = default_words(n)
    counter = itertools.count()
    first = build_chunk(shape, iter(words), _pos=counter)
    second_leaf = leaf(Word(second[0], second[1], next(counter)))
    return State(first, second_leaf)


def _count_leaves(shape):
    if shape is None or shape == 1:
        return 1
    return _count_leaves(shape[0]) + _count_leaves(shape[1])


@pytest.fixture
def nvn():
    from chunkseg import builtin_nvn

    return builtin_nvn(5, 5)
