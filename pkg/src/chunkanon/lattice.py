"""Generalisation lattice and OLA-style search with predictive tagging.

Nodes are level vectors between ``root`` and ``top``; the lattice is never
built as a graph. Tags live in a dense ``int8`` array indexed by
``node - root``, which makes the upward (Pass) and downward (Fail)
closures plain slice assignments.
"""

from __future__ import annotations

import enum
import itertools
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import NoFeasibleNode, PredicateError
from .schema import Node


class Tag(enum.IntEnum):
    UNTAGGED = 0
    PASS = 1
    FAIL = 2


@dataclass(frozen=True)
class Lattice:
    root: Node
    top: Node
    # QID positions, most important first; drives the middle-node rule and tie-breaks.
    rank_order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.root) != len(self.top):
            raise ValueError("root and top have different lengths")
        if any(r > t for r, t in zip(self.root, self.top)):
            raise ValueError(f"root {self.root} is not below top {self.top}")
        if self.rank_order is None:
            object.__setattr__(self, "rank_order", tuple(range(len(self.root))))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(t - r + 1 for r, t in zip(self.root, self.top))

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def max_height(self) -> int:
        return sum(self.shape) - len(self.shape)

    def contains(self, node: Sequence[int]) -> bool:
        return len(node) == len(self.root) and all(r <= x <= t for r, x, t in zip(self.root, node, self.top))

    def _check(self, node: Sequence[int]) -> None:
        if not self.contains(node):
            raise ValueError(f"node {tuple(node)} is outside the lattice {self.root}..{self.top}")

    def height(self, node: Sequence[int]) -> int:
        self._check(node)
        return sum(x - r for x, r in zip(node, self.root))

    def successors(self, node: Sequence[int]) -> list[Node]:
        self._check(node)
        out = []
        for i, (x, t) in enumerate(zip(node, self.top)):
            if x < t:
                out.append(tuple(node[:i]) + (x + 1,) + tuple(node[i + 1 :]))
        return out

    def predecessors(self, node: Sequence[int]) -> list[Node]:
        self._check(node)
        out = []
        for i, (x, r) in enumerate(zip(node, self.root)):
            if x > r:
                out.append(tuple(node[:i]) + (x - 1,) + tuple(node[i + 1 :]))
        return out

    def nodes(self) -> Iterator[Node]:
        return itertools.product(*(range(r, t + 1) for r, t in zip(self.root, self.top)))

    def nodes_at_height(self, h: int) -> list[Node]:
        return [n for n in self.nodes() if self.height(n) == h]

    def rank_key(self, node: Sequence[int]) -> tuple[int, ...]:
        return tuple(node[i] for i in self.rank_order)

    def middle_node(self) -> Node:
        level = self.nodes_at_height(self.max_height // 2)
        return _median(level, self.rank_key)


def _median(nodes: Sequence[Node], key: Callable[[Node], Any]) -> Node:
    ordered = sorted(nodes, key=key)
    return ordered[len(ordered) // 2]


class TagState:
    """Pass/Fail tags for every node plus the record of actual evaluations."""

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self.tags = np.zeros(lattice.shape, dtype=np.int8)
        self._root = np.asarray(lattice.root)
        self.evaluated: dict[Node, bool] = {}

    @property
    def evaluated_count(self) -> int:
        return len(self.evaluated)

    def rel(self, node: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(x) for x in np.asarray(node) - self._root)

    def absolute(self, rel: Sequence[int]) -> Node:
        return tuple(int(x) for x in np.asarray(rel) + self._root)

    def tag(self, node: Sequence[int]) -> Tag:
        self.lattice._check(node)
        return Tag(int(self.tags[self.rel(node)]))

    def mark(self, node: Sequence[int], passed: bool) -> None:
        rel = self.rel(node)
        if passed:
            region = self.tags[tuple(slice(x, None) for x in rel)]
            region[region == Tag.UNTAGGED] = Tag.PASS
        else:
            region = self.tags[tuple(slice(0, x + 1) for x in rel)]
            region[region == Tag.UNTAGGED] = Tag.FAIL
        # An evaluated node keeps its own verdict even if a propagation disagreed.
        self.tags[rel] = Tag.PASS if passed else Tag.FAIL

    @property
    def complete(self) -> bool:
        return not (self.tags == Tag.UNTAGGED).any()

    def passing(self) -> list[Node]:
        return [self.absolute(r) for r in np.argwhere(self.tags == Tag.PASS)]

    def minimal_passing(self) -> list[Node]:
        """Passing nodes none of whose direct specialisations pass."""
        passing = self.tags == Tag.PASS
        minimal = passing.copy()
        for axis in range(passing.ndim):
            below = np.zeros_like(passing)
            src = [slice(None)] * passing.ndim
            dst = [slice(None)] * passing.ndim
            src[axis] = slice(0, -1)
            dst[axis] = slice(1, None)
            below[tuple(dst)] = passing[tuple(src)]
            minimal &= ~below
        return sorted(self.absolute(r) for r in np.argwhere(minimal))

    def items(self) -> Iterator[tuple[Node, Tag]]:
        for node in self.lattice.nodes():
            yield node, Tag(int(self.tags[self.rel(node)]))


Predicate = Callable[[Node], bool]


def ola_search(lattice: Lattice, predicate: Predicate) -> tuple[list[Node], TagState]:
    """Tag every node of ``lattice`` and return the k-minimal (minimal passing) nodes.

    ``predicate`` must be monotone: if it passes at a node it passes at
    every generalisation of that node. Each sub-lattice is split at the
    median node of its middle level; the verdict there is propagated
    (Pass upward, Fail downward) and the search recurses below a passing
    node or above a failing one.
    """
    state = TagState(lattice)
    rank = np.asarray(lattice.rank_order)

    def evaluate(rel: tuple[int, ...]) -> None:
        node = state.absolute(rel)
        try:
            verdict = bool(predicate(node))
        except Exception as exc:  # noqa: BLE001 - re-raised with the node attached
            raise PredicateError(node, exc) from exc
        state.evaluated[node] = verdict
        state.mark(node, verdict)

    def search(lo: tuple[int, ...], hi: tuple[int, ...]) -> None:
        box = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        if not (state.tags[box] == Tag.UNTAGGED).any():
            return
        h_lo, h_hi = sum(lo), sum(hi)
        if h_hi - h_lo <= 1:
            for rel in (lo, hi):
                if state.tags[rel] == Tag.UNTAGGED:
                    evaluate(rel)
            return
        mid = (h_hi - h_lo) // 2
        heights = sum(np.ix_(*(np.arange(b - a + 1) for a, b in zip(lo, hi))))
        level = np.argwhere(heights == mid) + np.asarray(lo)
        todo = np.ones(len(level), dtype=bool)
        while todo.any():
            pending = np.flatnonzero(todo)
            untagged = pending[state.tags[tuple(level[pending].T)] == Tag.UNTAGGED]
            if len(untagged) == 0 and not (state.tags[box] == Tag.UNTAGGED).any():
                return
            pool = untagged if len(untagged) else pending
            keys = level[pool][:, rank]
            order = np.lexsort(keys.T[::-1])
            pick = pool[order[len(order) // 2]]
            todo[pick] = False
            rel = tuple(int(x) for x in level[pick])
            if state.tags[rel] == Tag.UNTAGGED:
                evaluate(rel)
            if state.tags[rel] == Tag.PASS:
                search(lo, rel)
            else:
                search(rel, hi)

    zero = (0,) * len(lattice.shape)
    search(zero, tuple(s - 1 for s in lattice.shape))
    return state.minimal_passing(), state


def brute_force_minimal(lattice: Lattice, predicate: Predicate) -> list[Node]:
    """Reference: evaluate every node and keep the passing ones with no passing predecessor."""
    verdict = {n: bool(predicate(n)) for n in lattice.nodes()}
    return sorted(n for n, ok in verdict.items() if ok and not any(verdict[p] for p in lattice.predecessors(n)))


def select_best(
    candidates: Iterable[Node],
    scorer: Callable[[Node], Any],
    better: str = "min",
    rank_order: Sequence[int] | None = None,
) -> Node:
    """Best-scoring candidate; ties go to the node finest in the most important QID, then the next."""
    candidates = list(candidates)
    if not candidates:
        raise NoFeasibleNode("no candidate node satisfies the constraints")
    if better not in ("min", "max"):
        raise ValueError(f"better must be 'min' or 'max', not {better!r}")
    order = tuple(rank_order) if rank_order is not None else tuple(range(len(candidates[0])))
    sign = 1 if better == "min" else -1

    def key(node: Node) -> tuple:
        return (sign * scorer(node), tuple(node[i] for i in order))

    return min(candidates, key=key)


def dump_lines(state: TagState, scores: dict[Node, Any] | None = None) -> list[str]:
    """One line per node: ``levels tag [score]``, in lattice order."""
    scores = scores or {}
    lines = []
    for node, tag in state.items():
        line = f"{','.join(map(str, node))}\t{tag.name}"
        if node in state.evaluated:
            line += "\tevaluated"
        if node in scores:
            line += f"\t{scores[node]}"
        lines.append(line)
    return lines
