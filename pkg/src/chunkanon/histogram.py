"""Equivalence-class histograms: the sufficient statistic carried across chunks.

A histogram at node ``N`` maps each equivalence-class key (one label id or
bin index per QID) to its record count, plus a separate count of records
that could not be placed in any class (missing or out-of-domain QIDs).
Keys are kept as a lexicographically sorted ``(entries, qids)`` array so
two histograms built from the same records compare equal regardless of
how those records were chunked.
"""

from __future__ import annotations

import csv
import weakref
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .chunks import parse_units, require_columns
from .encoding import Codebook
from .errors import BudgetExceeded, NonComparableNodes
from .hierarchy import bin_indices, bins_at_level, category_ids, category_labels, category_lift, lift_bins
from .schema import AttributeKind, DatasetSchema, Node, node_leq

COUNT_BYTES = 4
# Two histograms share half of a chunk's footprint: S/4 bytes each, 4 bytes per bin.
BUDGET_DIVISOR = 16


def n_ram(n: int, d: int) -> int:
    """Largest bin count one histogram may hold for chunks of ``n`` records of ``d`` bytes."""
    if n <= 0 or d <= 0:
        raise ValueError("n and d must be positive")
    return n * d // BUDGET_DIVISOR


def cardinalities(node: Node, schema: DatasetSchema) -> list[int]:
    out = []
    for q, level in zip(schema.qids, node):
        if q.is_numerical:
            out.append(bins_at_level(q.rules, level))
        else:
            out.append(len(category_labels(q.rules, level)))
    return out


def n_data(node: Node, schema: DatasetSchema) -> int:
    """Dense bin count implied by ``node``, plus one bin for suppressed records."""
    total = 1
    for c in cardinalities(node, schema):
        total *= c
    return total + 1


class KCheck(NamedTuple):
    passed: bool
    suppressed: int


@dataclass(frozen=True, eq=False)
class Histogram:
    node: Node
    keys: np.ndarray
    counts: np.ndarray
    suppressed: int
    total: int

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.node == other.node
            and self.suppressed == other.suppressed
            and self.total == other.total
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = object.__hash__

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(k): int(c) for k, c in zip(self.keys.tolist(), self.counts.tolist())}

    def save(self, path: str | Path, qid_names: Iterable[str]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# node={','.join(map(str, self.node))}\n")
            fh.write(f"# suppressed={self.suppressed}\n")
            fh.write(f"# total={self.total}\n")
            w = csv.writer(fh)
            w.writerow([*qid_names, "count"])
            for key, count in zip(self.keys.tolist(), self.counts.tolist()):
                w.writerow([*key, count])

    @classmethod
    def load(cls, path: str | Path) -> "Histogram":
        meta = {}
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        body = []
        for line in lines:
            if line.startswith("# "):
                name, _, value = line[2:].partition("=")
                meta[name] = value
            else:
                body.append(line)
        rows = list(csv.reader(body))[1:]
        node = tuple(int(x) for x in meta["node"].split(","))
        data = np.array([[int(x) for x in r] for r in rows], dtype=np.int64).reshape(-1, len(node) + 1)
        return cls(node, data[:, :-1], data[:, -1], int(meta["suppressed"]), int(meta["total"]))


class ResidencyTracker:
    """Counts histograms alive at once, to audit the two-histogram memory layout."""

    def __init__(self) -> None:
        self._live: weakref.WeakSet[Histogram] = weakref.WeakSet()
        self.peak_resident = 0
        self.peak_entries = 0
        self.created = 0

    def register(self, hist: Histogram) -> Histogram:
        self._live.add(hist)
        self.created += 1
        self.peak_resident = max(self.peak_resident, len(self._live))
        self.peak_entries = max(self.peak_entries, len(hist))
        return hist

    def observe_entries(self, entries: int) -> None:
        self.peak_entries = max(self.peak_entries, entries)

    @property
    def resident(self) -> int:
        return len(self._live)


class KeyCodec:
    """Turns chunk rows into class keys at one node, and packs keys into scalars."""

    def __init__(self, schema: DatasetSchema, node: Node, codebooks: Mapping[str, Codebook] | None = None):
        self.schema = schema
        self.node = tuple(node)
        self.codebooks = dict(codebooks or {})
        self.radices = cardinalities(self.node, schema)
        self._lookups: dict[str, dict[str, int]] = {}
        for q, level in zip(schema.qids, self.node):
            if q.kind is AttributeKind.CATEGORICAL_QID:
                ids = category_ids(q.rules, level)
                self._lookups[q.name] = dict(zip(q.rules.domain, ids.tolist()))
        cap = 1
        for r in self.radices:
            cap *= r
        self.packable = cap < 2**62
        strides = [1] * len(self.radices)
        for i in range(len(self.radices) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.radices[i + 1]
        self.strides = np.asarray(strides, dtype=np.int64) if self.packable else None

    def keys(self, frame: pd.DataFrame, row_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """``(keys, valid)``; rows with a missing or out-of-domain QID are invalid."""
        require_columns(frame, [q.name for q in self.schema.qids])
        n = len(frame)
        keys = np.zeros((n, len(self.node)), dtype=np.int64)
        valid = np.ones(n, dtype=bool)
        for j, (q, level) in enumerate(zip(self.schema.qids, self.node)):
            col = frame[q.name]
            if q.kind is AttributeKind.CATEGORICAL_QID:
                ids = col.astype(str).str.strip().map(self._lookups[q.name])
                ok = ids.notna().to_numpy()
                keys[ok, j] = ids[ok].to_numpy(dtype=np.int64)
                valid &= ok
                continue
            ladder = q.rules
            raw = self.schema.raw_ladders.get(q.name, ladder)
            units, present = parse_units(col, raw.unit, q.name, row_offset)
            ok = present & (units >= raw.domain_min) & (units <= raw.domain_max)
            if q.name in self.schema.raw_ladders:
                codes = np.zeros(n, dtype=np.int64)
                codes[ok] = self.codebooks[q.name].encode_array(units[ok])
                units = codes
            keys[ok, j] = bin_indices(units[ok], ladder, level)
            valid &= ok
        return keys, valid

    def pack(self, keys: np.ndarray) -> np.ndarray:
        return keys @ self.strides

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        out = np.empty((len(packed), len(self.radices)), dtype=np.int64)
        rest = packed.copy()
        for j, s in enumerate(self.strides.tolist()):
            out[:, j], rest = np.divmod(rest, s)
        return out

    def aggregate(self, keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Sum counts of equal keys; returns sorted unique keys with positive counts."""
        if len(keys) == 0:
            return np.zeros((0, len(self.radices)), dtype=np.int64), np.zeros(0, dtype=np.int64)
        if self.packable:
            packed = self.pack(keys)
            uniq, inverse = np.unique(packed, return_inverse=True)
            summed = np.zeros(len(uniq), dtype=np.int64)
            np.add.at(summed, inverse, counts)
            return self.unpack(uniq), summed
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(summed, inverse.reshape(-1), counts)
        return uniq, summed


class HistogramBuilder:
    """Adds chunks into a running histogram at a fixed node."""

    def __init__(
        self,
        schema: DatasetSchema,
        node: Node,
        codebooks: Mapping[str, Codebook] | None = None,
        budget: int | None = None,
        tracker: ResidencyTracker | None = None,
    ):
        self.codec = KeyCodec(schema, node, codebooks)
        self.budget = budget
        self.tracker = tracker
        self._keys = np.zeros((0, len(node)), dtype=np.int64)
        self._counts = np.zeros(0, dtype=np.int64)
        self.suppressed = 0
        self.total = 0

    def add(self, frame: pd.DataFrame) -> None:
        keys, valid = self.codec.keys(frame, self.total)
        self.total += len(frame)
        self.suppressed += int((~valid).sum())
        kept = keys[valid]
        self._keys, self._counts = self.codec.aggregate(
            np.concatenate([self._keys, kept]),
            np.concatenate([self._counts, np.ones(len(kept), dtype=np.int64)]),
        )
        if self.tracker is not None:
            self.tracker.observe_entries(len(self._counts))
        if self.budget is not None and len(self._counts) > self.budget:
            raise BudgetExceeded(
                f"histogram at {self.codec.node} holds {len(self._counts)} classes, budget is {self.budget}"
            )

    def result(self) -> Histogram:
        hist = Histogram(self.codec.node, self._keys, self._counts, self.suppressed, self.total)
        if self.tracker is not None:
            self.tracker.register(hist)
        return hist


def build_histogram(
    chunk_source: Iterable[pd.DataFrame],
    node: Node,
    schema: DatasetSchema,
    codebooks: Mapping[str, Codebook] | None = None,
    budget: int | None = None,
    tracker: ResidencyTracker | None = None,
) -> Histogram:
    builder = HistogramBuilder(schema, node, codebooks, budget, tracker)
    for frame in chunk_source:
        builder.add(frame)
    return builder.result()


def merge_to(
    hist: Histogram,
    target: Node,
    schema: DatasetSchema,
    tracker: ResidencyTracker | None = None,
) -> Histogram:
    """Coarsen ``hist`` to ``target`` by merging bins; ``hist`` itself is left untouched."""
    target = tuple(target)
    if not node_leq(hist.node, target):
        raise NonComparableNodes(f"cannot merge {hist.node} into {target}: not a generalisation")
    if target == hist.node:
        return hist
    lifted = np.empty_like(hist.keys)
    for j, (q, a, b) in enumerate(zip(schema.qids, hist.node, target)):
        col = hist.keys[:, j]
        if q.is_numerical:
            lifted[:, j] = lift_bins(col, q.rules, a, b)
        else:
            lifted[:, j] = category_lift(q.rules, a, b)[col] if len(col) else col
    keys, counts = KeyCodec(schema, target).aggregate(lifted, hist.counts)
    out = Histogram(target, keys, counts, hist.suppressed, hist.total)
    if tracker is not None:
        tracker.register(out)
    return out


def is_k_anonymous(hist: Histogram, k: int, suppression_limit: float) -> KCheck:
    if k < 2:
        raise ValueError("k must be at least 2")
    if not 0.0 <= suppression_limit <= 1.0:
        raise ValueError("suppression_limit must lie in [0, 1]")
    suppressed = hist.suppressed + int(hist.counts[hist.counts < k].sum())
    return KCheck(suppressed <= suppression_limit * hist.total, suppressed)
