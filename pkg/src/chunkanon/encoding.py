"""Dense, order-preserving re-encoding of sparse numerical QIDs.

A sparse QID (PIN codes, say: a 2000-wide band with only ~1300 values in
use) wastes bins; ranking the observed values gives a gap-free code
domain ``0..n-1`` that the ladders then bin instead. The codebook is kept
so released bins can be mapped back to raw-value ranges.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chunks import parse_units, require_columns
from .errors import CodebookMiss, EmptyDomain, TooManyUniques
from .schema import NumericalLadder, QidSpec

DEFAULT_SPARSITY_THRESHOLD = 10.0
MAX_UNIQUES = 10_000_000


@dataclass(frozen=True, eq=False)
class Codebook:
    """``values[c]`` is the raw integer-unit value with code ``c``; values are strictly increasing."""

    qid_name: str
    values: np.ndarray
    forward: dict[int, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return self.qid_name == other.qid_name and np.array_equal(self.values, other.values)

    @property
    def inverse(self) -> np.ndarray:
        return self.values

    def encode_value(self, v: int) -> int:
        try:
            return self.forward[int(v)]
        except KeyError:
            raise CodebookMiss(f"{self.qid_name}: value {v} was not seen while building the codebook") from None

    def decode_value(self, code: int) -> int:
        if not 0 <= code < len(self.values):
            raise CodebookMiss(f"{self.qid_name}: code {code} outside 0..{len(self.values) - 1}")
        return int(self.values[code])

    def encode_array(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        codes = np.searchsorted(self.values, values)
        hit = codes < len(self.values)
        hit[hit] = self.values[codes[hit]] == values[hit]
        if not hit.all():
            miss = values[~hit][0]
            raise CodebookMiss(f"{self.qid_name}: value {miss} was not seen while building the codebook")
        return codes.astype(np.int64)

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["raw", "code"])
            for code, raw in enumerate(self.values.tolist()):
                w.writerow([raw, code])

    @classmethod
    def load(cls, path: str | Path, qid_name: str) -> "Codebook":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["code"]))
        if [int(r["code"]) for r in rows] != list(range(len(rows))):
            raise CodebookMiss(f"{path}: codes are not a dense 0..n-1 range")
        return build_codebook([int(r["raw"]) for r in rows], qid_name)


class UniqueCollector:
    """Accumulates the in-domain distinct values of one numerical QID, chunk by chunk."""

    def __init__(self, qid: QidSpec, cap: int = MAX_UNIQUES):
        self.qid = qid
        self.cap = cap
        self._parts: list[np.ndarray] = []
        self._seen = np.empty(0, dtype=np.int64)
        self.rows = 0

    def add(self, frame) -> None:
        ladder: NumericalLadder = self.qid.rules
        require_columns(frame, [self.qid.name])
        units, present = parse_units(frame[self.qid.name], ladder.unit, self.qid.name, self.rows)
        self.rows += len(frame)
        ok = present & (units >= ladder.domain_min) & (units <= ladder.domain_max)
        self._seen = np.union1d(self._seen, units[ok])
        if len(self._seen) > self.cap:
            raise TooManyUniques(f"{self.qid.name}: more than {self.cap} distinct values")

    def result(self) -> np.ndarray:
        return self._seen


def collect_uniques(chunk_source: Iterable, qid: QidSpec, cap: int = MAX_UNIQUES) -> np.ndarray:
    """Sorted distinct in-domain integer-unit values of ``qid`` over every chunk (one pass)."""
    collector = UniqueCollector(qid, cap)
    for frame in chunk_source:
        collector.add(frame)
    return collector.result()


def build_codebook(uniques: Iterable[int], qid_name: str = "") -> Codebook:
    values = np.unique(np.asarray(list(uniques) if not isinstance(uniques, np.ndarray) else uniques, dtype=np.int64))
    if len(values) == 0:
        raise EmptyDomain(f"{qid_name or 'QID'}: no values to encode")
    values.setflags(write=False)
    return Codebook(qid_name, values, {int(v): i for i, v in enumerate(values.tolist())})


def should_encode(
    ladder: NumericalLadder,
    unique_count: int,
    sparsity_threshold: float = DEFAULT_SPARSITY_THRESHOLD,
    forced: bool = False,
) -> bool:
    if forced:
        return True
    if unique_count < 1:
        return False
    return ladder.span / unique_count > sparsity_threshold
