"""Applying generalisation rules: labels for categorical QIDs, bins for numerical ones.

Bins at width ``W`` are aligned to the ladder's anchor: value ``v`` falls
in ``[anchor + floor((v - anchor) / W) * W, ... + W - 1]``. Indices are
counted from the bin holding ``domain_min``, so index 0 is always the
first (possibly truncated) bin. The final level is one bin covering the
whole domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import LevelOutOfRange, ValueNotInDomain
from .schema import SUPPRESSED_LABEL, CategoricalHierarchy, NumericalLadder


@dataclass(frozen=True)
class Bin:
    lo: int
    hi: int
    display: str


def _check_level(level: int, num_levels: int) -> None:
    if not 1 <= level <= num_levels:
        raise LevelOutOfRange(f"level {level} outside 1..{num_levels}")


def generalise_categorical(value: str, h: CategoricalHierarchy, level: int) -> str:
    _check_level(level, h.num_levels)
    try:
        i = _domain_index(h)[value]
    except KeyError:
        raise ValueNotInDomain(f"{value!r} is not in the hierarchy domain") from None
    return h.table[level - 1][i]


@lru_cache(maxsize=None)
def _domain_index(h: CategoricalHierarchy) -> dict[str, int]:
    return {v: i for i, v in enumerate(h.domain)}


@lru_cache(maxsize=None)
def category_labels(h: CategoricalHierarchy, level: int) -> tuple[str, ...]:
    """Distinct labels at ``level`` in order of first appearance over the domain."""
    return tuple(dict.fromkeys(h.table[level - 1]))


@lru_cache(maxsize=None)
def category_ids(h: CategoricalHierarchy, level: int) -> np.ndarray:
    """``ids[i]`` is the dense label id of ``domain[i]`` at ``level``."""
    index = {label: j for j, label in enumerate(category_labels(h, level))}
    ids = np.array([index[label] for label in h.table[level - 1]], dtype=np.int64)
    ids.setflags(write=False)
    return ids


@lru_cache(maxsize=None)
def category_lift(h: CategoricalHierarchy, from_level: int, to_level: int) -> np.ndarray:
    """Map label ids at ``from_level`` to label ids at the coarser ``to_level``."""
    src, dst = category_ids(h, from_level), category_ids(h, to_level)
    lift = np.empty(len(category_labels(h, from_level)), dtype=np.int64)
    lift[src] = dst
    lift.setflags(write=False)
    return lift


def _width(ladder: NumericalLadder, level: int) -> int:
    return ladder.widths[level - 1]


def _base(ladder: NumericalLadder, level: int) -> int:
    return (ladder.domain_min - ladder.anchor) // _width(ladder, level)


def bin_index(value: int, ladder: NumericalLadder, level: int) -> int:
    _check_level(level, ladder.num_levels)
    if not ladder.domain_min <= value <= ladder.domain_max:
        raise ValueNotInDomain(f"{value} outside [{ladder.domain_min}, {ladder.domain_max}]")
    if ladder.is_final(level):
        return 0
    return (value - ladder.anchor) // _width(ladder, level) - _base(ladder, level)


def bin_indices(values: np.ndarray, ladder: NumericalLadder, level: int) -> np.ndarray:
    """Vectorised :func:`bin_index`; callers guarantee values are in the domain."""
    values = np.asarray(values, dtype=np.int64)
    if ladder.is_final(level):
        return np.zeros(len(values), dtype=np.int64)
    return (values - ladder.anchor) // _width(ladder, level) - _base(ladder, level)


def bins_at_level(ladder: NumericalLadder, level: int) -> int:
    _check_level(level, ladder.num_levels)
    if ladder.is_final(level):
        return 1
    w = _width(ladder, level)
    return (ladder.domain_max - ladder.anchor) // w - (ladder.domain_min - ladder.anchor) // w + 1


def bin_bounds(index: int, ladder: NumericalLadder, level: int) -> tuple[int, int]:
    """Closed integer-unit range of bin ``index``, clamped to the domain."""
    if ladder.is_final(level):
        return ladder.domain_min, ladder.domain_max
    w = _width(ladder, level)
    lo = ladder.anchor + (index + _base(ladder, level)) * w
    return max(lo, ladder.domain_min), min(lo + w - 1, ladder.domain_max)


def lift_bins(indices: np.ndarray, ladder: NumericalLadder, from_level: int, to_level: int) -> np.ndarray:
    """Re-index level-``from_level`` bins at the coarser ``to_level``.

    Exact because every non-final width divides the next one, so a fine bin
    never straddles a coarse boundary.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if from_level == to_level:
        return indices
    if ladder.is_final(to_level):
        return np.zeros(len(indices), dtype=np.int64)
    w_from, w_to = _width(ladder, from_level), _width(ladder, to_level)
    start = (indices + _base(ladder, from_level)) * w_from
    return start // w_to - _base(ladder, to_level)


def _fmt_units(units: int, unit: float) -> str:
    if float(unit).is_integer():
        return str(units * int(unit))
    decimals = max(0, -int(np.floor(np.log10(unit))))
    return f"{round(units * unit, decimals):g}"


def render_range(lo: int, hi: int, unit: float) -> str:
    """Integer units render closed ``[a - b]``; fractional units half-open ``[a - b)``."""
    if float(unit).is_integer():
        return f"[{_fmt_units(lo, unit)} - {_fmt_units(hi, unit)}]"
    return f"[{_fmt_units(lo, unit)} - {_fmt_units(hi + 1, unit)})"


def generalise_numerical(value: int, ladder: NumericalLadder, level: int) -> Bin:
    index = bin_index(value, ladder, level)
    lo, hi = bin_bounds(index, ladder, level)
    return Bin(lo, hi, render_range(lo, hi, ladder.unit))


def to_units(raw: float, unit: float) -> int:
    return int(round(raw / unit))


__all__ = [
    "Bin",
    "SUPPRESSED_LABEL",
    "bin_bounds",
    "bin_index",
    "bin_indices",
    "bins_at_level",
    "category_ids",
    "category_labels",
    "category_lift",
    "generalise_categorical",
    "generalise_numerical",
    "lift_bins",
    "render_range",
    "to_units",
]
