"""Information-loss scores: DM*, node precision and the DM* ratio.

All arithmetic is exact (Python ints and :class:`fractions.Fraction`);
DM* reaches 10^12 and beyond on realistic data.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .histogram import Histogram
from .schema import DatasetSchema, Node


@dataclass(frozen=True)
class LossReport:
    dm_star: int
    suppressed: int
    num_classes: int
    min_class: int
    max_class: int
    precision: Fraction

    def as_dict(self) -> dict[str, object]:
        d = asdict(self)
        d["precision"] = float(self.precision)
        return d


def _sum_squares(counts: np.ndarray) -> int:
    return sum(c * c for c in counts.tolist())


def dm_star(hist: Histogram, k: int) -> int:
    """Sum of squared sizes of classes with at least ``k`` records, plus the suppressed count squared."""
    kept = hist.counts[hist.counts >= k]
    s = hist.total - int(kept.sum())
    return _sum_squares(kept) + s * s


def dm_star_floor(hist: Histogram) -> int:
    """Lower bound on DM* at ``hist.node`` and at every generalisation of it, for any ``k``.

    Merging classes can only grow a sum of squares, and folding classes into
    the suppressed group does too since ``(s + c)^2 >= s^2 + c^2``.
    """
    return _sum_squares(hist.counts) + hist.suppressed * hist.suppressed


def precision(node: Node, schema: DatasetSchema) -> Fraction:
    """One minus the mean normalised generalisation depth over QIDs (1 = raw, 0 = fully generalised)."""
    penalty = Fraction(0)
    for level, q in zip(node, schema.qids):
        if q.num_levels > 1:
            penalty += Fraction(level - 1, q.num_levels - 1)
    return 1 - penalty / schema.num_qids


def dm_ratio(dm_baseline: int, dm_global: int) -> Fraction:
    if dm_global == 0:
        raise ZeroDivisionError("DM* of the compared run is zero")
    return Fraction(dm_baseline, dm_global)


def loss_report(hist: Histogram, k: int, schema: DatasetSchema) -> LossReport:
    kept = hist.counts[hist.counts >= k]
    return LossReport(
        dm_star=dm_star(hist, k),
        suppressed=hist.total - int(kept.sum()),
        num_classes=len(kept),
        min_class=int(kept.min()) if len(kept) else 0,
        max_class=int(kept.max()) if len(kept) else 0,
        precision=precision(hist.node, schema),
    )
