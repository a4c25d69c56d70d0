"""Rendering class keys as released labels, with encoded QIDs decoded to raw ranges."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from .encoding import Codebook
from .hierarchy import bin_bounds, bins_at_level, category_labels, render_range
from .schema import DatasetSchema, Node


class Renderer:
    """Per-QID lookup tables from key component to display label at one node."""

    def __init__(self, schema: DatasetSchema, node: Node, codebooks: Mapping[str, Codebook] | None = None):
        codebooks = codebooks or {}
        self.tables: list[np.ndarray] = []
        for q, level in zip(schema.qids, node):
            if not q.is_numerical:
                self.tables.append(np.asarray(category_labels(q.rules, level), dtype=object))
                continue
            ladder = q.rules
            labels = []
            for index in range(bins_at_level(ladder, level)):
                lo, hi = bin_bounds(index, ladder, level)
                if q.name in schema.raw_ladders:
                    book = codebooks[q.name]
                    raw_unit = schema.raw_ladders[q.name].unit
                    labels.append(render_range(book.decode_value(lo), book.decode_value(hi), raw_unit))
                else:
                    labels.append(render_range(lo, hi, ladder.unit))
            self.tables.append(np.asarray(labels, dtype=object))

    def columns(self, keys: np.ndarray) -> list[np.ndarray]:
        return [table[keys[:, j]] for j, table in enumerate(self.tables)]

    def row(self, key) -> tuple[str, ...]:
        return tuple(str(table[int(i)]) for table, i in zip(self.tables, key))
