"""Re-iterable chunk sources and cell parsing.

A chunk source is anything whose ``__iter__`` starts a fresh pass over the
data and yields one :class:`pandas.DataFrame` of string cells per chunk.
Both sources here count their passes so the pipeline's three-pass
contract can be checked.
"""

from __future__ import annotations

import glob as globmod
import logging
from collections.abc import Iterable, Iterator, Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import IngestError

logger = logging.getLogger(__name__)


def read_chunk(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")


class CsvChunkSource:
    """One CSV file per chunk; lexicographic path order is chunk order."""

    def __init__(self, paths: Iterable[str | Path]):
        self.paths = sorted(Path(p) for p in paths)
        self.passes = 0

    @classmethod
    def from_glob(cls, pattern: str) -> "CsvChunkSource":
        paths = globmod.glob(pattern)
        if not paths:
            raise FileNotFoundError(f"no input files match {pattern!r}")
        return cls(paths)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.paths]

    def __iter__(self) -> Iterator[pd.DataFrame]:
        self.passes += 1
        for path in self.paths:
            logger.debug("reading %s", path)
            yield read_chunk(path)


class FrameChunkSource:
    """In-memory chunks, mostly for tests and the comparison harness."""

    def __init__(self, frames: Sequence[pd.DataFrame]):
        self.frames = [f.astype(str) for f in frames]
        self.passes = 0

    @classmethod
    def split(cls, frame: pd.DataFrame, n_chunks: int) -> "FrameChunkSource":
        bounds = np.linspace(0, len(frame), n_chunks + 1).round().astype(int)
        return cls([frame.iloc[a:b].reset_index(drop=True) for a, b in zip(bounds[:-1], bounds[1:])])

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def names(self) -> list[str]:
        return [f"chunk_{i:05d}.csv" for i in range(len(self.frames))]

    def __iter__(self) -> Iterator[pd.DataFrame]:
        self.passes += 1
        yield from self.frames


def require_columns(frame: pd.DataFrame, columns: Iterable[str]) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise IngestError(f"missing columns {missing}")


def parse_units(values: pd.Series, unit: float, column: str, row_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Parse numeric cells into integer units.

    Returns ``(units, present)``; empty cells are absent (``present`` False,
    unit value 0). A non-empty cell that is not a finite number raises
    :class:`IngestError` naming its 1-based data row.
    """
    text = values.astype(str).str.strip()
    present = (text != "").to_numpy()
    parsed = pd.to_numeric(text.where(present, "0"), errors="coerce").to_numpy(dtype=np.float64)
    bad = present & ~np.isfinite(parsed)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise IngestError(f"cannot parse {text.iloc[i]!r} as a number", row=row_offset + i + 1, column=column)
    units = np.rint(np.where(present, parsed, 0.0) / unit).astype(np.int64)
    return units, present


def serialized_row_bytes(frame: pd.DataFrame) -> int:
    """Mean bytes per CSV row (newline included), rounded up."""
    if frame.empty:
        return 1
    text = frame.to_csv(index=False, header=False, lineterminator="\n")
    return max(1, -(-len(text.encode("utf-8")) // len(frame)))
