"""Memory-bounded k-anonymisation of chunked tabular data.

The pipeline makes three passes over a chunk source: collect domains and
pick a node whose histogram fits the bin budget, build that histogram and
search the lattice above it for the lowest-DM* k-anonymous node, then
write the generalised chunks.
"""

from __future__ import annotations

from .baseline import BaselineReport, baseline_run
from .chunks import CsvChunkSource, FrameChunkSource
from .config import RunConfig, dump_config, load_config, parse_config
from .errors import AnonymisationError
from .histogram import Histogram, n_data, n_ram
from .lattice import Lattice, Tag, TagState, ola_search
from .metrics import dm_ratio, dm_star, precision
from .pipeline import AnonymisationReport, PipelineConfig, run
from .schema import AttributeKind, CategoricalHierarchy, DatasetSchema, NumericalLadder, QidSpec

__version__ = "0.1.0"

__all__ = [
    "AnonymisationError",
    "AnonymisationReport",
    "AttributeKind",
    "BaselineReport",
    "CategoricalHierarchy",
    "CsvChunkSource",
    "DatasetSchema",
    "FrameChunkSource",
    "Histogram",
    "Lattice",
    "NumericalLadder",
    "PipelineConfig",
    "QidSpec",
    "RunConfig",
    "Tag",
    "TagState",
    "baseline_run",
    "dm_ratio",
    "dm_star",
    "dump_config",
    "load_config",
    "n_data",
    "n_ram",
    "ola_search",
    "parse_config",
    "precision",
    "run",
]
