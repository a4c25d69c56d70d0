"""Three-pass chunked k-anonymisation.

Pass 1 collects the distinct values of numerical QIDs (building codebooks
for sparse ones) and picks the finest node whose dense histogram fits the
RAM bin budget. Pass 2 builds the histogram at that node over every
chunk; the k-anonymity search then runs entirely on merges of that one
histogram. Pass 3 rewrites each chunk at the chosen node.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .chunks import CsvChunkSource, serialized_row_bytes
from .encoding import DEFAULT_SPARSITY_THRESHOLD, Codebook, UniqueCollector, build_codebook, should_encode
from .errors import AnonymisationError, EmptyDataset, NoFeasibleNode
from .histogram import (
    Histogram,
    KeyCodec,
    ResidencyTracker,
    build_histogram,
    is_k_anonymous,
    merge_to,
    n_data,
    n_ram,
)
from .lattice import Lattice, TagState, ola_search, select_best
from .metrics import LossReport, dm_star, dm_star_floor, loss_report, precision
from .release import Renderer
from .schema import DatasetSchema, Node, format_node, validate_schema

logger = logging.getLogger(__name__)

DEFAULT_SUPPRESSION_LIMIT = 0.05


@dataclass(frozen=True)
class PipelineConfig:
    schema: DatasetSchema
    k: int
    suppression_limit: float = DEFAULT_SUPPRESSION_LIMIT
    sparsity_threshold: float = DEFAULT_SPARSITY_THRESHOLD
    n_ram: int | None = None
    input: str | None = None
    output: str | None = None

    def problems(self) -> list[str]:
        out = validate_schema(self.schema)
        if self.k < 2:
            out.append(f"k must be >= 2 (got {self.k})")
        if not 0.0 <= self.suppression_limit <= 1.0:
            out.append(f"suppression_limit must lie in [0, 1] (got {self.suppression_limit})")
        if self.n_ram is not None and self.n_ram < 1:
            out.append(f"n_ram must be positive (got {self.n_ram})")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise AnonymisationError("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass
class Phase1Result:
    codebooks: dict[str, Codebook]
    ram_node: Node
    schema: DatasetSchema  # encoded QIDs carry code-domain ladders
    budget: int
    tags: TagState
    chunks: int
    records: int


@dataclass
class SearchResult:
    final_node: Node
    loss: LossReport
    tags: TagState
    scores: dict[Node, int]
    scored: int


@dataclass
class Phase2Result:
    root: Histogram
    search: SearchResult

    @property
    def final_node(self) -> Node:
        return self.search.final_node

    @property
    def loss(self) -> LossReport:
        return self.search.loss


@dataclass
class AnonymisationReport:
    ram_node: Node
    final_node: Node
    loss: LossReport
    k: int
    suppression_limit: float
    n_ram: int
    records_total: int
    records_written: int
    records_suppressed: int
    chunks_processed: int
    nodes_evaluated: dict[str, int]
    wall_time: dict[str, float]
    passes: int | None = None
    peak_resident_histograms: int = 0
    peak_histogram_entries: int = 0
    ram_node_label: str = ""
    final_node_label: str = ""
    extra: dict[str, Any] = field(default_factory=dict)
    # Generalised chunks, kept only when no output directory was given.
    output: list[pd.DataFrame] | None = field(default=None, repr=False)

    def flat(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "ram_node": ",".join(map(str, self.ram_node)),
            "ram_node_label": self.ram_node_label,
            "final_node": ",".join(map(str, self.final_node)),
            "final_node_label": self.final_node_label,
            "k": self.k,
            "suppression_limit": self.suppression_limit,
            "n_ram": self.n_ram,
            "records_total": self.records_total,
            "records_written": self.records_written,
            "records_suppressed": self.records_suppressed,
            "chunks_processed": self.chunks_processed,
            "passes": self.passes,
            "peak_resident_histograms": self.peak_resident_histograms,
            "peak_histogram_entries": self.peak_histogram_entries,
        }
        for key, value in self.loss.as_dict().items():
            d[key] = value
        for key, value in self.nodes_evaluated.items():
            d[f"nodes_evaluated.{key}"] = value
        for key, value in self.wall_time.items():
            d[f"wall_time.{key}"] = round(value, 6)
        d.update(self.extra)
        return d

    def text(self) -> str:
        lines = [
            "Chunked k-anonymisation report",
            f"  k = {self.k}, suppression limit = {self.suppression_limit:g}, N_RAM = {self.n_ram}",
            f"  RAM node:   {self.ram_node_label} levels {self.ram_node}",
            f"  final node: {self.final_node_label} levels {self.final_node}",
            f"  DM* = {self.loss.dm_star}",
            f"  precision = {float(self.loss.precision):.4f}",
            f"  classes = {self.loss.num_classes} (sizes {self.loss.min_class}..{self.loss.max_class})",
            f"  records: {self.records_total} in, {self.records_written} written, "
            f"{self.records_suppressed} suppressed",
            f"  chunks = {self.chunks_processed}, passes = {self.passes}",
            "  nodes evaluated: " + ", ".join(f"{k}={v}" for k, v in self.nodes_evaluated.items()),
            "  wall time (s): " + ", ".join(f"{k}={v:.3f}" for k, v in self.wall_time.items()),
        ]
        return "\n".join(lines) + "\n"


def phase1(config: PipelineConfig, chunk_source: Iterable[pd.DataFrame]) -> Phase1Result:
    schema = config.schema
    numerical = [q for q in schema.qids if q.is_numerical]
    collectors = {q.name: UniqueCollector(q) for q in numerical}
    chunks = records = 0
    record_bytes = schema.record_bytes
    for frame in chunk_source:
        if record_bytes is None and chunks == 0:
            record_bytes = serialized_row_bytes(frame)
        for c in collectors.values():
            c.add(frame)
        chunks += 1
        records += len(frame)
    if records == 0:
        raise EmptyDataset("the input contains no records")

    codebooks = {}
    for q in numerical:
        uniques = collectors[q.name].result()
        if should_encode(q.rules, len(uniques), config.sparsity_threshold, forced=q.encode):
            codebooks[q.name] = build_codebook(uniques, q.name)
    schema = replace(schema, record_bytes=record_bytes or 1)
    effective = schema.with_code_domains({name: len(cb) for name, cb in codebooks.items()})

    budget = config.n_ram if config.n_ram is not None else n_ram(schema.chunk_rows, schema.record_bytes)
    lattice = Lattice(effective.root, effective.top, effective.rank_order)
    minimal, tags = ola_search(lattice, lambda node: n_data(node, effective) <= budget)
    if not minimal:
        raise NoFeasibleNode(f"no node fits a budget of {budget} bins")
    ram_node = select_best(minimal, lambda node: precision(node, effective), "max", effective.rank_order)
    logger.info("phase 1: budget %d bins, RAM node %s", budget, format_node(ram_node, effective))
    return Phase1Result(codebooks, ram_node, effective, budget, tags, chunks, records)


def find_optimal_node(
    root: Histogram,
    schema: DatasetSchema,
    k: int,
    suppression_limit: float,
    tracker: ResidencyTracker | None = None,
) -> SearchResult:
    """Lowest-DM* node among all nodes above ``root.node`` that are k-anonymous within the limit.

    The k-anonymity search tags the lattice; DM* is then scored on passing
    nodes from the bottom up. DM* is not monotone once suppression is in
    play, so passing nodes above the k-minimal ones are scored too, except
    where :func:`dm_star_floor` already rules out a whole up-set.
    """
    lattice = Lattice(root.node, schema.top, schema.rank_order)
    cache: dict[Node, tuple[int, int]] = {}

    def passes(node: Node) -> bool:
        hist = merge_to(root, node, schema, tracker)
        check = is_k_anonymous(hist, k, suppression_limit)
        if check.passed:
            cache[node] = (dm_star(hist, k), dm_star_floor(hist))
        return check.passed

    minimal, tags = ola_search(lattice, passes)
    if not minimal:
        raise NoFeasibleNode(f"no node is {k}-anonymous within suppression limit {suppression_limit:g}")

    scores: dict[Node, int] = {}
    pruned = np.zeros(lattice.shape, dtype=bool)
    floors: list[tuple[int, Node]] = []
    best: tuple[int, tuple[int, ...]] | None = None
    by_height: dict[int, list[Node]] = {}
    for node in tags.passing():
        by_height.setdefault(lattice.height(node), []).append(node)
    scored = 0
    for h in sorted(by_height):
        for node in sorted(by_height[h], key=lattice.rank_key):
            if pruned[tags.rel(node)]:
                continue
            if node not in cache:
                hist = merge_to(root, node, schema, tracker)
                cache[node] = (dm_star(hist, k), dm_star_floor(hist))
                del hist
            scored += 1
            score, floor = cache[node]
            scores[node] = score
            key = (score, lattice.rank_key(node))
            if best is None or key < best:
                best = key
            floors.append((floor, node))
        keep = []
        for floor, node in floors:
            if floor > best[0]:
                pruned[tuple(slice(x, None) for x in tags.rel(node))] = True
            else:
                keep.append((floor, node))
        floors = keep

    final = select_best(scores, scores.__getitem__, "min", schema.rank_order)
    final_hist = merge_to(root, final, schema, tracker)
    return SearchResult(final, loss_report(final_hist, k, schema), tags, scores, scored)


def phase2(
    config: PipelineConfig,
    chunk_source: Iterable[pd.DataFrame],
    p1: Phase1Result,
    tracker: ResidencyTracker | None = None,
) -> Phase2Result:
    root = build_histogram(chunk_source, p1.ram_node, p1.schema, p1.codebooks, p1.budget, tracker)
    if root.total == 0:
        raise EmptyDataset("the input contains no records")
    search = find_optimal_node(root, p1.schema, config.k, config.suppression_limit, tracker)
    logger.info("phase 2: final node %s, DM* %d", format_node(search.final_node, p1.schema), search.loss.dm_star)
    return Phase2Result(root, search)


def released_key_filter(final: Histogram, k: int, codec: KeyCodec):
    """Predicate over key arrays: True where the key's class has at least ``k`` records."""
    kept = final.keys[final.counts >= k]
    if codec.packable:
        allowed = np.sort(codec.pack(kept))
        return lambda keys: np.isin(codec.pack(keys), allowed, assume_unique=False)
    allowed_set = {tuple(r) for r in kept.tolist()}
    return lambda keys: np.fromiter((tuple(r) in allowed_set for r in keys.tolist()), dtype=bool, count=len(keys))


def phase3(
    config: PipelineConfig,
    chunk_source: Iterable[pd.DataFrame],
    p1: Phase1Result,
    p2: Phase2Result,
    out_dir: str | Path | None,
    names: list[str] | None = None,
) -> tuple[int, int, list[pd.DataFrame]]:
    """Write generalised chunks; returns ``(written, suppressed, frames)``.

    ``frames`` is only populated when ``out_dir`` is None.
    """
    schema, node = p1.schema, p2.final_node
    final = merge_to(p2.root, node, schema)
    codec = KeyCodec(schema, node, p1.codebooks)
    released = released_key_filter(final, config.k, codec)
    renderer = Renderer(schema, node, p1.codebooks)
    written = seen = 0
    frames = []
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(chunk_source):
        keys, valid = codec.keys(frame, seen)
        seen += len(frame)
        keep = valid & released(keys)
        out = frame.loc[keep, schema.released_columns].reset_index(drop=True)
        for q, labels in zip(schema.qids, renderer.columns(keys[keep])):
            out[q.name] = labels
        written += len(out)
        if out_dir is None:
            frames.append(out)
        else:
            name = names[i] if names and i < len(names) else f"chunk_{i:05d}.csv"
            out.to_csv(Path(out_dir) / name, index=False, lineterminator="\n")
    return written, seen - written, frames


def _phase(number: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except AnonymisationError as exc:
        if exc.phase is None:
            exc.phase = number
        raise


def run(
    config: PipelineConfig,
    chunk_source=None,
    out_dir: str | Path | None = None,
    write_reports: bool = True,
) -> AnonymisationReport:
    """Run all three phases. ``chunk_source`` defaults to the config's input glob."""
    config.validate()
    if chunk_source is None:
        if not config.input:
            raise AnonymisationError("no input configured")
        chunk_source = CsvChunkSource.from_glob(config.input)
    if out_dir is None and config.output:
        out_dir = config.output
    passes_before = getattr(chunk_source, "passes", None)
    tracker = ResidencyTracker()
    timings = {}

    t0 = time.perf_counter()
    p1 = _phase(1, phase1, config, chunk_source)
    timings["phase1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    p2 = _phase(2, phase2, config, chunk_source, p1, tracker)
    timings["phase2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    names = getattr(chunk_source, "names", None)
    written, suppressed, frames = _phase(3, phase3, config, chunk_source, p1, p2, out_dir, names)
    timings["phase3"] = time.perf_counter() - t0

    passes = None
    if passes_before is not None:
        passes = chunk_source.passes - passes_before
    report = AnonymisationReport(
        ram_node=p1.ram_node,
        final_node=p2.final_node,
        loss=p2.loss,
        k=config.k,
        suppression_limit=config.suppression_limit,
        n_ram=p1.budget,
        records_total=p1.records,
        records_written=written,
        records_suppressed=suppressed,
        chunks_processed=p1.chunks,
        nodes_evaluated={
            "phase1": p1.tags.evaluated_count,
            "phase2_search": p2.search.tags.evaluated_count,
            "phase2_scored": p2.search.scored,
        },
        wall_time=timings,
        passes=passes,
        peak_resident_histograms=tracker.peak_resident,
        peak_histogram_entries=tracker.peak_entries,
        ram_node_label=format_node(p1.ram_node, p1.schema),
        final_node_label=format_node(p2.final_node, p1.schema),
    )
    report.extra["phase1_lattice_nodes"] = p1.tags.lattice.node_count
    report.extra["phase2_lattice_nodes"] = p2.search.tags.lattice.node_count
    if out_dir is None:
        report.output = frames
    elif write_reports:
        write_run_artifacts(Path(out_dir), report, p1, p2)
    return report


def write_run_artifacts(out_dir: Path, report: AnonymisationReport, p1: Phase1Result, p2: Phase2Result) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(report.text(), encoding="utf-8")
    (out_dir / "report.json").write_text(json.dumps(report.flat(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for name, book in p1.codebooks.items():
        book.save(out_dir / f"codebook_{_slug(name)}.csv")
    p2.root.save(out_dir / "root_histogram.csv", [q.name for q in p1.schema.qids])


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name).strip("_").lower()

