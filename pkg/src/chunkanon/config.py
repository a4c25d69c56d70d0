"""YAML run configuration: schema, hierarchies, privacy parameters and I/O.

Numerical ladders are written in raw units (``unit: 0.1``, ``domain:
[12.0, 35.9]``, ``widths: [0.1, 1, 2]``) and converted to integer units on
load. Categorical hierarchies are given inline as ``value: [level 2,
level 3, ...]`` or as a header-less CSV via ``hierarchy_file`` (resolved
relative to the config file).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

import yaml

from .errors import SchemaError
from .hierarchy import to_units
from .pipeline import DEFAULT_SUPPRESSION_LIMIT, PipelineConfig
from .encoding import DEFAULT_SPARSITY_THRESHOLD
from .schema import AttributeKind, CategoricalHierarchy, DatasetSchema, NumericalLadder, QidSpec


@dataclass
class CompareGrid:
    k: tuple[int, ...] = (10, 50)
    chunks: tuple[int, ...] = (1, 5, 25)


@dataclass
class RunConfig:
    pipeline: PipelineConfig
    compare: CompareGrid = field(default_factory=CompareGrid)

    @property
    def schema(self) -> DatasetSchema:
        return self.pipeline.schema


def _from_units(n: int, unit: float) -> int | float:
    if float(unit).is_integer():
        return int(n * int(unit))
    return float(Decimal(n) * Decimal(str(unit)))


def _read_hierarchy_file(path: Path) -> dict[str, list[str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return {row[0]: row[1:] for row in csv.reader(fh) if row}


def _parse_qid(name: str, entry: dict[str, Any], kind: AttributeKind, base: Path) -> QidSpec:
    if "rank" not in entry:
        raise SchemaError(f"QID {name!r}: missing 'rank'")
    rank = int(entry["rank"])
    if kind is AttributeKind.CATEGORICAL_QID:
        if "hierarchy_file" in entry:
            rows = _read_hierarchy_file(base / entry["hierarchy_file"])
        elif "hierarchy" in entry:
            rows = {str(k): [str(x) for x in v] for k, v in entry["hierarchy"].items()}
        else:
            raise SchemaError(f"QID {name!r}: needs 'hierarchy' or 'hierarchy_file'")
        try:
            rules = CategoricalHierarchy.from_rows(rows)
        except ValueError as exc:
            raise SchemaError(f"QID {name!r}: {exc}") from None
        return QidSpec(name, kind, rules, rank)

    missing = [key for key in ("unit", "domain", "widths") if key not in entry]
    if missing:
        raise SchemaError(f"QID {name!r}: missing {', '.join(missing)}")
    unit = entry["unit"]
    lo, hi = entry["domain"]
    rules = NumericalLadder(
        unit=unit,
        domain_min=to_units(lo, unit),
        domain_max=to_units(hi, unit),
        widths=tuple(to_units(w, unit) for w in entry["widths"]),
        anchor=to_units(entry.get("anchor", 0), unit),
    )
    return QidSpec(name, kind, rules, rank, encode=bool(entry.get("encode", False)))


def parse_config(doc: dict[str, Any], base: str | Path = ".") -> RunConfig:
    base = Path(base)
    if not isinstance(doc, dict):
        raise SchemaError("config must be a mapping")
    try:
        columns = tuple((str(c["name"]), AttributeKind(c["kind"])) for c in doc["columns"])
    except KeyError as exc:
        raise SchemaError(f"config is missing {exc}") from None
    except ValueError as exc:
        raise SchemaError(f"bad column kind: {exc}") from None
    qid_specs = doc.get("qids") or {}
    kinds = dict(columns)
    for name in qid_specs:
        if name not in kinds or not kinds[name].is_qid:
            raise SchemaError(f"QID {name!r} is not declared as a categorical or numerical column")
    for name, kind in columns:
        if kind.is_qid and name not in qid_specs:
            raise SchemaError(f"QID column {name!r} has no hierarchy")
    ordered = [n for n, k in columns if k is AttributeKind.CATEGORICAL_QID] + [
        n for n, k in columns if k is AttributeKind.NUMERICAL_QID
    ]
    qids = tuple(_parse_qid(n, qid_specs[n], kinds[n], base) for n in ordered)

    record_bytes = doc.get("record_bytes", "auto")
    schema = DatasetSchema(
        columns=columns,
        qids=qids,
        record_bytes=None if record_bytes in (None, "auto") else int(record_bytes),
        chunk_rows=int(doc.get("chunk_rows", 1_000_000)),
    )
    n_ram = doc.get("n_ram")
    pipeline = PipelineConfig(
        schema=schema,
        k=int(doc.get("k", 2)),
        suppression_limit=float(doc.get("suppression_limit", DEFAULT_SUPPRESSION_LIMIT)),
        sparsity_threshold=float(doc.get("sparsity_threshold", DEFAULT_SPARSITY_THRESHOLD)),
        n_ram=None if n_ram is None else int(n_ram),
        input=doc.get("input"),
        output=doc.get("output"),
    )
    grid = doc.get("compare") or {}
    compare = CompareGrid(
        k=tuple(int(x) for x in grid.get("k", CompareGrid.k)),
        chunks=tuple(int(x) for x in grid.get("chunks", CompareGrid.chunks)),
    )
    return RunConfig(pipeline, compare)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent)


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    p = cfg.pipeline
    s = p.schema
    qids: dict[str, Any] = {}
    for q in s.qids:
        if isinstance(q.rules, CategoricalHierarchy):
            qids[q.name] = {"rank": q.importance_rank, "hierarchy": q.rules.rows()}
            continue
        r = q.rules
        entry: dict[str, Any] = {
            "rank": q.importance_rank,
            "unit": r.unit,
            "domain": [_from_units(r.domain_min, r.unit), _from_units(r.domain_max, r.unit)],
            "widths": [_from_units(w, r.unit) for w in r.widths],
            "anchor": _from_units(r.anchor, r.unit),
        }
        if q.encode:
            entry["encode"] = True
        qids[q.name] = entry
    return {
        "k": p.k,
        "suppression_limit": p.suppression_limit,
        "sparsity_threshold": p.sparsity_threshold,
        "chunk_rows": s.chunk_rows,
        "record_bytes": "auto" if s.record_bytes is None else s.record_bytes,
        "n_ram": p.n_ram,
        "input": p.input,
        "output": p.output,
        "columns": [{"name": n, "kind": k.value} for n, k in s.columns],
        "qids": qids,
        "compare": {"k": list(cfg.compare.k), "chunks": list(cfg.compare.chunks)},
    }


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, allow_unicode=True, default_flow_style=None)
