"""Dataset schema, QID generalisation rules and lattice coordinates.

Everything here is an immutable value type. Structural problems (wrong
shapes, bad widths, non-coarsening hierarchies) are reported by
:func:`validate_schema` rather than raised at construction time, so a
config can be loaded and inspected even when it is wrong.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Union

SUPPRESSED_LABEL = "*"

Node = tuple[int, ...]
"""A generalisation node: one 1-based level per QID, in schema QID order."""


class AttributeKind(str, enum.Enum):
    DIRECT_IDENTIFIER = "direct"
    CATEGORICAL_QID = "categorical"
    NUMERICAL_QID = "numerical"
    SENSITIVE = "sensitive"
    INSENSITIVE = "insensitive"

    @property
    def is_qid(self) -> bool:
        return self in (AttributeKind.CATEGORICAL_QID, AttributeKind.NUMERICAL_QID)


@dataclass(frozen=True)
class CategoricalHierarchy:
    """Per-value label table; ``table[l - 1][i]`` is the level-``l`` label of ``domain[i]``.

    Level 1 is the raw value itself, so ``table[0] == domain``.
    """

    domain: tuple[str, ...]
    table: tuple[tuple[str, ...], ...]

    @classmethod
    def from_rows(cls, rows: Mapping[str, Sequence[str]]) -> "CategoricalHierarchy":
        """Build from ``{value: [level-2 label, level-3 label, ...]}``."""
        domain = tuple(str(v) for v in rows)
        depth = {len(labels) for labels in rows.values()}
        if len(depth) > 1:
            raise ValueError(f"hierarchy rows have differing lengths: {sorted(depth)}")
        n_extra = depth.pop() if depth else 0
        table = [domain]
        for j in range(n_extra):
            table.append(tuple(str(rows[v][j]) for v in rows))
        return cls(domain=domain, table=tuple(table))

    @property
    def num_levels(self) -> int:
        return len(self.table)

    def rows(self) -> dict[str, list[str]]:
        return {v: [self.table[l][i] for l in range(1, self.num_levels)] for i, v in enumerate(self.domain)}


@dataclass(frozen=True)
class NumericalLadder:
    """Bin-width ladder over an integer-unit domain.

    Raw values are divided by ``unit`` and rounded at ingest, so a BMI of
    23.8 with ``unit=0.1`` becomes 238. ``widths`` are in those integer
    units; the last level always spans the whole domain whatever its
    nominal width.
    """

    unit: float
    domain_min: int
    domain_max: int
    widths: tuple[int, ...]
    anchor: int = 0

    @property
    def num_levels(self) -> int:
        return len(self.widths)

    @property
    def span(self) -> int:
        return self.domain_max - self.domain_min + 1

    def is_final(self, level: int) -> bool:
        return level == self.num_levels

    @property
    def is_integral(self) -> bool:
        return float(self.unit).is_integer()

    def for_codes(self, n_codes: int) -> "NumericalLadder":
        """Ladder over a dense code domain ``0..n_codes-1`` with the same widths."""
        return NumericalLadder(unit=1, domain_min=0, domain_max=n_codes - 1, widths=self.widths, anchor=self.anchor)


Rules = Union[CategoricalHierarchy, NumericalLadder]


@dataclass(frozen=True)
class QidSpec:
    name: str
    kind: AttributeKind
    rules: Rules
    importance_rank: int
    encode: bool = False

    @property
    def num_levels(self) -> int:
        return self.rules.num_levels

    @property
    def is_numerical(self) -> bool:
        return self.kind is AttributeKind.NUMERICAL_QID


@dataclass(frozen=True)
class DatasetSchema:
    columns: tuple[tuple[str, AttributeKind], ...]
    qids: tuple[QidSpec, ...]
    record_bytes: int | None  # None: measure from the first chunk
    chunk_rows: int
    # Populated after encoding: QID name -> raw-unit ladder the codes replaced.
    raw_ladders: Mapping[str, NumericalLadder] = field(default_factory=dict, compare=False)

    @property
    def num_qids(self) -> int:
        return len(self.qids)

    @property
    def level_counts(self) -> tuple[int, ...]:
        return tuple(q.num_levels for q in self.qids)

    @property
    def root(self) -> Node:
        return (1,) * self.num_qids

    @property
    def top(self) -> Node:
        return self.level_counts

    @property
    def rank_order(self) -> tuple[int, ...]:
        """QID positions sorted by importance rank, most important first."""
        return tuple(sorted(range(self.num_qids), key=lambda i: self.qids[i].importance_rank))

    def qid(self, name: str) -> QidSpec:
        for q in self.qids:
            if q.name == name:
                return q
        raise KeyError(name)

    def columns_of(self, kind: AttributeKind) -> list[str]:
        return [name for name, k in self.columns if k is kind]

    @property
    def released_columns(self) -> list[str]:
        return [name for name, k in self.columns if k is not AttributeKind.DIRECT_IDENTIFIER]

    def with_code_domains(self, code_counts: Mapping[str, int]) -> "DatasetSchema":
        """Swap the ladders of encoded QIDs for ladders over their code domains."""
        qids = []
        raw = dict(self.raw_ladders)
        for q in self.qids:
            if q.name in code_counts:
                raw[q.name] = q.rules
                q = replace(q, rules=q.rules.for_codes(code_counts[q.name]))
            qids.append(q)
        return replace(self, qids=tuple(qids), raw_ladders=raw)


class Order(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def node_compare(a: Sequence[int], b: Sequence[int]) -> Order:
    if len(a) != len(b):
        raise ValueError(f"node length mismatch: {len(a)} vs {len(b)}")
    le = all(x <= y for x, y in zip(a, b))
    ge = all(x >= y for x, y in zip(a, b))
    if le and ge:
        return Order.EQUAL
    if le:
        return Order.LESS
    if ge:
        return Order.GREATER
    return Order.INCOMPARABLE


def node_leq(a: Sequence[int], b: Sequence[int]) -> bool:
    return node_compare(a, b) in (Order.LESS, Order.EQUAL)


def format_node(node: Sequence[int], schema: DatasetSchema) -> str:
    """Render as ``((R_1, ..), (W_1, ..))``: categorical levels, then numerical widths in raw units."""
    cat, num = [], []
    for q, level in zip(schema.qids, node):
        if q.is_numerical:
            ladder = q.rules
            if ladder.is_final(level):
                width = ladder.span
            else:
                width = ladder.widths[level - 1]
            num.append(f"{width * ladder.unit:g}")
        else:
            cat.append(str(level))
    return f"(({', '.join(cat)}), ({', '.join(num)}))"


def _hierarchy_violations(name: str, h: CategoricalHierarchy) -> list[str]:
    out = []
    if not h.domain:
        return [f"{name}: empty domain"]
    if len(set(h.domain)) != len(h.domain):
        out.append(f"{name}: duplicate values in domain")
    if any(len(level) != len(h.domain) for level in h.table):
        out.append(f"{name}: level table does not cover the domain")
        return out
    if h.table[0] != h.domain:
        out.append(f"{name}: level 1 is not the identity")
    if h.num_levels < 2:
        out.append(f"{name}: needs at least 2 levels (raw and '{SUPPRESSED_LABEL}')")
    elif set(h.table[-1]) != {SUPPRESSED_LABEL}:
        out.append(f"{name}: level {h.num_levels} does not map every value to '{SUPPRESSED_LABEL}'")
    for l in range(1, h.num_levels):
        finer, coarser = h.table[l - 1], h.table[l]
        image: dict[str, str] = {}
        for f, c in zip(finer, coarser):
            if image.setdefault(f, c) != c:
                out.append(f"{name}: level {l + 1} not a coarsening of level {l} (label {f!r} split)")
                break
    return out


def _ladder_violations(name: str, ld: NumericalLadder) -> list[str]:
    out = []
    if ld.unit <= 0:
        out.append(f"{name}: unit must be positive")
    if ld.domain_min > ld.domain_max:
        out.append(f"{name}: domain_min {ld.domain_min} > domain_max {ld.domain_max}")
    if not ld.widths:
        return out + [f"{name}: no widths"]
    if ld.widths[0] < 1:
        out.append(f"{name}: widths[0]={ld.widths[0]} must be >= 1")
    for l in range(1, ld.num_levels):
        a, b = ld.widths[l - 1], ld.widths[l]
        if b <= a:
            out.append(f"{name}: widths not strictly increasing at level {l + 1} ({a} -> {b})")
        # Only bins below the final level need to nest; the final level is the whole domain.
        elif l + 1 < ld.num_levels and b % a != 0:
            out.append(f"{name}: widths[{l - 1}]={a} does not divide widths[{l}]={b}")
    return out


def validate_schema(schema: DatasetSchema) -> list[str]:
    """Every violated invariant, as human-readable strings naming the QID and level."""
    out: list[str] = []
    names = [c for c, _ in schema.columns]
    if len(set(names)) != len(names):
        out.append("duplicate column names")
    kinds = dict(schema.columns)
    if schema.record_bytes is not None and schema.record_bytes <= 0:
        out.append(f"record_bytes must be > 0 (got {schema.record_bytes})")
    if schema.chunk_rows <= 0:
        out.append(f"chunk_rows must be > 0 (got {schema.chunk_rows})")
    if not schema.qids:
        out.append("schema has no QIDs")
    seen_numerical = False
    for q in schema.qids:
        if kinds.get(q.name) is not q.kind:
            out.append(f"{q.name}: QID not declared as {q.kind.value} in columns")
        if q.kind is AttributeKind.NUMERICAL_QID:
            seen_numerical = True
            if not isinstance(q.rules, NumericalLadder):
                out.append(f"{q.name}: numerical QID needs a ladder")
            else:
                out.extend(_ladder_violations(q.name, q.rules))
        elif q.kind is AttributeKind.CATEGORICAL_QID:
            if seen_numerical:
                out.append(f"{q.name}: categorical QIDs must precede numerical QIDs")
            if q.encode:
                out.append(f"{q.name}: only numerical QIDs can be encoded")
            if not isinstance(q.rules, CategoricalHierarchy):
                out.append(f"{q.name}: categorical QID needs a hierarchy")
            else:
                out.extend(_hierarchy_violations(q.name, q.rules))
        else:
            out.append(f"{q.name}: kind {q.kind.value} is not a QID kind")
    declared = {name for name, k in schema.columns if k.is_qid}
    missing = declared - {q.name for q in schema.qids}
    for name in sorted(missing):
        out.append(f"{name}: declared as QID but has no generalisation rules")
    ranks = sorted(q.importance_rank for q in schema.qids)
    if ranks != list(range(1, len(schema.qids) + 1)):
        out.append(f"importance ranks {ranks} are not a permutation of 1..{len(schema.qids)}")
    return out
