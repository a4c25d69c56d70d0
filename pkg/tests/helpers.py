"""Random instances and a brute-force reference anonymiser for the tests.

The reference works directly on Python values: it labels every record at
every node with plain arithmetic, counts the resulting tuples, and picks
nodes by the selection rules. It shares no code with the package beyond
reading the schema parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import replace
from collections import Counter
from fractions import Fraction

import numpy as np
import pandas as pd

from chunkanon.pipeline import PipelineConfig
from chunkanon.schema import AttributeKind, CategoricalHierarchy, DatasetSchema, NumericalLadder, QidSpec

ALL = "<all>"


def random_instance(seed: int, max_nodes: int = 60, max_rows: int = 5000) -> tuple[PipelineConfig, pd.DataFrame]:
    rng = np.random.default_rng(seed)
    while True:
        n_cat = int(rng.integers(0, 3))
        n_num = int(rng.integers(1, 3))
        cat_levels = [int(rng.integers(2, 4)) for _ in range(n_cat)]
        num_levels = [int(rng.integers(2, 5)) for _ in range(n_num)]
        if int(np.prod(cat_levels + num_levels)) <= max_nodes:
            break

    qids: list[QidSpec] = []
    columns: list[tuple[str, AttributeKind]] = [("id", AttributeKind.DIRECT_IDENTIFIER)]
    data: dict[str, list] = {}
    rows = int(rng.integers(200, max_rows + 1))
    data["id"] = [f"r{i}" for i in range(rows)]

    for j, levels in enumerate(cat_levels):
        size = int(rng.integers(2, 7))
        values = [f"c{j}v{i}" for i in range(size)]
        table = {}
        groups = int(rng.integers(1, size + 1))
        for i, v in enumerate(values):
            labels = [f"c{j}g{i % groups}"] if levels == 3 else []
            table[v] = labels + ["*"]
        name = f"cat{j}"
        qids.append(QidSpec(name, AttributeKind.CATEGORICAL_QID, CategoricalHierarchy.from_rows(table), 0))
        columns.append((name, AttributeKind.CATEGORICAL_QID))
        p = rng.dirichlet(np.ones(size) * 0.7)
        data[name] = list(rng.choice(values, rows, p=p))

    for j, levels in enumerate(num_levels):
        base = int(rng.integers(-50, 1000))
        span = int(rng.integers(8, 300))
        widths = [1]
        for _ in range(levels - 2):
            widths.append(widths[-1] * int(rng.integers(2, 5)))
        widths.append(span)
        anchor = int(rng.integers(0, widths[-2] + 1)) if rng.random() < 0.5 else 0
        encode = bool(rng.random() < 0.3)
        ladder = NumericalLadder(1, base, base + span - 1, tuple(widths), anchor=anchor)
        name = f"num{j}"
        qids.append(QidSpec(name, AttributeKind.NUMERICAL_QID, ladder, 0, encode=encode))
        columns.append((name, AttributeKind.NUMERICAL_QID))
        if rng.random() < 0.3:
            pool = rng.choice(np.arange(base, base + span), size=max(2, span // 12), replace=False)
            vals = rng.choice(pool, rows)
        else:
            vals = base + np.minimum(span - 1, rng.geometric(3.0 / span, rows) - 1)
        data[name] = [str(int(v)) for v in vals]

    ranks = rng.permutation(len(qids)) + 1
    qids = [QidSpec(q.name, q.kind, q.rules, int(r), q.encode) for q, r in zip(qids, ranks)]
    columns.append(("diag", AttributeKind.SENSITIVE))
    data["diag"] = list(rng.choice(["a", "b", "c"], rows))
    schema = DatasetSchema(tuple(columns), tuple(qids), record_bytes=32, chunk_rows=rows)

    frame = pd.DataFrame(data)
    config = PipelineConfig(
        schema=schema,
        k=int(rng.integers(2, 25)),
        suppression_limit=float(rng.choice([0.0, 0.02, 0.05, 0.1])),
        sparsity_threshold=float(rng.choice([2.0, 10.0])),
    )
    # Budget somewhere between the finest and coarsest dense bin counts.
    lo = Oracle(config, frame).n_data(schema.top)
    hi = Oracle(config, frame).n_data(schema.root)
    return replace(config, n_ram=int(rng.integers(lo, hi + 1))), frame


class Oracle:
    """Exhaustive reference for node selection and DM*."""

    def __init__(self, config: PipelineConfig, frame: pd.DataFrame):
        self.config = config
        self.schema = config.schema
        self.records = len(frame)
        self.columns: list[list] = []
        self.domains: list[list] = []
        for q in self.schema.qids:
            if q.kind is AttributeKind.CATEGORICAL_QID:
                self.columns.append(list(frame[q.name]))
                self.domains.append(list(q.rules.domain))
                continue
            ld = q.rules
            vals = [int(round(float(v) / ld.unit)) for v in frame[q.name]]
            uniques = sorted(set(vals))
            span = ld.domain_max - ld.domain_min + 1
            if q.encode or span / len(uniques) > config.sparsity_threshold:
                code = {v: i for i, v in enumerate(uniques)}
                self.columns.append([code[v] for v in vals])
                self.domains.append(list(range(len(uniques))))
            else:
                self.columns.append(vals)
                self.domains.append(list(range(ld.domain_min, ld.domain_max + 1)))

    def label(self, j: int, level: int, value):
        q = self.schema.qids[j]
        if q.kind is AttributeKind.CATEGORICAL_QID:
            return value if level == 1 else q.rules.rows()[value][level - 2]
        ld = q.rules
        if level == ld.num_levels:
            return ALL
        return (value - ld.anchor) // ld.widths[level - 1]

    def n_data(self, node) -> int:
        total = 1
        for j, level in enumerate(node):
            total *= len({self.label(j, level, v) for v in self.domains[j]})
        return total + 1

    def nodes(self):
        return itertools.product(*(range(1, q.num_levels + 1) for q in self.schema.qids))

    def rank_key(self, node) -> tuple[int, ...]:
        order = sorted(range(len(node)), key=lambda i: self.schema.qids[i].importance_rank)
        return tuple(node[i] for i in order)

    def precision(self, node) -> Fraction:
        terms = [Fraction(l - 1, q.num_levels - 1) for l, q in zip(node, self.schema.qids)]
        return 1 - sum(terms) / len(terms)

    def ram_node(self, budget: int):
        ok = {n: self.n_data(n) <= budget for n in self.nodes()}
        minimal = []
        for n, passed in ok.items():
            preds = [n[:i] + (n[i] - 1,) + n[i + 1 :] for i in range(len(n)) if n[i] > 1]
            if passed and not any(ok[p] for p in preds):
                minimal.append(n)
        return min(minimal, key=lambda n: (-self.precision(n), self.rank_key(n)))

    def classes(self, node) -> Counter:
        labels = [[self.label(j, node[j], v) for v in col] for j, col in enumerate(self.columns)]
        return Counter(zip(*labels))

    def evaluate(self, node) -> tuple[bool, int]:
        k = self.config.k
        counts = self.classes(node).values()
        s = sum(c for c in counts if c < k)
        dm = sum(c * c for c in counts if c >= k) + s * s
        return s <= self.config.suppression_limit * self.records, dm

    def solve(self):
        """``(ram_node, final_node, dm_star)``, or ``(ram_node, None, None)`` when nothing passes."""
        ram = self.ram_node(self.config.n_ram)
        best = None
        for n in self.nodes():
            if any(a < b for a, b in zip(n, ram)):
                continue
            passed, dm = self.evaluate(n)
            if passed and (best is None or (dm, self.rank_key(n)) < best[0]):
                best = ((dm, self.rank_key(n)), n)
        if best is None:
            return ram, None, None
        return ram, best[1], best[0][0]


def fig1_schema(chunk_rows: int = 1000) -> DatasetSchema:
    """Three QIDs with 2, 3 and 4 levels (24 nodes)."""
    sex = CategoricalHierarchy.from_rows({"F": ["*"], "M": ["*"]})
    marital = CategoricalHierarchy.from_rows(
        {
            "Married": ["Ever Married", "*"],
            "Divorced": ["Ever Married", "*"],
            "Widowed": ["Ever Married", "*"],
            "Single": ["Never Married", "*"],
        }
    )
    age = NumericalLadder(1, 0, 99, (1, 5, 10, 100))
    return DatasetSchema(
        columns=(
            ("Sex", AttributeKind.CATEGORICAL_QID),
            ("Marital Status", AttributeKind.CATEGORICAL_QID),
            ("Age", AttributeKind.NUMERICAL_QID),
            ("Diagnosis", AttributeKind.SENSITIVE),
        ),
        qids=(
            QidSpec("Sex", AttributeKind.CATEGORICAL_QID, sex, 3),
            QidSpec("Marital Status", AttributeKind.CATEGORICAL_QID, marital, 2),
            QidSpec("Age", AttributeKind.NUMERICAL_QID, age, 1),
        ),
        record_bytes=40,
        chunk_rows=chunk_rows,
    )


def fig1_frame(rows: int = 400, seed: int = 1) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    return pd.DataFrame(
        {
            "Sex": rng.choice(["F", "M"], rows),
            "Marital Status": rng.choice(["Married", "Divorced", "Widowed", "Single"], rows),
            "Age": rng.integers(0, 100, rows).astype(str),
            "Diagnosis": rng.choice(["a", "b"], rows),
        }
    )


def regroup(frames: list[pd.DataFrame], qid_names: list[str]) -> Counter:
    """Class sizes in released output, keyed by the generalised QID tuple."""
    out: Counter = Counter()
    for f in frames:
        out.update(map(tuple, f[qid_names].itertuples(index=False, name=None)))
    return out
