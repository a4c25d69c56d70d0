"""``chunkanon`` command line: generate, anonymize, baseline, compare, lattice."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .baseline import baseline_run
from .chunks import CsvChunkSource
from .config import RunConfig, load_config
from .datagen import GeneratorRecipe, generate
from .errors import AnonymisationError
from .histogram import ResidencyTracker
from .lattice import dump_lines
from .metrics import dm_ratio
from .pipeline import phase1, phase2, run
from .schema import format_node

log = logging.getLogger("chunkanon")


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "k", None) is not None:
        cfg.pipeline = replace(cfg.pipeline, k=args.k)
    if getattr(args, "out", None):
        cfg.pipeline = replace(cfg.pipeline, output=args.out)
    cfg.pipeline.validate()
    return cfg


def _source(cfg: RunConfig) -> CsvChunkSource:
    if not cfg.pipeline.input:
        raise AnonymisationError("config has no 'input' glob")
    return CsvChunkSource.from_glob(cfg.pipeline.input)


def _out_dir(cfg: RunConfig) -> Path:
    if not cfg.pipeline.output:
        raise AnonymisationError("no output directory: set 'output' in the config or pass --out")
    out = Path(cfg.pipeline.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args: argparse.Namespace) -> int:
    if args.chunks < 1 or args.rows < 1:
        raise ValueError("--chunks and --rows must be positive")
    if args.rows % args.chunks:
        raise ValueError(f"--rows {args.rows} is not divisible by --chunks {args.chunks}")
    recipe = GeneratorRecipe(seed=args.seed, rows_per_chunk=args.rows // args.chunks, num_chunks=args.chunks)
    paths = generate(recipe, args.out)
    print(f"wrote {len(paths)} chunk files ({recipe.rows_per_chunk} rows each) to {args.out}")
    return 0


def cmd_anonymize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    report = run(cfg.pipeline, _source(cfg), _out_dir(cfg))
    print(report.text(), end="")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    report = baseline_run(_source(cfg), cfg.pipeline)
    (out / "baseline_report.txt").write_text(report.text(), encoding="utf-8")
    (out / "baseline_report.json").write_text(json.dumps(report.flat(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(report.text(), end="")
    return 0


def compare_grid(cfg: RunConfig, paths: list[str]) -> list[dict[str, object]]:
    """Both pipelines over the first ``c`` chunk files for every (k, c) in the grid."""
    rows = []
    for k in cfg.compare.k:
        pcfg = replace(cfg.pipeline, k=k)
        for c in cfg.compare.chunks:
            if c > len(paths):
                raise AnonymisationError(f"grid asks for {c} chunks but only {len(paths)} files match")
            source = CsvChunkSource(paths[:c])
            ours = run(pcfg, source, out_dir=None)
            theirs = baseline_run(source, pcfg)
            ratio = dm_ratio(theirs.dm_star, ours.loss.dm_star)
            rows.append(
                {
                    "k": k,
                    "chunks": c,
                    "records": ours.records_total,
                    "dm_star_global": ours.loss.dm_star,
                    "dm_star_baseline": theirs.dm_star,
                    "ratio": float(ratio),
                    "final_node": ours.final_node_label,
                }
            )
            log.info("k=%d chunks=%d ratio=%.4f", k, c, float(ratio))
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    rows = compare_grid(cfg, _source(cfg).paths)
    with (out / "compare.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    lines = [f"{'k':>5} {'chunks':>6} {'DM*_global':>16} {'DM*_baseline':>16} {'ratio':>8}"]
    for r in rows:
        lines.append(
            f"{r['k']:>5} {r['chunks']:>6} {r['dm_star_global']:>16} {r['dm_star_baseline']:>16} {r['ratio']:>8.4f}"
        )
    text = "\n".join(lines) + "\n"
    (out / "compare.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_lattice(args: argparse.Namespace) -> int:
    cfg = _load(args)
    source = _source(cfg)
    p1 = phase1(cfg.pipeline, source)
    if args.phase == 1:
        state, scores = p1.tags, {}
        header = f"# phase 1: budget {p1.budget} bins, RAM node {format_node(p1.ram_node, p1.schema)}"
    else:
        p2 = phase2(cfg.pipeline, source, p1, ResidencyTracker())
        state, scores = p2.search.tags, p2.search.scores
        header = f"# phase 2: k={cfg.pipeline.k}, final node {format_node(p2.final_node, p1.schema)}"
    lines = [
        header,
        f"# nodes {state.lattice.node_count}, evaluated {state.evaluated_count}",
        *dump_lines(state, scores),
    ]
    text = "\n".join(lines) + "\n"
    if cfg.pipeline.output and args.out:
        (_out_dir(cfg) / f"lattice_phase{args.phase}.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chunkanon", description="Memory-bounded chunked k-anonymisation.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic chunked CSV data")
    g.add_argument("--chunks", type=int, default=1)
    g.add_argument("--rows", type=int, default=10_000, help="total records, split evenly over the chunks")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    for name, fn, text in (
        ("anonymize", cmd_anonymize, "run the three-pass pipeline"),
        ("baseline", cmd_baseline, "anonymise every chunk independently"),
        ("compare", cmd_compare, "DM* of both over the config's (k, chunks) grid"),
        ("lattice", cmd_lattice, "dump lattice tags after a search"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--k", type=int, help="override k")
        if name == "lattice":
            p.add_argument("--phase", type=int, choices=(1, 2), default=2)
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except (AnonymisationError, OSError, ValueError) as exc:
        phase = getattr(exc, "phase", None)
        prefix = f"phase {phase}: " if phase else ""
        print(f"chunkanon: error: {prefix}{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
