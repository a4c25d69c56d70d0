from __future__ import annotations

import json
from dataclasses import replace

import pandas as pd
import pytest

from chunkanon.chunks import CsvChunkSource, FrameChunkSource
from chunkanon.datagen import GeneratorRecipe, generate, generate_frame, medical_schema
from chunkanon.encoding import build_codebook
from chunkanon.errors import AnonymisationError, EmptyDataset, IngestError, NoFeasibleNode
from chunkanon.histogram import KeyCodec
from chunkanon.pipeline import PipelineConfig, phase1, run
from chunkanon.release import Renderer
from helpers import Oracle, fig1_frame, fig1_schema, random_instance, regroup

TABLE2_NODE = (2, 1, 1, 6, 6)


def test_table2_record():
    schema = medical_schema()
    book = build_codebook(range(560000, 561347), "PIN Code")
    enc = schema.with_code_domains({"PIN Code": len(book)})
    record = pd.DataFrame(
        [["O+", "Data Scientist", "33", "23.8", "560044", "Dementia"]],
        columns=["Blood Group", "Profession", "Age", "BMI", "PIN Code", "Health Condition"],
    )
    codec = KeyCodec(enc, TABLE2_NODE, {"PIN Code": book})
    keys, valid = codec.keys(record)
    assert valid.all()
    row = Renderer(enc, TABLE2_NODE, {"PIN Code": book}).row(keys[0])
    assert row + (record["Health Condition"][0],) == (
        "O",
        "Data Scientist",
        "[33 - 33]",
        "[12 - 36)",
        "[560032 - 560063]",
        "Dementia",
    )


def test_unconstrained_budget_gives_root():
    frame = fig1_frame()
    cfg = PipelineConfig(fig1_schema(), k=2, n_ram=10**9)
    p1 = phase1(cfg, [frame])
    assert p1.ram_node == (1, 1, 1) and p1.records == len(frame)


def test_tight_budget_gives_top():
    cfg = PipelineConfig(fig1_schema(), k=2, n_ram=2)
    assert phase1(cfg, [fig1_frame()]).ram_node == (2, 3, 4)
    with pytest.raises(NoFeasibleNode):
        phase1(replace(cfg, n_ram=1), [fig1_frame()])


def test_auto_record_bytes_sets_budget():
    frame = fig1_frame()
    schema = replace(fig1_schema(chunk_rows=160), record_bytes=None)
    p1 = phase1(PipelineConfig(schema, k=2), [frame])
    row_bytes = p1.schema.record_bytes
    assert 10 < row_bytes < 40
    assert p1.budget == 160 * row_bytes // 16


@pytest.mark.parametrize("seed", range(5))
def test_matches_exhaustive_reference(seed):
    cfg, frame = random_instance(100 + seed, max_rows=1500)
    ram, final, dm = Oracle(cfg, frame).solve()
    rep = run(cfg, FrameChunkSource.split(frame, 3), out_dir=None)
    assert (rep.ram_node, rep.final_node, rep.loss.dm_star) == (ram, final, dm)


def test_output_is_k_anonymous_and_counts_add_up():
    frame = generate_frame(GeneratorRecipe(seed=11, rows_per_chunk=4000, num_chunks=3))
    cfg = PipelineConfig(medical_schema(chunk_rows=4000), k=20)
    src = FrameChunkSource.split(frame, 3)
    rep = run(cfg, src, out_dir=None)
    assert rep.passes == 3 and src.passes == 3
    names = [q.name for q in cfg.schema.qids]
    sizes = regroup(rep.output, names)
    assert min(sizes.values()) >= 20
    assert rep.records_written + rep.records_suppressed == len(frame)
    assert rep.records_suppressed <= 0.05 * len(frame)
    assert sum(sizes.values()) == rep.records_written
    assert sum(c * c for c in sizes.values()) + rep.records_suppressed**2 == rep.loss.dm_star
    assert list(rep.output[0].columns) == cfg.schema.released_columns
    assert rep.peak_resident_histograms <= 2
    assert rep.peak_histogram_entries <= rep.n_ram


def test_writes_chunks_and_reports(tmp_path):
    generate(GeneratorRecipe(seed=2, rows_per_chunk=2000, num_chunks=2), tmp_path / "data")
    cfg = PipelineConfig(medical_schema(chunk_rows=2000), k=10, input=str(tmp_path / "data" / "chunk_*.csv"))
    rep = run(cfg, out_dir=tmp_path / "out")
    out = tmp_path / "out"
    assert sorted(p.name for p in out.glob("chunk_*.csv")) == ["chunk_00000.csv", "chunk_00001.csv"]
    flat = json.loads((out / "report.json").read_text())
    assert flat["dm_star"] == rep.loss.dm_star
    assert flat["final_node"] == ",".join(map(str, rep.final_node))
    assert "DM* =" in (out / "report.txt").read_text()
    assert (out / "root_histogram.csv").exists()
    written = sum(len(pd.read_csv(p, dtype=str)) for p in out.glob("chunk_*.csv"))
    assert written == rep.records_written


def test_validation_errors():
    with pytest.raises(AnonymisationError, match="k must be"):
        run(PipelineConfig(fig1_schema(), k=1), FrameChunkSource([fig1_frame()]))
    with pytest.raises(AnonymisationError, match="suppression_limit"):
        run(PipelineConfig(fig1_schema(), k=2, suppression_limit=2.0), FrameChunkSource([fig1_frame()]))


def test_empty_input():
    empty = fig1_frame().iloc[:0]
    with pytest.raises(EmptyDataset) as info:
        run(PipelineConfig(fig1_schema(), k=2), FrameChunkSource([empty]))
    assert info.value.phase == 1


def test_missing_column_reports_phase():
    frame = fig1_frame().drop(columns=["Age"])
    with pytest.raises(IngestError) as info:
        run(PipelineConfig(fig1_schema(), k=2), FrameChunkSource([frame]))
    assert info.value.phase == 1


def test_no_feasible_node_with_zero_suppression():
    # 3 records cannot form a class of 5, even at the top.
    cfg = PipelineConfig(fig1_schema(), k=5, suppression_limit=0.0)
    with pytest.raises(NoFeasibleNode) as info:
        run(cfg, FrameChunkSource([fig1_frame(3)]))
    assert info.value.phase == 2


def test_everything_suppressed_is_allowed_at_limit_one():
    cfg = PipelineConfig(fig1_schema(), k=5, suppression_limit=1.0)
    rep = run(cfg, FrameChunkSource([fig1_frame(3)]), out_dir=None)
    assert rep.records_written == 0 and rep.loss.dm_star == 9


def test_csv_source_from_config_glob(tmp_path):
    generate(GeneratorRecipe(seed=5, rows_per_chunk=500, num_chunks=3), tmp_path)
    src = CsvChunkSource.from_glob(str(tmp_path / "chunk_*.csv"))
    rep = run(PipelineConfig(medical_schema(chunk_rows=500), k=5), src, out_dir=None)
    assert rep.passes == 3 and rep.chunks_processed == 3 and rep.records_total == 1500
    assert set(rep.wall_time) == {"phase1", "phase2", "phase3"}
