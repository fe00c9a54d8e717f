"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`."""

import json
import shutil
import time
from collections import Counter

import numpy as np
import pytest

from oocmatch.balancing import (
    Label,
    MERGED_TAG,
    is_caption_balanced,
    is_image_balanced,
)
from oocmatch.cli import PipelineConfig, cmd_generate
from oocmatch.constraints import check_pristine_quality
from oocmatch.matcher import Partition, assign_chunks, match_bruteforce, match_split
from oocmatch.reports import annotation_filename, read_annotations, retrieval_sanity
from oocmatch.scoring import Strategy
from oocmatch.synth import ModalityConfig, SynthConfig, generate_synthetic

from conftest import PIPELINE_CHUNK_SIZE, PIPELINE_FRACTIONS, PIPELINE_SEED


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {name}: {status}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def load_split(run, tag, partition):
    path = run["out_dir"] / annotation_filename(tag, partition)
    return read_annotations(path, strategy_tag=tag, partition=partition)


# --- 1. oracle equivalence --------------------------------------------------------

def oracle_configs():
    """20 stores over N in {100, 500, 2000} with varied geometry."""
    base = dict(
        clip_text=ModalityConfig(dim=24, cluster_count=12, spread=0.35),
        clip_image=ModalityConfig(dim=24, cluster_count=12, spread=0.35),
        sbert_text=ModalityConfig(dim=24, cluster_count=10, spread=0.35),
        place_image=ModalityConfig(dim=16, cluster_count=6, spread=0.3),
    )
    tied = dict(base, image_text_tie=0.4)
    coupled = dict(
        tied,
        clip_text=ModalityConfig(
            dim=24, cluster_count=12, spread=0.35, entity_weight=0.3,
            person_entity_weight=1.6,
        ),
    )
    messy = dict(base, entity_deficit_rate=0.15, word_range=(3, 33))
    configs = []
    for i in range(14):
        variant = (base, tied, coupled, messy)[i % 4]
        configs.append((SynthConfig(n=100, person_pool=8, **variant), 100 + i))
    for i in range(4):
        variant = (base, tied, coupled, messy)[i]
        configs.append((SynthConfig(n=500, person_pool=20, **variant), 500 + i))
    configs.append((SynthConfig(n=2000, person_pool=40, **tied), 2000))
    configs.append((SynthConfig(n=2000, person_pool=40, **coupled), 2001))
    return configs


def test_oracle_equivalence_20_stores():
    start = time.monotonic()
    stores_checked = 0
    queries_checked = 0
    for config, seed in oracle_configs():
        store = generate_synthetic(config, seed)
        chunk_size = max(2, config.n // 4)
        chunks = assign_chunks(store, chunk_size, (0.5, 0.25, 0.25))
        for strategy in Strategy:
            got = match_split(store, chunks, strategy, workers=2)
            expected = {p: [] for p in Partition}
            for chunk in chunks:
                members = np.asarray(chunk.member_ids)
                for q in members:
                    if not check_pristine_quality(store.manifest[int(q)]).accepted:
                        continue
                    r = match_bruteforce(store, int(q), members, strategy)
                    if r is not None:
                        expected[chunk.partition].append(r)
                    queries_checked += 1
            for p in Partition:
                expected[p].sort(key=lambda r: r.caption_id)
                assert got[p] == expected[p], (config.n, seed, strategy, p)
        stores_checked += 1
    elapsed = time.monotonic() - start
    report(
        "oracle-equivalence",
        stores_checked == 20 and elapsed < 60.0,
        f"{stores_checked} stores, {queries_checked} queries, {elapsed:.1f}s",
    )


# --- 2. adversarial 50-50 design property ----------------------------------------

def test_cti_ratio_exactly_half_post_filter(pipeline_run):
    manifest = pipeline_run["manifest"]
    ratios = manifest["post_filter_cti_ratio"]
    counts = manifest["post_filter_counts"]
    all_half = all(v == 0.5 for per in ratios.values() for v in per.values())
    per_strategy_total = {tag: sum(per.values()) for tag, per in counts.items()}
    enough = all(v >= 1000 for v in per_strategy_total.values())
    report(
        "cti-50-50-by-design",
        all_half and enough,
        f"ratios all 0.5: {all_half}, falsified per strategy: {per_strategy_total}",
    )


# --- 3. caption balance ------------------------------------------------------------

def test_caption_balance_every_emitted_dataset(pipeline_run):
    tags = [s.tag for s in Strategy] + [MERGED_TAG]
    checked = 0
    for tag in tags:
        for partition in Partition:
            ds = load_split(pipeline_run, tag, partition)
            assert is_caption_balanced(ds), (tag, partition)
            pristine = sum(r.label is Label.PRISTINE for r in ds.records)
            assert len(ds.records) == 2 * pristine, (tag, partition)
            checked += 1
    report("caption-balance", checked == 15, f"{checked} datasets")


# --- 4. person image balance --------------------------------------------------------

def test_person_split_image_balance(pipeline_run):
    sizes = {}
    for partition in Partition:
        ds = load_split(pipeline_run, Strategy.PERSON_SBERT_TEXT_TEXT.tag, partition)
        pristine = Counter(r.image_id for r in ds.records if r.label is Label.PRISTINE)
        falsified = Counter(r.image_id for r in ds.records if r.label is Label.FALSIFIED)
        assert pristine == falsified, partition
        assert is_image_balanced(ds)
        sizes[partition.value] = len(ds.records)
    report("person-image-balance", all(v > 0 for v in sizes.values()), f"sizes {sizes}")


# --- 5. constraint audit -------------------------------------------------------------

def test_constraint_audit_zero_violations(pipeline_run):
    manifest = pipeline_run["manifest"]
    audit = json.loads((pipeline_run["out_dir"] / "audit.json").read_text())
    per_dataset = {k: v["violation_count"] for k, v in audit.items()}
    ok = manifest["audit_violations"] == 0 and all(v == 0 for v in per_dataset.values())
    report("constraint-audit", ok, f"{len(per_dataset)} datasets audited")


# --- 6. merged split -----------------------------------------------------------------

def test_merged_split_equal_and_disjoint(pipeline_run):
    details = {}
    for partition in Partition:
        ds = load_split(pipeline_run, MERGED_TAG, partition)
        caps = {s: set() for s in Strategy}
        imgs = {s: set() for s in Strategy}
        counts = Counter()
        for r in ds.records:
            counts[r.strategy] += 1
            if r.label is Label.PRISTINE:
                caps[r.strategy].add(r.caption_id)
            imgs[r.strategy].add(r.image_id)
        assert len(set(counts.values())) == 1, partition
        tags = list(Strategy)
        for i in range(4):
            for j in range(i + 1, 4):
                assert not (caps[tags[i]] & caps[tags[j]]), partition
                assert not (imgs[tags[i]] & imgs[tags[j]]), partition
        details[partition.value] = counts[tags[0]] // 2
    report("merged-split", all(v > 0 for v in details.values()), f"pairs/strategy {details}")


# --- 7. overlap matrix ----------------------------------------------------------------

def test_overlap_matrix_shape_and_symmetry(pipeline_run):
    for partition in Partition:
        obj = json.loads(
            (pipeline_run["out_dir"] / f"overlap_{partition.value}.json").read_text()
        )
        assert set(obj) == {"strategies", "overlap"}
        assert len(obj["strategies"]) == 4
        matrix = obj["overlap"]
        assert len(matrix) == 4 and all(len(row) == 4 for row in matrix)
        for i in range(4):
            assert matrix[i][i] == 1.0
            for j in range(4):
                assert matrix[i][j] == matrix[j][i]
    report("overlap-matrix", True, "3 partitions, 4x4, symmetric, unit diagonal")


# --- 8. retrieval sanity ----------------------------------------------------------------

def test_retrieval_sanity_extremes():
    mc = ModalityConfig(
        dim=64, cluster_count=48, spread=0.0, orthonormal_centers=True,
        cluster_assignment="cyclic",
    )
    separated = generate_synthetic(
        SynthConfig(n=48, clip_text=mc, clip_image=mc, sbert_text=mc,
                    place_image=mc, image_text_tie=1.0),
        seed=2,
    )
    acc_separated = retrieval_sanity(separated, num_negatives=4, trials=500, seed=1)

    iso = ModalityConfig(dim=32, cluster_count=0)
    isotropic = generate_synthetic(
        SynthConfig(n=400, clip_text=iso, clip_image=iso, sbert_text=iso, place_image=iso),
        seed=3,
    )
    acc_isotropic = retrieval_sanity(isotropic, num_negatives=4, trials=2000, seed=1)

    ok = acc_separated == 1.0 and abs(acc_isotropic - 0.2) <= 0.05
    report(
        "retrieval-sanity",
        ok,
        f"separated {acc_separated:.4f}, isotropic {acc_isotropic:.4f}",
    )


# --- 9. determinism -----------------------------------------------------------------------

def tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_generate_deterministic_and_worker_invariant(pipeline_run, tmp_path):
    base_cfg = pipeline_run["config"]
    trees = {}
    for name, workers in (("rerun", 1), ("wide", 8)):
        out = tmp_path / name
        cfg = PipelineConfig(
            store_path=base_cfg.store_path,
            output_dir=str(out),
            chunk_size=PIPELINE_CHUNK_SIZE,
            fractions=PIPELINE_FRACTIONS,
            seed=PIPELINE_SEED,
            worker_count=workers,
        )
        assert cmd_generate(cfg) == 0
        trees[name] = tree_bytes(out)
        shutil.rmtree(out)
    original = tree_bytes(pipeline_run["out_dir"])
    ok = trees["rerun"] == original and trees["wide"] == original
    report("determinism", ok, "byte-identical at workers 1, 2, 8")


# --- 10. throughput ------------------------------------------------------------------------

@pytest.mark.slow
def test_throughput_40k_chunk_under_10_minutes():
    config = SynthConfig(
        n=40_000,
        person_pool=60,
        other_pool=2000,
        clip_text=ModalityConfig(dim=512, cluster_count=64, spread=0.35),
        clip_image=ModalityConfig(dim=512, cluster_count=64, spread=0.35),
        sbert_text=ModalityConfig(dim=16, cluster_count=8, spread=0.3),
        place_image=ModalityConfig(dim=16, cluster_count=8, spread=0.3),
        image_text_tie=0.35,
    )
    store = generate_synthetic(config, seed=70)
    chunks = assign_chunks(store, 40_000, (0.8, 0.1, 0.1))
    assert len(chunks) == 1 and len(chunks[0].member_ids) == 40_000
    start = time.monotonic()
    results = match_split(store, chunks, Strategy.SEM_CLIP_TEXT_IMAGE, workers=4)
    elapsed = time.monotonic() - start
    matched = sum(len(v) for v in results.values())
    report(
        "throughput-40k",
        elapsed < 600.0 and matched > 0,
        f"{matched} matches in {elapsed:.0f}s",
    )
