"""Shared fixtures and in-memory store builders."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from oocmatch.cli import PipelineConfig, cmd_generate
from oocmatch.store import (
    EmbeddingMatrix,
    EntityLabel,
    EntityMention,
    FeatureStore,
    Modality,
    SampleRecord,
    write_store,
)
from oocmatch.synth import ModalityConfig, SynthConfig, generate_synthetic

DAY = 86_400


def ent(surface: str, label: EntityLabel = EntityLabel.OTHER, linked_id: str | None = None):
    return EntityMention(surface, label, linked_id)


def make_record(
    sample_id: int,
    caption: str = "one two three four five six seven",
    entities: tuple[EntityMention, ...] = (
        EntityMention("Topic0001", EntityLabel.OTHER),
        EntityMention("Topic0002", EntityLabel.OTHER),
    ),
    timestamp: int = 1_500_000_000,
    source: str = "agency_a",
    person_role_excluded: bool = False,
    is_generic_caption: bool = False,
    has_person_bbox: bool = True,
    image_ok: bool = True,
    word_count: int | None = None,
) -> SampleRecord:
    return SampleRecord(
        sample_id=sample_id,
        source=source,
        timestamp=timestamp,
        caption=caption,
        word_count=len(caption.split()) if word_count is None else word_count,
        named_entities=tuple(entities),
        person_role_excluded=person_role_excluded,
        is_generic_caption=is_generic_caption,
        has_person_bbox=has_person_bbox,
        image_ok=image_ok,
    )


def make_store(
    records: list[SampleRecord],
    clip_text: np.ndarray | None = None,
    clip_image: np.ndarray | None = None,
    sbert_text: np.ndarray | None = None,
    place_image: np.ndarray | None = None,
    dim: int = 8,
) -> FeatureStore:
    """Store from explicit rows; unspecified modalities default to distinct
    standard-basis rows (requires n <= dim)."""
    n = len(records)

    def default_rows() -> np.ndarray:
        assert n <= dim, "default basis rows need n <= dim"
        rows = np.zeros((n, dim), np.float32)
        rows[np.arange(n), np.arange(n)] = 1.0
        return rows

    given = {
        Modality.CLIP_TEXT: clip_text,
        Modality.CLIP_IMAGE: clip_image,
        Modality.SBERT_TEXT: sbert_text,
        Modality.PLACE_IMAGE: place_image,
    }
    matrices = {}
    for modality, rows in given.items():
        rows = default_rows() if rows is None else np.asarray(rows, np.float32)
        matrices[modality] = EmbeddingMatrix(modality, rows.shape[1], rows, normalized=True)
    return FeatureStore(records, matrices)


def unit(vec) -> np.ndarray:
    v = np.asarray(vec, np.float64)
    return (v / np.linalg.norm(v)).astype(np.float32)


def pipeline_store_config() -> SynthConfig:
    """Frozen geometry for the end-to-end acceptance runs: every strategy
    keeps a sizable, CTI-balanced match population through the filter."""
    return SynthConfig(
        n=9000,
        image_text_tie=0.35,
        person_pool=80,
        other_pool=600,
        person_caption_rate=0.7,
        timestamp_span_days=1200,
        person_bbox_rate=0.97,
        role_excluded_rate=0.03,
        generic_caption_rate=0.03,
        clip_text=ModalityConfig(
            dim=48, cluster_count=64, spread=0.35, entity_weight=0.3, person_entity_weight=1.6
        ),
        clip_image=ModalityConfig(dim=48, cluster_count=64, spread=0.35),
        sbert_text=ModalityConfig(dim=48, cluster_count=40, spread=0.35),
        place_image=ModalityConfig(dim=32, cluster_count=12, spread=0.3),
    )


PIPELINE_STORE_SEED = 42
PIPELINE_SEED = 7
PIPELINE_CHUNK_SIZE = 900
PIPELINE_FRACTIONS = (0.8, 0.1, 0.1)


@pytest.fixture(scope="session")
def pipeline_store() -> FeatureStore:
    return generate_synthetic(pipeline_store_config(), PIPELINE_STORE_SEED)


@pytest.fixture(scope="session")
def pipeline_store_dir(pipeline_store, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("store") / "pipeline_store"
    write_store(pipeline_store, path)
    return path


@pytest.fixture(scope="session")
def pipeline_run(pipeline_store_dir, tmp_path_factory):
    """One full cmd_generate run shared by acceptance and report tests."""
    out_dir = tmp_path_factory.mktemp("out") / "generated"
    cfg = PipelineConfig(
        store_path=str(pipeline_store_dir),
        output_dir=str(out_dir),
        chunk_size=PIPELINE_CHUNK_SIZE,
        fractions=PIPELINE_FRACTIONS,
        seed=PIPELINE_SEED,
        worker_count=2,
    )
    rc = cmd_generate(cfg)
    assert rc == 0, "pipeline generation must succeed"
    manifest = json.loads((out_dir / "run_manifest.json").read_text(encoding="utf-8"))
    return {"out_dir": out_dir, "config": cfg, "manifest": manifest}
