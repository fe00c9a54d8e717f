"""Deterministic synthetic corpus generation for tests and benchmarks.

Embeddings are drawn from configurable Gaussian clusters per modality, with
optional entity-direction coupling and text-to-image tying, so both
well-separated and fully random regimes are constructible. The output is a
pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig
from .store import (
    EmbeddingMatrix,
    EntityLabel,
    EntityMention,
    FeatureStore,
    Modality,
    SampleRecord,
)

_FILLER_WORDS = (
    "after", "before", "during", "officials", "said", "the", "new", "report",
    "crowd", "gathered", "outside", "while", "local", "leaders", "met", "on",
    "statement", "about", "plans", "for", "major", "event", "held", "near",
    "city", "center", "announced", "a", "response", "to", "recent", "changes",
)

_OTHER_LABELS = (
    EntityLabel.GPE,
    EntityLabel.ORG,
    EntityLabel.LOC,
    EntityLabel.EVENT,
    EntityLabel.DATE,
    EntityLabel.OTHER,
)

_SOURCES = ("agency_a", "agency_b", "agency_c", "agency_d")

DAY_SECONDS = 86_400


@dataclass(frozen=True)
class ModalityConfig:
    """Per-modality embedding geometry.

    cluster_count == 0 means isotropic rows (no cluster structure);
    entity_weight adds a shared direction per entity mentioned in the caption,
    with person entities optionally weighted separately.
    """

    dim: int
    cluster_count: int = 8
    spread: float = 0.25
    entity_weight: float = 0.0
    person_entity_weight: float | None = None
    orthonormal_centers: bool = False
    # "random" draws each sample's cluster; "cyclic" assigns sample i to
    # cluster i mod cluster_count (with orthonormal centers and zero spread,
    # cluster_count == n gives one orthogonal direction per sample).
    cluster_assignment: str = "random"

    def weight_for(self, is_person: bool) -> float:
        if is_person and self.person_entity_weight is not None:
            return self.person_entity_weight
        return self.entity_weight


@dataclass(frozen=True)
class SynthConfig:
    n: int = 100
    clip_text: ModalityConfig = field(default_factory=lambda: ModalityConfig(dim=512))
    clip_image: ModalityConfig = field(default_factory=lambda: ModalityConfig(dim=512))
    sbert_text: ModalityConfig = field(default_factory=lambda: ModalityConfig(dim=768))
    place_image: ModalityConfig = field(default_factory=lambda: ModalityConfig(dim=2048))
    # clip_image = normalize((1 - alpha) * own_draw + alpha * clip_text_row);
    # alpha == 1.0 copies the text rows verbatim.
    image_text_tie: float = 0.0
    person_pool: int = 20
    other_pool: int = 100
    person_caption_rate: float = 0.7
    other_entities_range: tuple[int, int] = (1, 3)
    entity_deficit_rate: float = 0.0
    word_range: tuple[int, int] = (6, 24)
    linked_id_rate: float = 0.7
    timestamp_start: int = 1_400_000_000
    timestamp_span_days: int = 1_100
    person_bbox_rate: float = 0.95
    nonperson_bbox_rate: float = 0.2
    role_excluded_rate: float = 0.05
    generic_caption_rate: float = 0.05
    image_ok_rate: float = 1.0

    def modality_config(self, modality: Modality) -> ModalityConfig:
        return {
            Modality.CLIP_TEXT: self.clip_text,
            Modality.CLIP_IMAGE: self.clip_image,
            Modality.SBERT_TEXT: self.sbert_text,
            Modality.PLACE_IMAGE: self.place_image,
        }[modality]


def _validate_config(config: SynthConfig) -> None:
    if config.n < 1:
        raise InvalidConfig("n must be >= 1")
    for modality in Modality:
        mc = config.modality_config(modality)
        if mc.dim < 1:
            raise InvalidConfig(f"{modality.name}: dim must be >= 1")
        if mc.cluster_count < 0:
            raise InvalidConfig(f"{modality.name}: cluster_count must be >= 0")
        if mc.spread < 0:
            raise InvalidConfig(f"{modality.name}: spread must be >= 0")
        if mc.orthonormal_centers and mc.cluster_count > mc.dim:
            raise InvalidConfig(
                f"{modality.name}: orthonormal centers need cluster_count <= dim"
            )
        if mc.cluster_assignment not in ("random", "cyclic"):
            raise InvalidConfig(f"{modality.name}: unknown cluster_assignment")
    if not 0.0 <= config.image_text_tie <= 1.0:
        raise InvalidConfig("image_text_tie must be in [0, 1]")
    if config.image_text_tie > 0.0 and config.clip_image.dim != config.clip_text.dim:
        raise InvalidConfig("image_text_tie requires equal clip text/image dims")
    if config.person_pool < 1 or config.other_pool < 1:
        raise InvalidConfig("entity pools must be non-empty")
    lo, hi = config.other_entities_range
    if lo < 0 or hi < lo:
        raise InvalidConfig("other_entities_range must satisfy 0 <= min <= max")
    wlo, whi = config.word_range
    if wlo < 1 or whi < wlo:
        raise InvalidConfig("word_range must satisfy 1 <= min <= max")
    for name in (
        "person_caption_rate", "entity_deficit_rate", "linked_id_rate",
        "person_bbox_rate", "nonperson_bbox_rate", "role_excluded_rate",
        "generic_caption_rate", "image_ok_rate",
    ):
        value = getattr(config, name)
        if not 0.0 <= value <= 1.0:
            raise InvalidConfig(f"{name} must be in [0, 1]")
    if config.timestamp_span_days < 1:
        raise InvalidConfig("timestamp_span_days must be >= 1")


def _entity_pool(config: SynthConfig, rng: np.random.Generator) -> list[EntityMention]:
    pool = []
    for i in range(config.person_pool):
        linked = f"P{i}" if rng.random() < config.linked_id_rate else None
        pool.append(
            EntityMention(f"First{i:03d} Last{i:03d}", EntityLabel.PERSON, linked)
        )
    for i in range(config.other_pool):
        label = _OTHER_LABELS[int(rng.integers(0, len(_OTHER_LABELS)))]
        linked = f"E{i}" if rng.random() < config.linked_id_rate else None
        pool.append(EntityMention(f"Topic{i:04d}", label, linked))
    return pool


def _caption_tokens(
    mentions: list[EntityMention], target_words: int, rng: np.random.Generator
) -> str:
    tokens: list[str] = []
    for m in mentions:
        if tokens:
            tokens.append(_FILLER_WORDS[int(rng.integers(0, len(_FILLER_WORDS)))])
        tokens.extend(m.surface.split())
    while len(tokens) < target_words:
        tokens.append(_FILLER_WORDS[int(rng.integers(0, len(_FILLER_WORDS)))])
    return " ".join(tokens)


def _modality_rows(
    mc: ModalityConfig,
    n: int,
    entity_indices: list[list[int]],
    pool_size: int,
    person_count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    # Fixed draw order per modality: entity directions, centers, assignments, noise.
    entity_dirs = rng.standard_normal((pool_size, mc.dim))
    if mc.cluster_count > 0:
        centers = rng.standard_normal((mc.cluster_count, mc.dim))
        if mc.orthonormal_centers:
            q, _ = np.linalg.qr(centers.T)
            centers = np.ascontiguousarray(q.T)
        if mc.cluster_assignment == "cyclic":
            assign = np.arange(n) % mc.cluster_count
        else:
            assign = rng.integers(0, mc.cluster_count, n)
        rows = centers[assign] + mc.spread * rng.standard_normal((n, mc.dim))
    else:
        rows = rng.standard_normal((n, mc.dim))
    if mc.entity_weight != 0.0 or mc.person_entity_weight:
        for i, ents in enumerate(entity_indices):
            for e in ents:
                weight = mc.weight_for(e < person_count)
                if weight != 0.0:
                    rows[i] += weight * entity_dirs[e]
    return rows


def _normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return rows / norms


def generate_synthetic(config: SynthConfig, seed: int) -> FeatureStore:
    """Build a fully in-memory synthetic store, deterministic per (config, seed)."""
    _validate_config(config)
    rng = np.random.default_rng(seed)

    pool = _entity_pool(config, rng)
    person_count = config.person_pool
    pool_size = len(pool)

    # Entity selection per sample.
    entity_indices: list[list[int]] = []
    lo, hi = config.other_entities_range
    for _ in range(config.n):
        ents: list[int] = []
        deficit = rng.random() < config.entity_deficit_rate
        has_person = rng.random() < config.person_caption_rate
        if has_person:
            ents.append(int(rng.integers(0, person_count)))
        k = int(rng.integers(lo, hi + 1))
        if not deficit:
            k = max(k, 2 - len(ents))
        else:
            k = min(k, 1 - len(ents)) if len(ents) < 1 else 0
        if k > 0:
            others = rng.choice(config.other_pool, size=min(k, config.other_pool), replace=False)
            ents.extend(person_count + int(o) for o in others)
        entity_indices.append(ents)

    # Captions, timestamps, flags.
    wlo, whi = config.word_range
    captions = []
    for ents in entity_indices:
        target = int(rng.integers(wlo, whi + 1))
        captions.append(_caption_tokens([pool[e] for e in ents], target, rng))
    span_seconds = config.timestamp_span_days * DAY_SECONDS
    timestamps = config.timestamp_start + rng.integers(0, span_seconds, config.n)
    sources = [_SOURCES[int(rng.integers(0, len(_SOURCES)))] for _ in range(config.n)]

    records = []
    for i in range(config.n):
        ents = entity_indices[i]
        caption_has_person = any(e < person_count for e in ents)
        bbox_rate = (
            config.person_bbox_rate if caption_has_person else config.nonperson_bbox_rate
        )
        records.append(
            SampleRecord(
                sample_id=i,
                source=sources[i],
                timestamp=int(timestamps[i]),
                caption=captions[i],
                word_count=len(captions[i].split()),
                named_entities=tuple(pool[e] for e in ents),
                person_role_excluded=bool(rng.random() < config.role_excluded_rate),
                is_generic_caption=bool(rng.random() < config.generic_caption_rate),
                has_person_bbox=bool(rng.random() < bbox_rate),
                image_ok=bool(rng.random() < config.image_ok_rate),
            )
        )

    # Embeddings, in modality enum order.
    raw: dict[Modality, np.ndarray] = {}
    for modality in Modality:
        raw[modality] = _modality_rows(
            config.modality_config(modality),
            config.n,
            entity_indices,
            pool_size,
            person_count,
            rng,
        )

    unit: dict[Modality, np.ndarray] = {m: _normalize(raw[m]) for m in Modality}
    alpha = config.image_text_tie
    if alpha == 1.0:
        unit[Modality.CLIP_IMAGE] = unit[Modality.CLIP_TEXT].copy()
    elif alpha > 0.0:
        mixed = (1.0 - alpha) * unit[Modality.CLIP_IMAGE] + alpha * unit[Modality.CLIP_TEXT]
        unit[Modality.CLIP_IMAGE] = _normalize(mixed)

    matrices = {
        m: EmbeddingMatrix(
            m,
            config.modality_config(m).dim,
            unit[m].astype(np.float32),
            normalized=True,
        )
        for m in Modality
    }
    return FeatureStore(records, matrices)


def small_config(**overrides) -> SynthConfig:
    """Low-dimension config for fast tests; geometry knobs via overrides."""
    base = SynthConfig(
        clip_text=ModalityConfig(dim=32),
        clip_image=ModalityConfig(dim=32),
        sbert_text=ModalityConfig(dim=48),
        place_image=ModalityConfig(dim=24),
    )
    return replace(base, **overrides)
