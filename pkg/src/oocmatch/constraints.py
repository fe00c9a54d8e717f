"""Eligibility predicates: pristine-sample quality and pairwise compatibility.

These are the reference (per-pair, reason-producing) implementations; the
matcher carries a vectorized evaluator that must agree with them exactly,
which the test suite cross-checks pair by pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import UnknownId
from .scoring import Strategy, dot
from .store import EntityLabel, FeatureStore, Modality, SampleRecord

MIN_WORDS = 5
MAX_WORDS = 30
MIN_ENTITIES = 2
TEMPORAL_GAP_SECONDS = 30 * 86_400
PLACE_SIM_MAX = 0.9


class FilterReason(enum.Enum):
    WORD_COUNT = "word_count"
    ENTITY_COUNT = "entity_count"
    IMAGE_CORRUPT = "image_corrupt"
    TEMPORAL_GAP = "temporal_gap"
    ENTITY_OVERLAP = "entity_overlap"
    PERSON_OVERLAP_REQUIRED = "person_overlap_required"
    NO_PERSON_ENTITY = "no_person_entity"
    NO_PERSON_BBOX = "no_person_bbox"
    PERSON_ROLE_EXCLUDED = "person_role_excluded"
    GENERIC_CAPTION = "generic_caption"
    PLACE_TOO_SIMILAR = "place_too_similar"
    PERSON_ENTITY_PRESENT = "person_entity_present"
    SELF_MATCH = "self_match"


@dataclass(frozen=True)
class FilterVerdict:
    reasons: tuple[FilterReason, ...]

    @property
    def accepted(self) -> bool:
        return not self.reasons

    @property
    def reason_set(self) -> frozenset[FilterReason]:
        return frozenset(self.reasons)


_ACCEPTED = FilterVerdict(())


def _verdict(reasons: list[FilterReason]) -> FilterVerdict:
    ordered = [r for r in FilterReason if r in set(reasons)]
    return FilterVerdict(tuple(ordered))


def check_pristine_quality(record: SampleRecord) -> FilterVerdict:
    """Caption length 5..30 words, at least two named entities, intact image."""
    reasons = []
    if not MIN_WORDS <= record.word_count <= MAX_WORDS:
        reasons.append(FilterReason.WORD_COUNT)
    if len(record.named_entities) < MIN_ENTITIES:
        reasons.append(FilterReason.ENTITY_COUNT)
    if not record.image_ok:
        reasons.append(FilterReason.IMAGE_CORRUPT)
    return _verdict(reasons) if reasons else _ACCEPTED


def entity_overlap(
    a: SampleRecord, b: SampleRecord
) -> dict[tuple[str, str], frozenset[EntityLabel]]:
    """Keys shared by both captions: case-folded surfaces plus linked ids.

    Each overlap key carries the union of labels it appeared under on either
    side.
    """
    keys_a = a.overlap_keys()
    keys_b = b.overlap_keys()
    return {
        key: keys_a[key] | keys_b[key]
        for key in keys_a.keys() & keys_b.keys()
    }


def _key_is_person(labels: frozenset[EntityLabel]) -> bool:
    return EntityLabel.PERSON in labels


def _key_is_non_person(labels: frozenset[EntityLabel]) -> bool:
    return bool(labels - {EntityLabel.PERSON})


def check_pair(
    query: SampleRecord,
    candidate: SampleRecord,
    strategy: Strategy,
    store: FeatureStore,
) -> FilterVerdict:
    """Pairwise compatibility under a strategy.

    Assumes both records already pass check_pristine_quality. Temporal and
    entity rules are symmetric in (query, candidate); the person and scene
    record-level rules apply to both sides.
    """
    reasons: list[FilterReason] = []

    if candidate.sample_id == query.sample_id:
        reasons.append(FilterReason.SELF_MATCH)

    if abs(candidate.timestamp - query.timestamp) < TEMPORAL_GAP_SECONDS:
        reasons.append(FilterReason.TEMPORAL_GAP)

    overlap = entity_overlap(query, candidate)
    person_keys = any(_key_is_person(labels) for labels in overlap.values())
    non_person_keys = any(_key_is_non_person(labels) for labels in overlap.values())

    if strategy is Strategy.PERSON_SBERT_TEXT_TEXT:
        if not person_keys:
            reasons.append(FilterReason.PERSON_OVERLAP_REQUIRED)
        if non_person_keys:
            reasons.append(FilterReason.ENTITY_OVERLAP)
        for rec in (query, candidate):
            if not rec.has_person_entity:
                reasons.append(FilterReason.NO_PERSON_ENTITY)
            if not rec.has_person_bbox:
                reasons.append(FilterReason.NO_PERSON_BBOX)
            if rec.person_role_excluded:
                reasons.append(FilterReason.PERSON_ROLE_EXCLUDED)
            if rec.is_generic_caption:
                reasons.append(FilterReason.GENERIC_CAPTION)
        for rec in (query, candidate):
            if not 0 <= rec.sample_id < len(store):
                raise UnknownId(f"sample id {rec.sample_id} not in store")
        place = store.rows64(Modality.PLACE_IMAGE)
        if dot(place[query.sample_id], place[candidate.sample_id]) >= PLACE_SIM_MAX:
            reasons.append(FilterReason.PLACE_TOO_SIMILAR)
    else:
        if overlap:
            reasons.append(FilterReason.ENTITY_OVERLAP)
        if strategy is Strategy.SCENE_RESNET_PLACE:
            if query.has_person_entity or candidate.has_person_entity:
                reasons.append(FilterReason.PERSON_ENTITY_PRESENT)

    return _verdict(reasons) if reasons else _ACCEPTED
