"""Similarity kernels for the four matching strategies and the CTI score.

All dot products are accumulated in 64-bit floats regardless of storage
precision. Single-pair scores always go through the same numpy vector dot,
so any value stored in results or recomputed by audits is bit-identical.
All-zero embedding rows score -inf and are never selectable.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import LengthMismatch, UnknownId
from .store import FeatureStore, Modality


class Strategy(enum.Enum):
    """Matching strategies: (query modality, candidate modality, descending?)."""

    SEM_CLIP_TEXT_IMAGE = (Modality.CLIP_TEXT, Modality.CLIP_IMAGE, True)
    SEM_CLIP_TEXT_TEXT = (Modality.CLIP_TEXT, Modality.CLIP_TEXT, True)
    PERSON_SBERT_TEXT_TEXT = (Modality.SBERT_TEXT, Modality.SBERT_TEXT, False)
    SCENE_RESNET_PLACE = (Modality.PLACE_IMAGE, Modality.PLACE_IMAGE, True)

    @property
    def query_modality(self) -> Modality:
        return self.value[0]

    @property
    def candidate_modality(self) -> Modality:
        return self.value[1]

    @property
    def descending(self) -> bool:
        """True if the best candidate has the highest score; the person
        strategy seeks the least similar caption and sorts ascending."""
        return self.value[2]

    @property
    def tag(self) -> str:
        return self.name.lower()


STRATEGY_BY_TAG = {s.tag: s for s in Strategy}


def dot(u: np.ndarray, v: np.ndarray) -> float:
    """64-bit accumulated dot product of two equal-length vectors."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.ndim != 1 or v.ndim != 1 or u.shape[0] != v.shape[0] or u.shape[0] < 1:
        raise LengthMismatch(f"incompatible vector shapes {u.shape} and {v.shape}")
    return float(np.dot(u.astype(np.float64, copy=False), v.astype(np.float64, copy=False)))


def _check_id(store: FeatureStore, sample_id: int) -> int:
    sample_id = int(sample_id)
    if not 0 <= sample_id < len(store):
        raise UnknownId(f"sample id {sample_id} out of range 0..{len(store) - 1}")
    return sample_id


def strategy_score(
    store: FeatureStore, strategy: Strategy, query_id: int, candidate_id: int
) -> float:
    """Score of one (query, candidate) pair under a strategy; -inf on zero rows."""
    q = _check_id(store, query_id)
    c = _check_id(store, candidate_id)
    qmod, cmod = strategy.query_modality, strategy.candidate_modality
    if store.zero_rows(qmod)[q] or store.zero_rows(cmod)[c]:
        return float("-inf")
    return dot(store.rows64(qmod)[q], store.rows64(cmod)[c])


def candidate_scores(
    store: FeatureStore, strategy: Strategy, query_id: int, candidate_ids: np.ndarray
) -> np.ndarray:
    """Strategy scores of one query against many candidates (float64).

    Zero rows (query or candidate side) yield -inf.
    """
    q = _check_id(store, query_id)
    cand = np.asarray(candidate_ids, dtype=np.int64)
    if cand.size and (cand.min() < 0 or cand.max() >= len(store)):
        raise UnknownId("candidate id out of range")
    qmod, cmod = strategy.query_modality, strategy.candidate_modality
    if store.zero_rows(qmod)[q]:
        return np.full(cand.shape, float("-inf"))
    scores = store.rows64(cmod)[cand] @ store.rows64(qmod)[q]
    scores[store.zero_rows(cmod)[cand]] = float("-inf")
    return scores


def cti(store: FeatureStore, caption_id: int, image_id: int) -> float:
    """CLIP text-image score of (caption, image); -inf on zero rows."""
    cap = _check_id(store, caption_id)
    img = _check_id(store, image_id)
    if store.zero_rows(Modality.CLIP_TEXT)[cap] or store.zero_rows(Modality.CLIP_IMAGE)[img]:
        return float("-inf")
    return dot(store.rows64(Modality.CLIP_TEXT)[cap], store.rows64(Modality.CLIP_IMAGE)[img])


def cti_vector(
    store: FeatureStore, caption_id: int, image_ids: np.ndarray
) -> np.ndarray:
    """CTI of one caption against many images (float64); -inf on zero rows."""
    cap = _check_id(store, caption_id)
    imgs = np.asarray(image_ids, dtype=np.int64)
    if imgs.size and (imgs.min() < 0 or imgs.max() >= len(store)):
        raise UnknownId("image id out of range")
    if store.zero_rows(Modality.CLIP_TEXT)[cap]:
        return np.full(imgs.shape, float("-inf"))
    values = store.rows64(Modality.CLIP_IMAGE)[imgs] @ store.rows64(Modality.CLIP_TEXT)[cap]
    values[store.zero_rows(Modality.CLIP_IMAGE)[imgs]] = float("-inf")
    return values
