"""Falsified-pair matching: per-query candidate ranking and selection.

Selection rule per query: candidates are ranked by strategy score (ties by
ascending sample id), ineligible candidates are skipped, and the best-ranked
candidate whose falsified CTI exceeds the pristine CTI is selected; if none
exists, the best-ranked eligible candidate is selected.

match_bruteforce re-implements the same contract literally (full sort, full
high/low partition, no early exit, independent ranking code) and serves as
the oracle for the fast path. Both paths recompute the stored score and CTI
fields through the same single-pair kernels, so equal selections imply
bit-equal results.
"""

from __future__ import annotations

import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import scoring
from .constraints import (
    PLACE_SIM_MAX,
    TEMPORAL_GAP_SECONDS,
    check_pristine_quality,
)
from .errors import InvalidConfig, UnknownId
from .scoring import Strategy
from .store import EntityLabel, FeatureStore, Modality

QUERY_BLOCK = 256


class Partition(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class MatchResult:
    caption_id: int
    image_id: int
    strategy: Strategy
    score: float
    cti_p: float
    cti_f: float
    in_high_set: bool


@dataclass(frozen=True)
class ChunkAssignment:
    chunk_id: int
    partition: Partition
    member_ids: tuple[int, ...]


# --- per-store eligibility context ------------------------------------------

class _MatchContext:
    """Precomputed per-record arrays and entity postings for one store."""

    def __init__(self, store: FeatureStore):
        manifest = store.manifest
        n = len(manifest)
        self.n = n
        self.ts = np.fromiter((r.timestamp for r in manifest), np.int64, n)
        self.quality = np.fromiter(
            (check_pristine_quality(r).accepted for r in manifest), bool, n
        )
        self.has_person = np.fromiter((r.has_person_entity for r in manifest), bool, n)
        self.bbox = np.fromiter((r.has_person_bbox for r in manifest), bool, n)
        self.role_excluded = np.fromiter(
            (r.person_role_excluded for r in manifest), bool, n
        )
        self.generic = np.fromiter((r.is_generic_caption for r in manifest), bool, n)

        # keys_by_sample[i]: (key, person-labeled on i's side, non-person-labeled
        # on i's side) per overlap key of record i.
        self.keys_by_sample: list[list[tuple[tuple[str, str], bool, bool]]] = []
        postings_all: dict[tuple[str, str], list[int]] = {}
        postings_person: dict[tuple[str, str], list[int]] = {}
        postings_nonperson: dict[tuple[str, str], list[int]] = {}
        for rec in manifest:
            entry = []
            for key, labels in rec.overlap_keys().items():
                is_p = EntityLabel.PERSON in labels
                is_np = bool(labels - {EntityLabel.PERSON})
                entry.append((key, is_p, is_np))
                postings_all.setdefault(key, []).append(rec.sample_id)
                if is_p:
                    postings_person.setdefault(key, []).append(rec.sample_id)
                if is_np:
                    postings_nonperson.setdefault(key, []).append(rec.sample_id)
            self.keys_by_sample.append(entry)
        self.postings_all = {k: np.array(v, np.int64) for k, v in postings_all.items()}
        self.postings_person = {
            k: np.array(v, np.int64) for k, v in postings_person.items()
        }
        self.postings_nonperson = {
            k: np.array(v, np.int64) for k, v in postings_nonperson.items()
        }

    def overlap_flags(self, query_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Full-corpus flags: shares a person-labeled / non-person-labeled key
        with the query (label sets united across both sides of each pair)."""
        person = np.zeros(self.n, bool)
        nonperson = np.zeros(self.n, bool)
        for key, q_person, q_nonperson in self.keys_by_sample[query_id]:
            sharers = self.postings_all[key]
            if q_person:
                person[sharers] = True
            else:
                hits = self.postings_person.get(key)
                if hits is not None:
                    person[hits] = True
            if q_nonperson:
                nonperson[sharers] = True
            else:
                hits = self.postings_nonperson.get(key)
                if hits is not None:
                    nonperson[hits] = True
        return person, nonperson


_context_cache: "weakref.WeakKeyDictionary[FeatureStore, _MatchContext]" = (
    weakref.WeakKeyDictionary()
)


def _context(store: FeatureStore) -> _MatchContext:
    ctx = _context_cache.get(store)
    if ctx is None:
        ctx = _MatchContext(store)
        _context_cache[store] = ctx
    return ctx


class _EligibilityBatch:
    """Vectorized pair filter for one (store, strategy, candidate list).

    mask(q)[i] is True iff candidate_ids[i] passes pristine quality and the
    pair (q, candidate_ids[i]) passes every strategy rule; it must agree with
    constraints.check_pair exactly (cross-checked by tests).
    """

    def __init__(self, store: FeatureStore, strategy: Strategy, candidate_ids: np.ndarray):
        self.store = store
        self.strategy = strategy
        self.ctx = _context(store)
        cand = np.asarray(candidate_ids, np.int64)
        if cand.size and (cand.min() < 0 or cand.max() >= len(store)):
            raise UnknownId("candidate id out of range")
        self.cand = cand
        self.cand_ts = self.ctx.ts[cand]
        self.cand_quality = self.ctx.quality[cand]
        if strategy is Strategy.PERSON_SBERT_TEXT_TEXT:
            self.cand_person_ok = (
                self.ctx.has_person[cand]
                & self.ctx.bbox[cand]
                & ~self.ctx.role_excluded[cand]
                & ~self.ctx.generic[cand]
            )
            self.place_rows = store.rows64(Modality.PLACE_IMAGE)[cand]
        elif strategy is Strategy.SCENE_RESNET_PLACE:
            self.cand_no_person = ~self.ctx.has_person[cand]

    def mask(self, query_id: int) -> np.ndarray:
        q = int(query_id)
        if not 0 <= q < len(self.store):
            raise UnknownId(f"sample id {q} not in store")
        ctx = self.ctx
        base = (
            self.cand_quality
            & (self.cand != q)
            & (np.abs(self.cand_ts - ctx.ts[q]) >= TEMPORAL_GAP_SECONDS)
        )
        person_f, nonperson_f = ctx.overlap_flags(q)
        shares_person = person_f[self.cand]
        shares_nonperson = nonperson_f[self.cand]

        if self.strategy is Strategy.PERSON_SBERT_TEXT_TEXT:
            query_ok = (
                ctx.has_person[q]
                and ctx.bbox[q]
                and not ctx.role_excluded[q]
                and not ctx.generic[q]
            )
            if not query_ok:
                return np.zeros(self.cand.shape, bool)
            mask = base & shares_person & ~shares_nonperson & self.cand_person_ok
            place_q = self.store.rows64(Modality.PLACE_IMAGE)[q]
            mask &= (self.place_rows @ place_q) < PLACE_SIM_MAX
            return mask

        mask = base & ~shares_person & ~shares_nonperson
        if self.strategy is Strategy.SCENE_RESNET_PLACE:
            if ctx.has_person[q]:
                return np.zeros(self.cand.shape, bool)
            mask &= self.cand_no_person
        return mask


def eligible_mask(
    store: FeatureStore, strategy: Strategy, query_id: int, candidate_ids
) -> np.ndarray:
    """Candidate eligibility (pristine quality + pair rules) for one query."""
    return _EligibilityBatch(store, strategy, np.asarray(candidate_ids, np.int64)).mask(
        query_id
    )


# --- selection ----------------------------------------------------------------

def _result(store: FeatureStore, strategy: Strategy, q: int, c: int) -> MatchResult:
    score = scoring.strategy_score(store, strategy, q, c)
    cti_p = scoring.cti(store, q, q)
    cti_f = scoring.cti(store, q, c)
    return MatchResult(q, c, strategy, score, cti_p, cti_f, cti_f > cti_p)


def _cti_with_self(
    store: FeatureStore, q: int, cand: np.ndarray
) -> tuple[np.ndarray, float]:
    """CTI of the query caption against candidate images plus its own image,
    all taken from one vector computation so exact ties stay exact."""
    hits = np.flatnonzero(cand == q)
    if hits.size:
        values = scoring.cti_vector(store, q, cand)
        return values, float(values[hits[0]])
    extended = np.append(cand, q)
    values = scoring.cti_vector(store, q, extended)
    return values[:-1], float(values[-1])


def _select_position(
    strategy: Strategy,
    cand: np.ndarray,
    scores: np.ndarray,
    elig: np.ndarray,
    cti_vals: np.ndarray | None,
    cti_p_classify: float,
) -> int | None:
    """Position (into cand) of the selected candidate, or None."""
    considered = elig & np.isfinite(scores)
    if not considered.any():
        return None
    key = -scores if strategy.descending else scores
    if strategy is Strategy.SEM_CLIP_TEXT_IMAGE:
        # Ranking key and CTI coincide for this strategy: if the best-ranked
        # eligible candidate is not in the high set, no candidate is, so the
        # head of the ranking is always the selection.
        masked = np.where(considered, key, np.inf)
        best = masked.min()
        ties = np.flatnonzero(masked == best)
        return int(ties[np.argmin(cand[ties])])
    order = np.lexsort((cand, key))
    ranked = order[considered[order]]
    high = cti_vals[ranked] > cti_p_classify
    hits = np.flatnonzero(high)
    return int(ranked[hits[0]]) if hits.size else int(ranked[0])


def match_one(
    store: FeatureStore,
    query_id: int,
    candidate_ids,
    strategy: Strategy,
) -> MatchResult | None:
    """Match one query against an explicit candidate list.

    The caller guarantees the query passes pristine quality; candidates
    failing quality or any pair rule are skipped.
    """
    q = int(query_id)
    if not 0 <= q < len(store):
        raise UnknownId(f"sample id {q} not in store")
    cand = np.asarray(candidate_ids, np.int64)
    if cand.size == 0:
        return None
    scores = scoring.candidate_scores(store, strategy, q, cand)
    elig = eligible_mask(store, strategy, q, cand)
    if strategy is Strategy.SEM_CLIP_TEXT_IMAGE:
        cti_vals, cti_p_classify = None, 0.0
    else:
        cti_vals, cti_p_classify = _cti_with_self(store, q, cand)
    pos = _select_position(strategy, cand, scores, elig, cti_vals, cti_p_classify)
    if pos is None:
        return None
    return _result(store, strategy, q, int(cand[pos]))


def match_bruteforce(
    store: FeatureStore,
    query_id: int,
    candidate_ids,
    strategy: Strategy,
) -> MatchResult | None:
    """Reference implementation: full sort, full high/low partition, then the
    head of the concatenated partition. No early exit, independent ranking."""
    q = int(query_id)
    if not 0 <= q < len(store):
        raise UnknownId(f"sample id {q} not in store")
    cand = np.asarray(candidate_ids, np.int64)
    if cand.size == 0:
        return None
    scores = scoring.candidate_scores(store, strategy, q, cand)
    elig = eligible_mask(store, strategy, q, cand).tolist()

    triples = list(zip(scores.tolist(), cand.tolist(), range(cand.size)))
    if strategy.descending:
        triples.sort(key=lambda t: (-t[0], t[1]))
    else:
        triples.sort(key=lambda t: (t[0], t[1]))

    # Per-pair CTI exactly as scoring.cti computes it, with lookups hoisted.
    image64 = store.rows64(Modality.CLIP_IMAGE)
    image_zero = store.zero_rows(Modality.CLIP_IMAGE)
    q_text_zero = bool(store.zero_rows(Modality.CLIP_TEXT)[q])
    query_text = store.rows64(Modality.CLIP_TEXT)[q]
    cti_p_classify = scoring.cti(store, q, q)
    neg_inf = float("-inf")
    np_dot = np.dot
    high: list[int] = []
    low: list[int] = []
    for score, c, i in triples:
        if not math.isfinite(score) or not elig[i]:
            continue
        if q_text_zero or image_zero[c]:
            cti_f = neg_inf
        else:
            cti_f = float(np_dot(query_text, image64[c]))
        if cti_f > cti_p_classify:
            high.append(c)
        else:
            low.append(c)
    combined = high + low
    if not combined:
        return None
    return _result(store, strategy, q, combined[0])


# --- chunking -------------------------------------------------------------------

def assign_chunks(
    store: FeatureStore,
    chunk_size: int,
    fractions: tuple[float, float, float],
) -> list[ChunkAssignment]:
    """Cut quality-passing samples into consecutive chunks and assign each
    chunk a partition by largest-deficit proportional round-robin."""
    if chunk_size < 2:
        raise InvalidConfig("chunk_size must be >= 2")
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f <= 0.0 for f in fr):
        raise InvalidConfig("fractions must be three positive values")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise InvalidConfig(f"fractions must sum to 1, got {sum(fr)}")

    eligible = [
        rec.sample_id for rec in store.manifest if check_pristine_quality(rec).accepted
    ]
    partitions = list(Partition)
    counts = [0, 0, 0]
    assignments = []
    for chunk_id, start in enumerate(range(0, len(eligible), chunk_size)):
        members = tuple(eligible[start : start + chunk_size])
        deficits = [fr[p] * (chunk_id + 1) - counts[p] for p in range(3)]
        p = max(range(3), key=lambda i: (deficits[i], -i))
        counts[p] += 1
        assignments.append(ChunkAssignment(chunk_id, partitions[p], members))
    return assignments


# --- chunk-parallel driver -------------------------------------------------------

def _match_chunk(
    store: FeatureStore,
    strategy: Strategy,
    members: np.ndarray,
    queries: np.ndarray,
    workers: int,
) -> list[MatchResult]:
    """Match every query of one chunk against the chunk's members.

    Queries are processed in fixed blocks whose composition is independent of
    the worker count; scores come from one block matrix product per block.
    """
    batch = _EligibilityBatch(store, strategy, members)
    qmod, cmod = strategy.query_modality, strategy.candidate_modality
    cand_rows = store.rows64(cmod)[members]
    cand_zero = store.zero_rows(cmod)[members]
    query_rows = store.rows64(qmod)
    query_zero = store.zero_rows(qmod)
    want_cti = strategy is not Strategy.SEM_CLIP_TEXT_IMAGE
    if want_cti:
        image_rows = store.rows64(Modality.CLIP_IMAGE)[members]
        image_zero = store.zero_rows(Modality.CLIP_IMAGE)[members]
        text_rows = store.rows64(Modality.CLIP_TEXT)
        text_zero = store.zero_rows(Modality.CLIP_TEXT)

    blocks = [queries[i : i + QUERY_BLOCK] for i in range(0, queries.size, QUERY_BLOCK)]

    def run_block(block: np.ndarray) -> list[MatchResult]:
        scores_block = cand_rows @ query_rows[block].T
        if want_cti:
            cti_block = image_rows @ text_rows[block].T
        out = []
        for b, q in enumerate(block):
            q = int(q)
            scores = scores_block[:, b].copy()
            if query_zero[q]:
                scores[:] = -np.inf
            else:
                scores[cand_zero] = -np.inf
            if want_cti:
                cti_vals = cti_block[:, b].copy()
                if text_zero[q]:
                    cti_vals[:] = -np.inf
                else:
                    cti_vals[image_zero] = -np.inf
                pos_q = int(np.searchsorted(members, q))
                cti_p_classify = float(cti_vals[pos_q])
            else:
                cti_vals, cti_p_classify = None, 0.0
            pos = _select_position(
                strategy, members, scores, batch.mask(q), cti_vals, cti_p_classify
            )
            if pos is not None:
                out.append(_result(store, strategy, q, int(members[pos])))
        return out

    if workers <= 1 or len(blocks) <= 1:
        block_results = [run_block(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            block_results = list(pool.map(run_block, blocks))
    return [r for block in block_results for r in block]


def match_split(
    store: FeatureStore,
    chunks: list[ChunkAssignment],
    strategy: Strategy,
    workers: int = 1,
) -> dict[Partition, list[MatchResult]]:
    """Run the matcher over every chunk; candidates are the query's own chunk.

    Output is sorted by caption id within each partition and is a pure
    function of (store, chunks, strategy) regardless of worker count.
    """
    ctx = _context(store)
    results: dict[Partition, list[MatchResult]] = {p: [] for p in Partition}
    for chunk in sorted(chunks, key=lambda c: c.chunk_id):
        members = np.asarray(chunk.member_ids, np.int64)
        if members.size == 0:
            continue
        if members.min() < 0 or members.max() >= len(store):
            raise UnknownId("chunk member id out of range")
        if np.any(np.diff(members) <= 0):
            raise InvalidConfig("chunk member_ids must be strictly ascending")
        queries = members[ctx.quality[members]]
        results[chunk.partition].extend(
            _match_chunk(store, strategy, members, queries, workers)
        )
    for partition in results:
        results[partition].sort(key=lambda r: r.caption_id)
    return results
