"""Post-matching dataset shaping.

Adversarial CTI filtering trims the majority of the high/low partition until
both sets are the same size, so an off-the-shelf CTI ranker picks the
pristine image exactly half the time. Split construction pairs every
surviving match with its pristine twin, the person split is additionally
balanced on images, and the merged split draws equal, id-disjoint
contributions from all four strategies.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateCaption, InvalidConfig
from .matcher import MatchResult, Partition
from .scoring import Strategy

MERGED_TAG = "merged"


class Label(enum.Enum):
    PRISTINE = "pristine"
    FALSIFIED = "falsified"


LABEL_ORDER = {Label.PRISTINE: 0, Label.FALSIFIED: 1}
STRATEGY_ORDER = {s: i for i, s in enumerate(Strategy)}


@dataclass(frozen=True)
class AnnotationRecord:
    caption_id: int
    image_id: int
    label: Label
    strategy: Strategy
    partition: Partition


@dataclass
class SplitDataset:
    strategy: str  # a Strategy tag, or "merged"
    partition: Partition
    records: list[AnnotationRecord]

    def by_label(self, label: Label) -> list[AnnotationRecord]:
        return [r for r in self.records if r.label is label]


def _record_sort_key(rec: AnnotationRecord) -> tuple:
    return (STRATEGY_ORDER[rec.strategy], rec.caption_id, LABEL_ORDER[rec.label])


def adversarial_filter(matches: list[MatchResult]) -> list[MatchResult]:
    """Remove largest-delta matches from the majority CTI set until the high
    and low sets have equal size. Input order is preserved."""
    matches = list(matches)
    high_idx = [i for i, m in enumerate(matches) if m.in_high_set]
    low_idx = [i for i, m in enumerate(matches) if not m.in_high_set]
    surplus = len(low_idx) - len(high_idx)
    if surplus == 0:
        return matches
    if surplus > 0:
        victims = sorted(
            low_idx,
            key=lambda i: (-(matches[i].cti_p - matches[i].cti_f), matches[i].caption_id),
        )[:surplus]
    else:
        victims = sorted(
            high_idx,
            key=lambda i: (-(matches[i].cti_f - matches[i].cti_p), matches[i].caption_id),
        )[:-surplus]
    drop = set(victims)
    return [m for i, m in enumerate(matches) if i not in drop]


def build_split(
    matches: list[MatchResult], strategy: Strategy, partition: Partition
) -> SplitDataset:
    """Emit one pristine and one falsified record per match, caption-balanced
    by construction, sorted by (caption_id, label)."""
    seen: set[int] = set()
    records = []
    for m in matches:
        if m.caption_id in seen:
            raise DuplicateCaption(f"caption {m.caption_id} appears in two matches")
        seen.add(m.caption_id)
        records.append(
            AnnotationRecord(m.caption_id, m.caption_id, Label.PRISTINE, strategy, partition)
        )
        records.append(
            AnnotationRecord(m.caption_id, m.image_id, Label.FALSIFIED, strategy, partition)
        )
    records.sort(key=lambda r: (r.caption_id, LABEL_ORDER[r.label]))
    return SplitDataset(strategy.tag, partition, records)


def enforce_image_balance(dataset: SplitDataset) -> SplitDataset:
    """Keep the greedy-deterministic subset whose pristine and falsified
    image multisets coincide.

    Captions are visited in ascending order; each falsified image may be
    claimed once, and a caption survives only while its falsified image is
    itself a kept caption's pristine image (i.e. survivors form cycles of the
    caption -> falsified-image mapping)."""
    pristine = {r.caption_id: r for r in dataset.records if r.label is Label.PRISTINE}
    falsified = {r.caption_id: r for r in dataset.records if r.label is Label.FALSIFIED}
    captions = sorted(set(pristine) & set(falsified))

    claimed: dict[int, int] = {}
    for c in captions:
        image = falsified[c].image_id
        if image not in claimed:
            claimed[image] = c
    kept = set(claimed.values())

    changed = True
    while changed:
        changed = False
        for c in sorted(kept):
            if falsified[c].image_id not in kept:
                kept.discard(c)
                changed = True

    records = [pristine[c] for c in kept] + [falsified[c] for c in kept]
    records.sort(key=lambda r: (r.caption_id, LABEL_ORDER[r.label]))
    return SplitDataset(dataset.strategy, dataset.partition, records)


def build_merged(splits: dict[Strategy, SplitDataset], seed: int) -> SplitDataset:
    """Merge equal per-strategy contributions with pairwise-disjoint caption
    and image ids across strategies.

    Claims proceed round-robin over strategies in seeded-shuffled caption
    order; a caption-pair is claimable when neither its caption/pristine id
    nor its falsified image id is already used by another strategy. The final
    count per strategy is trimmed to the smallest claimed count."""
    partitions = {ds.partition for ds in splits.values()}
    if len(splits) != len(Strategy) or len(partitions) != 1:
        raise InvalidConfig("build_merged needs one dataset per strategy, same partition")
    partition = partitions.pop()

    rng = np.random.default_rng(seed)
    pristine: dict[Strategy, dict[int, AnnotationRecord]] = {}
    falsified: dict[Strategy, dict[int, AnnotationRecord]] = {}
    shuffled: dict[Strategy, list[int]] = {}
    for s in Strategy:
        ds = splits[s]
        pristine[s] = {r.caption_id: r for r in ds.records if r.label is Label.PRISTINE}
        falsified[s] = {r.caption_id: r for r in ds.records if r.label is Label.FALSIFIED}
        captions = sorted(set(pristine[s]) & set(falsified[s]))
        order = np.array(captions, np.int64)
        rng.shuffle(order)
        shuffled[s] = [int(c) for c in order]

    used_images: dict[Strategy, set[int]] = {s: set() for s in Strategy}
    kept: dict[Strategy, list[int]] = {s: [] for s in Strategy}
    cursor = {s: 0 for s in Strategy}
    active = list(Strategy)
    while active:
        for s in list(active):
            claimed = False
            while cursor[s] < len(shuffled[s]):
                c = shuffled[s][cursor[s]]
                cursor[s] += 1
                f = falsified[s][c].image_id
                conflict = any(
                    c in used_images[o] or f in used_images[o]
                    for o in Strategy
                    if o is not s
                )
                if not conflict:
                    kept[s].append(c)
                    used_images[s].add(c)
                    used_images[s].add(f)
                    claimed = True
                    break
            if not claimed:
                active.remove(s)

    k = min(len(kept[s]) for s in Strategy)
    records = []
    for s in Strategy:
        for c in kept[s][:k]:
            records.append(pristine[s][c])
            records.append(falsified[s][c])
    records.sort(key=_record_sort_key)
    return SplitDataset(MERGED_TAG, partition, records)


def dataset_totals(splits: list[SplitDataset]) -> tuple[int, int]:
    """Record count with duplicates, and count of distinct
    (caption_id, image_id, label) triples."""
    total = 0
    unique: set[tuple[int, int, Label]] = set()
    for ds in splits:
        total += len(ds.records)
        unique.update((r.caption_id, r.image_id, r.label) for r in ds.records)
    return total, len(unique)


def is_caption_balanced(dataset: SplitDataset) -> bool:
    """Every caption id appears exactly once pristine and once falsified."""
    pristine = Counter(r.caption_id for r in dataset.records if r.label is Label.PRISTINE)
    falsified = Counter(r.caption_id for r in dataset.records if r.label is Label.FALSIFIED)
    return (
        pristine == falsified
        and all(v == 1 for v in pristine.values())
        and len(dataset.records) == 2 * len(pristine)
    )


def is_image_balanced(dataset: SplitDataset) -> bool:
    """Pristine and falsified image multisets coincide."""
    pristine = Counter(r.image_id for r in dataset.records if r.label is Label.PRISTINE)
    falsified = Counter(r.image_id for r in dataset.records if r.label is Label.FALSIFIED)
    return pristine == falsified
