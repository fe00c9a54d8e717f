"""Diagnostics and exports: statistics, overlap matrix, CTI-ratio audit,
retrieval sanity check, constraint re-audit, and the human-eval subset."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scoring
from .balancing import AnnotationRecord, Label, SplitDataset, LABEL_ORDER, STRATEGY_ORDER
from .constraints import FilterReason, check_pair, check_pristine_quality
from .errors import InsufficientRecords, InvalidConfig, ManifestParse
from .matcher import Partition
from .scoring import STRATEGY_BY_TAG, Strategy
from .store import FeatureStore


@dataclass
class OverlapMatrix:
    strategies: list[str]
    ratio: list[list[float]]

    def to_obj(self) -> dict:
        return {"strategies": self.strategies, "overlap": self.ratio}


def overlap_matrix(splits: dict[Strategy, SplitDataset]) -> OverlapMatrix:
    """Pairwise ratio of shared falsified (caption, image) pairs, with the
    smaller split as denominator; 0/0 counts as 0."""
    partitions = {ds.partition for ds in splits.values()}
    if len(splits) != len(Strategy) or len(partitions) != 1:
        raise InvalidConfig("overlap_matrix needs one dataset per strategy, same partition")
    falsified = [
        {
            (r.caption_id, r.image_id)
            for r in splits[s].records
            if r.label is Label.FALSIFIED
        }
        for s in Strategy
    ]
    ratio = []
    for fi in falsified:
        row = []
        for fj in falsified:
            denom = min(len(fi), len(fj))
            row.append(len(fi & fj) / denom if denom else 0.0)
        ratio.append(row)
    return OverlapMatrix([s.tag for s in Strategy], ratio)


def cti_ratio_audit(dataset: SplitDataset, store: FeatureStore) -> float:
    """Fraction of captions whose pristine image wins the CTI comparison
    strictly; ties count as falsified wins. Empty datasets report 0.5."""
    pristine = {r.caption_id: r for r in dataset.records if r.label is Label.PRISTINE}
    falsified = {r.caption_id: r for r in dataset.records if r.label is Label.FALSIFIED}
    captions = sorted(set(pristine) & set(falsified))
    if not captions:
        return 0.5
    wins = 0
    for c in captions:
        cti_p = scoring.cti(store, c, pristine[c].image_id)
        cti_f = scoring.cti(store, c, falsified[c].image_id)
        if cti_p > cti_f:
            wins += 1
    return wins / len(captions)


def retrieval_sanity(
    store: FeatureStore, num_negatives: int, trials: int, seed: int
) -> float:
    """Fraction of seeded trials where a caption's own image beats all sampled
    negative images on CTI."""
    n = len(store)
    if num_negatives < 1 or trials < 1:
        raise InvalidConfig("num_negatives and trials must be >= 1")
    if n < num_negatives + 1:
        raise InvalidConfig(f"store has {n} samples, need > num_negatives")
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        i = int(rng.integers(0, n))
        draw = rng.choice(n - 1, size=num_negatives, replace=False)
        negatives = draw + (draw >= i)
        own = scoring.cti(store, i, i)
        if all(own > scoring.cti(store, i, int(j)) for j in negatives):
            hits += 1
    return hits / trials


@dataclass
class AuditViolation:
    caption_id: int
    image_id: int
    reasons: list[str]


@dataclass
class AuditReport:
    checked: int
    violations: list[AuditViolation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_obj(self) -> dict:
        return {
            "checked": self.checked,
            "violation_count": len(self.violations),
            "violations": [
                {"caption_id": v.caption_id, "image_id": v.image_id, "reasons": v.reasons}
                for v in self.violations
            ],
        }


def audit_constraints(dataset: SplitDataset, store: FeatureStore) -> AuditReport:
    """Re-check every falsified record: both sides must pass pristine quality
    and the pair must pass every rule of its record's strategy. Pristine
    records are self-pairs and exempt from pair rules."""
    violations = []
    checked = 0
    for rec in dataset.records:
        if rec.label is not Label.FALSIFIED:
            continue
        checked += 1
        caption = store.record(rec.caption_id)
        image = store.record(rec.image_id)
        reasons: set[FilterReason] = set()
        reasons |= check_pristine_quality(caption).reason_set
        reasons |= check_pristine_quality(image).reason_set
        reasons |= check_pair(caption, image, rec.strategy, store).reason_set
        if reasons:
            ordered = [r.value for r in FilterReason if r in reasons]
            violations.append(AuditViolation(rec.caption_id, rec.image_id, ordered))
    return AuditReport(checked, violations)


def export_eval_subset(
    merged: SplitDataset, per_strategy: int, seed: int
) -> SplitDataset:
    """Seeded uniform sample of per_strategy/2 pristine and per_strategy/2
    falsified records per origin strategy."""
    if per_strategy < 2 or per_strategy % 2:
        raise InvalidConfig("per_strategy must be a positive even number")
    half = per_strategy // 2
    rng = np.random.default_rng(seed)
    out: list[AnnotationRecord] = []
    for s in Strategy:
        for label in (Label.PRISTINE, Label.FALSIFIED):
            pool = sorted(
                (r for r in merged.records if r.strategy is s and r.label is label),
                key=lambda r: r.caption_id,
            )
            if len(pool) < half:
                raise InsufficientRecords(
                    f"{s.tag}/{label.value}: need {half}, have {len(pool)}"
                )
            picks = rng.choice(len(pool), size=half, replace=False)
            out.extend(pool[int(i)] for i in sorted(int(x) for x in picks))
    out.sort(key=lambda r: (STRATEGY_ORDER[r.strategy], r.caption_id, LABEL_ORDER[r.label]))
    return SplitDataset(merged.strategy, merged.partition, out)


def dataset_stats(
    splits: dict[Strategy, dict[Partition, SplitDataset]],
    merged: dict[Partition, SplitDataset],
) -> dict:
    """Record counts per split and partition plus totals, as a JSON-ready dict."""
    partitions = list(Partition)
    obj: dict = {
        "strategies": [s.tag for s in Strategy],
        "partitions": [p.value for p in partitions],
        "splits": {
            s.tag: {p.value: len(splits[s][p].records) for p in partitions}
            for s in Strategy
        },
    }
    total_sum = {}
    total_unique = {}
    for p in partitions:
        datasets = [splits[s][p] for s in Strategy]
        total_sum[p.value] = sum(len(ds.records) for ds in datasets)
        unique = set()
        for ds in datasets:
            unique.update((r.caption_id, r.image_id, r.label) for r in ds.records)
        total_unique[p.value] = len(unique)
    obj["total_sum"] = total_sum
    obj["total_unique"] = total_unique
    obj["merged"] = {p.value: len(merged[p].records) for p in partitions}
    return obj


def stats_text(stats: dict) -> str:
    """Aligned plain-text rendering of the stats dict."""
    parts = stats["partitions"]
    rows = [("split", *parts)]
    for tag in stats["strategies"]:
        rows.append((tag, *(str(stats["splits"][tag][p]) for p in parts)))
    rows.append(("total_sum", *(str(stats["total_sum"][p]) for p in parts)))
    rows.append(("total_unique", *(str(stats["total_unique"][p]) for p in parts)))
    rows.append(("merged", *(str(stats["merged"][p]) for p in parts)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [
            row[i].rjust(widths[i]) for i in range(1, len(row))
        ]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def overlap_text(matrix: OverlapMatrix) -> str:
    """Aligned plain-text rendering of an overlap matrix."""
    width = max(len(tag) for tag in matrix.strategies)
    lines = [" " * width + "  " + "  ".join(t.rjust(width) for t in matrix.strategies)]
    for tag, row in zip(matrix.strategies, matrix.ratio):
        cells = "  ".join(f"{v:.4f}".rjust(width) for v in row)
        lines.append(tag.ljust(width) + "  " + cells)
    return "\n".join(lines) + "\n"


# --- annotation export ----------------------------------------------------------

def annotation_filename(strategy_tag: str, partition: Partition) -> str:
    return f"{strategy_tag}_{partition.value}.jsonl"


def write_annotations(path: str | Path, dataset: SplitDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in dataset.records:
            obj = {
                "caption_id": r.caption_id,
                "image_id": r.image_id,
                "label": r.label.value,
                "strategy": r.strategy.tag,
                "partition": r.partition.value,
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def read_annotations(
    path: str | Path,
    strategy_tag: str | None = None,
    partition: Partition | None = None,
) -> SplitDataset:
    """Load an annotation file; tag and partition are inferred from the
    records unless given explicitly (an empty file needs both)."""
    records = []
    partitions = set()
    tags = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            try:
                obj = json.loads(line)
                rec = AnnotationRecord(
                    caption_id=int(obj["caption_id"]),
                    image_id=int(obj["image_id"]),
                    label=Label(obj["label"]),
                    strategy=STRATEGY_BY_TAG[obj["strategy"]],
                    partition=Partition(obj["partition"]),
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise ManifestParse(f"{path} line {line_no}: {exc}")
            records.append(rec)
            partitions.add(rec.partition)
            tags.add(rec.strategy.tag)
    if len(partitions) > 1:
        raise ManifestParse(f"{path}: mixed partitions")
    if partition is None:
        if not partitions:
            raise ManifestParse(f"{path}: empty file needs an explicit partition")
        partition = partitions.pop()
    if strategy_tag is None:
        strategy_tag = tags.pop() if len(tags) == 1 else "merged"
    return SplitDataset(strategy_tag, partition, records)
