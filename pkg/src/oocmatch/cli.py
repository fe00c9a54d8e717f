"""Command-line interface: validate, generate, report, synth.

Exit codes: 0 success, 1 validation/audit failures, 2 configuration or input
errors. Generation is deterministic: the output tree is a pure function of
(store bytes, config), independent of worker count, and a run manifest
records the effective config plus a content hash of every output file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import balancing, matcher, reports
from .balancing import MERGED_TAG, SplitDataset
from .errors import InvalidConfig, OocmatchError, UnknownReport
from .matcher import Partition
from .reports import annotation_filename
from .scoring import STRATEGY_BY_TAG, Strategy
from .store import FeatureStore, load_store, validate_store, write_store
from .synth import ModalityConfig, SynthConfig, generate_synthetic

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2

REPORT_NAMES = ("stats", "overlap", "cti-ratio", "retrieval-sanity", "audit", "eval-subset")


@dataclass
class PipelineConfig:
    store_path: str
    output_dir: str
    chunk_size: int = 40_000
    fractions: tuple[float, float, float] = (0.889, 0.0555, 0.0555)
    strategies: list[str] = field(default_factory=lambda: [s.tag for s in Strategy])
    seed: int = 0
    worker_count: int = 0

    def validate(self) -> None:
        if not self.store_path or not self.output_dir:
            raise InvalidConfig("store_path and output_dir are required")
        if self.chunk_size < 2:
            raise InvalidConfig("chunk_size must be >= 2")
        fr = self.fractions
        if len(fr) != 3 or any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise InvalidConfig("fractions must be three positive values summing to 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if self.worker_count < 0:
            raise InvalidConfig("worker_count must be >= 0")
        for tag in self.strategies:
            if tag not in STRATEGY_BY_TAG:
                raise InvalidConfig(f"unknown strategy {tag!r}")
        if len(set(self.strategies)) != len(self.strategies):
            raise InvalidConfig("duplicate strategy tags")

    def effective_workers(self) -> int:
        if self.worker_count > 0:
            return self.worker_count
        return max(1, os.cpu_count() or 1)


def load_pipeline_config(path: str | None, overrides: argparse.Namespace) -> PipelineConfig:
    obj: dict = {}
    if path:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InvalidConfig(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config file is not valid JSON: {exc}")
    known = {
        "store_path", "output_dir", "chunk_size", "fractions",
        "strategies", "seed", "worker_count",
    }
    unknown = set(obj) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    cfg = PipelineConfig(
        store_path=obj.get("store_path", ""),
        output_dir=obj.get("output_dir", ""),
        chunk_size=int(obj.get("chunk_size", 40_000)),
        fractions=tuple(obj.get("fractions", (0.889, 0.0555, 0.0555))),
        strategies=list(obj.get("strategies", [s.tag for s in Strategy])),
        seed=int(obj.get("seed", 0)),
        worker_count=int(obj.get("worker_count", 0)),
    )
    if getattr(overrides, "store", None):
        cfg.store_path = overrides.store
    if getattr(overrides, "out", None):
        cfg.output_dir = overrides.out
    if getattr(overrides, "seed", None) is not None:
        cfg.seed = overrides.seed
    if getattr(overrides, "workers", None) is not None:
        cfg.worker_count = overrides.workers
    if getattr(overrides, "chunk_size", None) is not None:
        cfg.chunk_size = overrides.chunk_size
    if getattr(overrides, "strategy", None):
        cfg.strategies = list(overrides.strategy)
    cfg.validate()
    return cfg


def _print_json(obj: dict) -> None:
    print(json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True))


def _error_obj(stage: str, exc: Exception) -> dict:
    return {"error": {"stage": stage, "type": type(exc).__name__, "message": str(exc)}}


# --- validate -------------------------------------------------------------------

def cmd_validate(store_path: str) -> int:
    try:
        store = load_store(store_path)
    except OocmatchError as exc:
        _print_json(_error_obj("load", exc))
        return EXIT_CONFIG
    report = validate_store(store)
    _print_json(report.to_obj())
    return EXIT_OK if not report.failures else EXIT_FAILURES


# --- generate -------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _merged_seed(base_seed: int, partition: Partition) -> int:
    return base_seed + list(Partition).index(partition)


def run_pipeline(cfg: PipelineConfig, store: FeatureStore, out_dir: Path) -> dict:
    """Execute every stage into out_dir; returns the run manifest object."""
    strategies = [STRATEGY_BY_TAG[tag] for tag in cfg.strategies]
    workers = cfg.effective_workers()
    partitions = list(Partition)

    chunks = matcher.assign_chunks(store, cfg.chunk_size, cfg.fractions)

    post_filter_ratio: dict[str, dict[str, float]] = {}
    post_filter_counts: dict[str, dict[str, int]] = {}
    final_ratio: dict[str, dict[str, float]] = {}
    final_splits: dict[Strategy, dict[Partition, SplitDataset]] = {}
    for strategy in strategies:
        split_results = matcher.match_split(store, chunks, strategy, workers=workers)
        final_splits[strategy] = {}
        post_filter_ratio[strategy.tag] = {}
        post_filter_counts[strategy.tag] = {}
        final_ratio[strategy.tag] = {}
        for partition in partitions:
            filtered = balancing.adversarial_filter(split_results[partition])
            dataset = balancing.build_split(filtered, strategy, partition)
            post_filter_counts[strategy.tag][partition.value] = len(filtered)
            post_filter_ratio[strategy.tag][partition.value] = reports.cti_ratio_audit(
                dataset, store
            )
            if strategy is Strategy.PERSON_SBERT_TEXT_TEXT:
                dataset = balancing.enforce_image_balance(dataset)
            final_splits[strategy][partition] = dataset
            final_ratio[strategy.tag][partition.value] = reports.cti_ratio_audit(
                dataset, store
            )

    all_strategies = len(strategies) == len(Strategy)
    merged: dict[Partition, SplitDataset] = {}
    merged_seeds: dict[str, int] = {}
    if all_strategies:
        for partition in partitions:
            seed = _merged_seed(cfg.seed, partition)
            merged_seeds[partition.value] = seed
            merged[partition] = balancing.build_merged(
                {s: final_splits[s][partition] for s in Strategy}, seed
            )

    out_dir.mkdir(parents=True, exist_ok=True)
    file_list: list[Path] = []
    for strategy in strategies:
        for partition in partitions:
            path = out_dir / annotation_filename(strategy.tag, partition)
            reports.write_annotations(path, final_splits[strategy][partition])
            file_list.append(path)
    if all_strategies:
        for partition in partitions:
            path = out_dir / annotation_filename(MERGED_TAG, partition)
            reports.write_annotations(path, merged[partition])
            file_list.append(path)

        stats = reports.dataset_stats(final_splits, merged)
        stats_json = out_dir / "stats.json"
        stats_json.write_text(
            json.dumps(stats, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        (out_dir / "stats.txt").write_text(reports.stats_text(stats), encoding="utf-8")
        file_list += [stats_json, out_dir / "stats.txt"]

        overlap_lines = []
        for partition in partitions:
            matrix = reports.overlap_matrix(
                {s: final_splits[s][partition] for s in Strategy}
            )
            path = out_dir / f"overlap_{partition.value}.json"
            path.write_text(
                json.dumps(matrix.to_obj(), ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )
            file_list.append(path)
            overlap_lines.append(partition.value + "\n" + reports.overlap_text(matrix))
        overlap_txt = out_dir / "overlap.txt"
        overlap_txt.write_text("\n".join(overlap_lines), encoding="utf-8")
        file_list.append(overlap_txt)

    audit_obj: dict = {}
    violation_total = 0
    audited: list[tuple[str, SplitDataset]] = [
        (s.tag, final_splits[s][p]) for s in strategies for p in partitions
    ]
    if all_strategies:
        audited += [(MERGED_TAG, merged[p]) for p in partitions]
    for tag, dataset in audited:
        report = reports.audit_constraints(dataset, store)
        violation_total += len(report.violations)
        audit_obj[f"{tag}_{dataset.partition.value}"] = report.to_obj()
    audit_path = out_dir / "audit.json"
    audit_path.write_text(
        json.dumps(audit_obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    file_list.append(audit_path)

    manifest = {
        "config": {
            "store_path": cfg.store_path,
            "chunk_size": cfg.chunk_size,
            "fractions": list(cfg.fractions),
            "strategies": cfg.strategies,
            "seed": cfg.seed,
        },
        "merged_seeds": merged_seeds,
        "post_filter_counts": post_filter_counts,
        "post_filter_cti_ratio": post_filter_ratio,
        "final_cti_ratio": final_ratio,
        "audit_violations": violation_total,
        "files": {p.name: _sha256(p) for p in sorted(file_list)},
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return manifest


def cmd_generate(cfg: PipelineConfig) -> int:
    stage = "load"
    out_dir = Path(cfg.output_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        _print_json(
            _error_obj("preflight", InvalidConfig(f"output dir {out_dir} is not empty"))
        )
        return EXIT_CONFIG
    tmp_dir = out_dir.parent / f".{out_dir.name}.generate-tmp"
    if tmp_dir.exists():
        shutil.rmtree(tmp_dir)
    try:
        store = load_store(cfg.store_path)
        stage = "pipeline"
        manifest = run_pipeline(cfg, store, tmp_dir)
        stage = "publish"
        if out_dir.exists():
            out_dir.rmdir()
        os.rename(tmp_dir, out_dir)
    except (OocmatchError, OSError) as exc:
        if tmp_dir.exists():
            shutil.rmtree(tmp_dir)
        _print_json(_error_obj(stage, exc))
        return EXIT_CONFIG
    _print_json(
        {
            "output_dir": str(out_dir),
            "audit_violations": manifest["audit_violations"],
            "files": len(manifest["files"]),
        }
    )
    return EXIT_OK if manifest["audit_violations"] == 0 else EXIT_FAILURES


# --- report ---------------------------------------------------------------------

def _load_split(data_dir: Path, tag: str, partition: Partition) -> SplitDataset:
    path = data_dir / annotation_filename(tag, partition)
    if not path.is_file():
        raise InvalidConfig(f"missing annotation file {path}")
    return reports.read_annotations(path, strategy_tag=tag, partition=partition)


def cmd_report(args: argparse.Namespace) -> int:
    data_dir = Path(args.data_dir)
    name = args.report
    if name not in REPORT_NAMES:
        raise UnknownReport(f"unknown report {name!r}; expected one of {REPORT_NAMES}")
    partition = Partition(args.partition)

    if name == "stats":
        splits = {
            s: {p: _load_split(data_dir, s.tag, p) for p in Partition} for s in Strategy
        }
        merged = {p: _load_split(data_dir, MERGED_TAG, p) for p in Partition}
        obj = reports.dataset_stats(splits, merged)
    elif name == "overlap":
        matrix = reports.overlap_matrix(
            {s: _load_split(data_dir, s.tag, partition) for s in Strategy}
        )
        obj = matrix.to_obj()
    elif name == "cti-ratio":
        store = load_store(_require_store(args))
        obj = {"partition": partition.value, "cti_ratio": {}}
        for s in Strategy:
            ds = _load_split(data_dir, s.tag, partition)
            obj["cti_ratio"][s.tag] = reports.cti_ratio_audit(ds, store)
        merged_path = data_dir / annotation_filename(MERGED_TAG, partition)
        if merged_path.is_file():
            ds = reports.read_annotations(merged_path, MERGED_TAG, partition)
            obj["cti_ratio"][MERGED_TAG] = reports.cti_ratio_audit(ds, store)
    elif name == "retrieval-sanity":
        store = load_store(_require_store(args))
        accuracy = reports.retrieval_sanity(store, args.negatives, args.trials, args.seed or 0)
        obj = {
            "num_negatives": args.negatives,
            "trials": args.trials,
            "seed": args.seed or 0,
            "accuracy": accuracy,
        }
    elif name == "audit":
        store = load_store(_require_store(args))
        obj = {}
        total = 0
        for s in Strategy:
            for p in Partition:
                path = data_dir / annotation_filename(s.tag, p)
                if not path.is_file():
                    continue
                ds = reports.read_annotations(path, s.tag, p)
                report = reports.audit_constraints(ds, store)
                total += len(report.violations)
                obj[f"{s.tag}_{p.value}"] = report.to_obj()
        for p in Partition:
            path = data_dir / annotation_filename(MERGED_TAG, p)
            if path.is_file():
                ds = reports.read_annotations(path, MERGED_TAG, p)
                report = reports.audit_constraints(ds, store)
                total += len(report.violations)
                obj[f"{MERGED_TAG}_{p.value}"] = report.to_obj()
        obj["violation_total"] = total
        _write_report(args, obj)
        return EXIT_OK if total == 0 else EXIT_FAILURES
    else:  # eval-subset
        merged = _load_split(data_dir, MERGED_TAG, partition)
        per_strategy = args.per_strategy
        subset = reports.export_eval_subset(merged, per_strategy, args.seed or 0)
        out_path = (
            Path(args.out)
            if args.out
            else data_dir / f"eval_subset_{partition.value}.jsonl"
        )
        reports.write_annotations(out_path, subset)
        obj = {
            "partition": partition.value,
            "per_strategy": per_strategy,
            "seed": args.seed or 0,
            "records": len(subset.records),
            "path": str(out_path),
        }
        _print_json(obj)
        return EXIT_OK

    _write_report(args, obj)
    return EXIT_OK


def _require_store(args: argparse.Namespace) -> str:
    if not args.store:
        raise InvalidConfig("this report needs --store")
    return args.store


def _write_report(args: argparse.Namespace, obj: dict) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(
            json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    _print_json(obj)


# --- synth ----------------------------------------------------------------------

def synth_config_from_obj(obj: dict) -> SynthConfig:
    kwargs = dict(obj)
    for name in ("clip_text", "clip_image", "sbert_text", "place_image"):
        if name in kwargs:
            kwargs[name] = ModalityConfig(**kwargs[name])
    for name in ("fractions", "other_entities_range", "word_range"):
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(f"bad synth config: {exc}")


def cmd_synth(args: argparse.Namespace) -> int:
    obj: dict = {}
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"bad synth config file: {exc}")
    if args.n is not None:
        obj["n"] = args.n
    config = synth_config_from_obj(obj)
    store = generate_synthetic(config, args.seed or 0)
    write_store(store, args.out)
    _print_json({"out": args.out, "n": len(store), "seed": args.seed or 0})
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oocmatch",
        description="Generate and audit out-of-context image-caption match datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a feature store")
    p_validate.add_argument("--store", required=True)

    p_generate = sub.add_parser("generate", help="run the full dataset pipeline")
    p_generate.add_argument("--config")
    p_generate.add_argument("--store")
    p_generate.add_argument("--out")
    p_generate.add_argument("--seed", type=int)
    p_generate.add_argument("--workers", type=int)
    p_generate.add_argument("--chunk-size", dest="chunk_size", type=int)
    p_generate.add_argument("--strategy", action="append")

    p_report = sub.add_parser("report", help="compute a report over generated data")
    p_report.add_argument("data_dir")
    p_report.add_argument("--report", required=True, choices=REPORT_NAMES)
    p_report.add_argument("--store")
    p_report.add_argument("--partition", default="train", choices=[p.value for p in Partition])
    p_report.add_argument("--per-strategy", dest="per_strategy", type=int, default=50)
    p_report.add_argument("--seed", type=int)
    p_report.add_argument("--negatives", type=int, default=4)
    p_report.add_argument("--trials", type=int, default=2000)
    p_report.add_argument("--out")

    p_synth = sub.add_parser("synth", help="write a synthetic feature store")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--n", type=int)
    p_synth.add_argument("--config")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.store)
        if args.command == "generate":
            cfg = load_pipeline_config(args.config, args)
            return cmd_generate(cfg)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "synth":
            return cmd_synth(args)
    except OocmatchError as exc:
        _print_json(_error_obj(args.command, exc))
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _print_json(_error_obj(args.command, exc))
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
