"""Raw corpus input: records.jsonl plus image files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import CorpusParse

RECORDS_NAME = "records.jsonl"
_FIELDS = ("external_id", "image_path", "caption", "timestamp", "source")


@dataclass(frozen=True)
class RawCorpusRecord:
    external_id: str
    image_path: Path
    caption: str
    timestamp: int  # epoch seconds, midnight UTC of the record date
    source: str


def parse_date(value: str) -> int:
    """Day-granularity date (YYYY-MM-DD) to midnight-UTC epoch seconds."""
    try:
        day = datetime.strptime(value, "%Y-%m-%d")
    except (TypeError, ValueError) as exc:
        raise CorpusParse(f"bad date {value!r}: {exc}")
    return int(day.replace(tzinfo=timezone.utc).timestamp())


def read_corpus(corpus_dir: str | Path) -> list[RawCorpusRecord]:
    root = Path(corpus_dir)
    path = root / RECORDS_NAME
    if not path.is_file():
        raise CorpusParse(f"missing {path}")
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParse(f"line {line_no}: {exc}")
            missing = set(_FIELDS) - set(obj)
            if missing:
                raise CorpusParse(f"line {line_no}: missing fields {sorted(missing)}")
            external_id = str(obj["external_id"])
            if external_id in seen:
                raise CorpusParse(f"line {line_no}: duplicate external_id {external_id}")
            seen.add(external_id)
            image_path = Path(obj["image_path"])
            if not image_path.is_absolute():
                image_path = root / image_path
            records.append(
                RawCorpusRecord(
                    external_id=external_id,
                    image_path=image_path,
                    caption=str(obj["caption"]),
                    timestamp=parse_date(obj["timestamp"]),
                    source=str(obj["source"]),
                )
            )
    return records
