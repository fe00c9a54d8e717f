"""Writer for the downstream feature-store wire format.

Independent implementation of the consumer's documented layout: manifest
lines with a fixed key order, and "NCLP" embedding files (little-endian
header: magic, version u32=1, modality code u32, dim u32, row count u64,
normalized flag byte, 7 zero bytes, then float32 rows).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NCLP"
FORMAT_VERSION = 1
MODALITY_CODES = {
    "clip_text": 0,
    "clip_image": 1,
    "sbert_text": 2,
    "place_image": 3,
}

_MANIFEST_KEYS = (
    "sample_id",
    "source",
    "timestamp",
    "caption",
    "word_count",
    "named_entities",
    "person_role_excluded",
    "is_generic_caption",
    "has_person_bbox",
    "image_ok",
)


def write_embedding(path: str | Path, modality: str, rows: np.ndarray, normalized: bool = True) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    header = struct.pack(
        "<4sIIIQB7x",
        MAGIC,
        FORMAT_VERSION,
        MODALITY_CODES[modality],
        rows.shape[1],
        rows.shape[0],
        1 if normalized else 0,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes(order="C"))


def write_manifest(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            ordered = {key: rec[key] for key in _MANIFEST_KEYS}
            fh.write(json.dumps(ordered, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def write_idmap(path: str | Path, pairs: list[tuple[int, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample_id, external_id in pairs:
            obj = {"sample_id": sample_id, "external_id": external_id}
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
