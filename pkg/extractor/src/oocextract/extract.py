"""Extraction pipeline: raw corpus in, feature-store files out.

Per-record failures degrade to flags: an unreadable image yields
image_ok=false with zero image rows rather than aborting the batch.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import read_corpus
from .encoders import ModelBundle, ModelConfig, build_models
from .nlp import person_roles_excluded
from .storewriter import write_embedding, write_idmap, write_manifest


def _load_image(path: Path) -> Image.Image | None:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, ValueError):
        return None


def extract_record(raw, sample_id: int, models: ModelBundle) -> tuple[dict, dict]:
    """One corpus record to (manifest object, embedding rows by modality)."""
    image = _load_image(raw.image_path)
    image_ok = image is not None

    rows = {
        "clip_text": models.clip_text(raw.caption),
        "sbert_text": models.sbert_text(raw.caption),
    }
    if image_ok:
        rows["clip_image"] = models.clip_image(image)
        rows["place_image"] = models.place_image(image)
        has_person_bbox = bool(models.person_detector(image))
    else:
        rows["clip_image"] = models.clip_image.zero()
        rows["place_image"] = models.place_image.zero()
        has_person_bbox = False

    mentions = models.ner(raw.caption)
    role_excluded = person_roles_excluded(raw.caption, mentions)
    is_generic = bool(models.generic_classifier(raw.caption))

    manifest_obj = {
        "sample_id": sample_id,
        "source": raw.source,
        "timestamp": raw.timestamp,
        "caption": raw.caption,
        "word_count": len(raw.caption.split()),
        "named_entities": [
            {"surface": m.surface, "label": m.label, "linked_id": m.linked_id}
            for m in mentions
        ],
        "person_role_excluded": role_excluded,
        "is_generic_caption": is_generic,
        "has_person_bbox": has_person_bbox,
        "image_ok": image_ok,
    }
    return manifest_obj, rows


def extract(corpus_dir: str | Path, model_config: ModelConfig, out_dir: str | Path) -> dict:
    """Run the full extraction; returns a summary of what was written."""
    records = read_corpus(corpus_dir)
    models = build_models(model_config)

    manifest: list[dict] = []
    idmap: list[tuple[int, str]] = []
    rows: dict[str, list[np.ndarray]] = {
        "clip_text": [], "clip_image": [], "sbert_text": [], "place_image": [],
    }
    failed_images = 0
    for sample_id, raw in enumerate(records):
        obj, record_rows = extract_record(raw, sample_id, models)
        manifest.append(obj)
        idmap.append((sample_id, raw.external_id))
        for modality, row in record_rows.items():
            rows[modality].append(row)
        if not obj["image_ok"]:
            failed_images += 1

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.jsonl", manifest)
    for modality, row_list in rows.items():
        dim = {
            "clip_text": model_config.clip_dim,
            "clip_image": model_config.clip_dim,
            "sbert_text": model_config.sbert_dim,
            "place_image": model_config.place_dim,
        }[modality]
        matrix = (
            np.stack(row_list) if row_list else np.zeros((0, dim), np.float32)
        )
        write_embedding(out / f"{modality}.emb", modality, matrix)
    write_idmap(out / "idmap.jsonl", idmap)
    return {
        "records": len(records),
        "failed_images": failed_images,
        "out_dir": str(out),
    }
