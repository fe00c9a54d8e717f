"""Toy corpus fixtures: 10 records with generated images."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from oocextract.encoders import ModelConfig
from oocextract.extract import extract

TOY_RECORDS = [
    ("2021-01-10", "Angela Merkel spoke at the climate summit in Berlin last week"),
    ("2021-03-15", "Angela Merkel visited Paris before the European Union budget talks began"),
    ("2021-05-20", "Barack Obama met Justin Trudeau in Ottawa to discuss trade"),
    ("2021-07-25", "Barack Obama delivered a speech in Tokyo about energy policy"),
    ("2021-09-30", "Hillary Clinton attended the Olympic Games opening ceremony in Paris"),
    ("2021-12-05", "Hillary Clinton warned the World Bank about rising debt in Washington"),
    ("2022-02-10", "Heavy flooding closed roads across Germany and France after storms hit"),
    ("2022-04-15", "The Olympic Games brought thousands of visitors to Tokyo this month"),
    ("2022-06-20", "Crowds gathered near Downing Street in London for the annual parade"),
    ("2022-08-25", "A new exhibition about Mount Fuji opened in Tokyo yesterday evening"),
]


def write_toy_corpus(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(exist_ok=True)
    rng = np.random.default_rng(12)
    lines = []
    for i, (date, caption) in enumerate(TOY_RECORDS):
        pixels = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        pixels[:, :, i % 3] = (40 + 20 * i) % 256  # distinct dominant channel
        image_path = root / "images" / f"img_{i:03d}.png"
        Image.fromarray(pixels, "RGB").save(image_path)
        lines.append(
            json.dumps(
                {
                    "external_id": f"ext-{i:03d}",
                    "image_path": f"images/img_{i:03d}.png",
                    "caption": caption,
                    "timestamp": date,
                    "source": "toy_agency",
                }
            )
        )
    (root / "records.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


def toy_model_config() -> ModelConfig:
    return ModelConfig(clip_dim=64, sbert_dim=64, place_dim=32, person_detector="always")


@pytest.fixture(scope="session")
def toy_corpus_dir(tmp_path_factory) -> Path:
    return write_toy_corpus(tmp_path_factory.mktemp("corpus") / "toy")


@pytest.fixture(scope="session")
def toy_store_dir(toy_corpus_dir, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("store") / "toy_store"
    summary = extract(toy_corpus_dir, toy_model_config(), out)
    assert summary["records"] == 10
    assert summary["failed_images"] == 0
    return out
