"""Config-pluggable encoders and detectors.

The "hashed" family needs no model weights: text rows come from signed
feature hashing of tokens, image rows from a fixed random projection of a
thumbnail. Rows are deterministic functions of (input bytes, salt, dim) and
L2-normalized, which is all the store contract requires; real encoders can
be registered behind the same names.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ModelLoadError


def _seed_from(salt: str, dim: int) -> int:
    digest = hashlib.sha256(f"{salt}:{dim}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


class HashedTextEncoder:
    def __init__(self, dim: int, salt: str):
        self.dim = dim
        self.salt = salt.encode()

    def __call__(self, caption: str) -> np.ndarray:
        vec = np.zeros(self.dim, np.float64)
        for token in caption.casefold().split():
            digest = hashlib.sha256(self.salt + token.encode()).digest()
            bucket = int.from_bytes(digest[:8], "little") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        return _normalize(vec)


class HashedImageEncoder:
    def __init__(self, dim: int, salt: str, thumb: int = 16, grayscale: bool = False):
        self.dim = dim
        self.thumb = thumb
        self.grayscale = grayscale
        channels = 1 if grayscale else 3
        rng = np.random.default_rng(_seed_from(salt, dim))
        self.projection = rng.standard_normal((thumb * thumb * channels + 1, dim))

    def __call__(self, image: Image.Image) -> np.ndarray:
        mode = "L" if self.grayscale else "RGB"
        small = image.convert(mode).resize((self.thumb, self.thumb), Image.BILINEAR)
        pixels = np.asarray(small, np.float64).reshape(-1) / 255.0
        feats = np.concatenate([pixels, [1.0]])  # bias keeps flat images nonzero
        return _normalize(feats @ self.projection)

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim, np.float32)


class ConstantPersonDetector:
    """Reports a person box for every readable image (or never)."""

    def __init__(self, value: bool):
        self.value = value

    def __call__(self, image: Image.Image) -> bool:
        return self.value


class HaarPersonDetector:
    """OpenCV Haar cascades (frontal face + full body), no downloads needed."""

    def __init__(self):
        try:
            import cv2
        except ImportError as exc:
            raise ModelLoadError(f"haar detector needs opencv: {exc}")
        if not hasattr(cv2, "CascadeClassifier"):
            raise ModelLoadError(
                "installed opencv build has no CascadeClassifier (removed in 5.x)"
            )
        self.cv2 = cv2
        base = cv2.data.haarcascades
        self.cascades = [
            cv2.CascadeClassifier(base + "haarcascade_frontalface_default.xml"),
            cv2.CascadeClassifier(base + "haarcascade_fullbody.xml"),
        ]
        if any(c.empty() for c in self.cascades):
            raise ModelLoadError("haar cascade files failed to load")

    def __call__(self, image: Image.Image) -> bool:
        gray = np.asarray(image.convert("L"))
        for cascade in self.cascades:
            if len(cascade.detectMultiScale(gray, 1.1, 3)) > 0:
                return True
        return False


@dataclass(frozen=True)
class ModelConfig:
    text_encoder: str = "hashed"
    image_encoder: str = "hashed"
    scene_encoder: str = "hashed"
    ner: str = "gazetteer"
    gazetteer_path: str | None = None
    person_detector: str = "always"
    generic_classifier: str = "none"
    clip_dim: int = 512
    sbert_dim: int = 768
    place_dim: int = 2048

    @classmethod
    def from_obj(cls, obj: dict) -> "ModelConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(obj) - known
        if unknown:
            raise ModelLoadError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class ModelBundle:
    clip_text: HashedTextEncoder
    sbert_text: HashedTextEncoder
    clip_image: HashedImageEncoder
    place_image: HashedImageEncoder
    person_detector: object
    ner: object
    generic_classifier: object
    config: ModelConfig = field(repr=False, default=None)


def build_models(config: ModelConfig) -> ModelBundle:
    from .nlp import GazetteerNer, GenericCaptionClassifier

    if config.text_encoder != "hashed":
        raise ModelLoadError(f"unknown text encoder {config.text_encoder!r}")
    if config.image_encoder != "hashed":
        raise ModelLoadError(f"unknown image encoder {config.image_encoder!r}")
    if config.scene_encoder != "hashed":
        raise ModelLoadError(f"unknown scene encoder {config.scene_encoder!r}")
    if config.ner != "gazetteer":
        raise ModelLoadError(f"unknown ner {config.ner!r}")

    if config.person_detector == "always":
        detector = ConstantPersonDetector(True)
    elif config.person_detector == "never":
        detector = ConstantPersonDetector(False)
    elif config.person_detector == "haar":
        detector = HaarPersonDetector()
    else:
        raise ModelLoadError(f"unknown person detector {config.person_detector!r}")

    return ModelBundle(
        clip_text=HashedTextEncoder(config.clip_dim, "clip-text"),
        sbert_text=HashedTextEncoder(config.sbert_dim, "sbert-text"),
        clip_image=HashedImageEncoder(config.clip_dim, "clip-image", thumb=16),
        place_image=HashedImageEncoder(
            config.place_dim, "place-image", thumb=8, grayscale=True
        ),
        person_detector=detector,
        ner=GazetteerNer(config.gazetteer_path),
        generic_classifier=GenericCaptionClassifier(config.generic_classifier),
        config=config,
    )
