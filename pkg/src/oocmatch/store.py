"""Corpus feature store: manifest + embedding matrices, on disk and in memory.

On-disk layout under a store root:
  manifest.jsonl   one JSON object per sample, UTF-8, dense sample_ids 0..N-1
  clip_text.emb    binary embedding matrix, one per modality
  clip_image.emb
  sbert_text.emb
  place_image.emb

Embedding file format (little-endian): bytes 0-3 magic "NCLP", 4-7 format
version u32 (=1), 8-11 modality code u32 (enum order below), 12-15 dim u32,
16-23 row count u64, byte 24 normalized flag, bytes 25-31 zero padding,
then rows*dim float32 values, row-major.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimMismatch, MagicMismatch, ManifestParse, MissingFile, UnknownId

MAGIC = b"NCLP"
FORMAT_VERSION = 1
HEADER_SIZE = 32
MANIFEST_NAME = "manifest.jsonl"
NORM_TOLERANCE = 1e-4


class EntityLabel(enum.Enum):
    PERSON = "PERSON"
    GPE = "GPE"
    ORG = "ORG"
    LOC = "LOC"
    EVENT = "EVENT"
    DATE = "DATE"
    OTHER = "OTHER"


class Modality(enum.Enum):
    """Embedding modalities; enum order defines the binary modality code."""

    CLIP_TEXT = 0
    CLIP_IMAGE = 1
    SBERT_TEXT = 2
    PLACE_IMAGE = 3

    @property
    def filename(self) -> str:
        return self.name.lower() + ".emb"


@dataclass(frozen=True)
class EntityMention:
    surface: str
    label: EntityLabel
    linked_id: str | None = None

    def __post_init__(self) -> None:
        if not self.surface:
            raise ManifestParse("entity mention surface must be non-empty")
        if self.linked_id is not None and not self.linked_id:
            raise ManifestParse("linked_id, when present, must be non-empty")


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    source: str
    timestamp: int
    caption: str
    word_count: int
    named_entities: tuple[EntityMention, ...]
    person_role_excluded: bool
    is_generic_caption: bool
    has_person_bbox: bool
    image_ok: bool

    @property
    def has_person_entity(self) -> bool:
        return any(m.label is EntityLabel.PERSON for m in self.named_entities)

    def overlap_keys(self) -> dict[tuple[str, str], frozenset[EntityLabel]]:
        """Case-folded surface keys and linked-id keys, each with its label set.

        Key spaces are kept distinct ("s" vs "l") so a surface can never
        collide with a knowledge-base id.
        """
        keys: dict[tuple[str, str], set[EntityLabel]] = {}
        for m in self.named_entities:
            keys.setdefault(("s", m.surface.casefold()), set()).add(m.label)
            if m.linked_id is not None:
                keys.setdefault(("l", m.linked_id), set()).add(m.label)
        return {k: frozenset(v) for k, v in keys.items()}


@dataclass
class EmbeddingMatrix:
    modality: Modality
    dim: int
    rows: np.ndarray  # float32, shape (N, dim)
    normalized: bool

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dim:
            raise DimMismatch(
                f"{self.modality.name}: expected shape (N, {self.dim}), got {self.rows.shape}"
            )


@dataclass(eq=False)
class FeatureStore:
    """Immutable corpus bundle: manifest plus all four embedding matrices."""

    manifest: list[SampleRecord]
    matrices: dict[Modality, EmbeddingMatrix]

    def __post_init__(self) -> None:
        n = len(self.manifest)
        for modality in Modality:
            if modality not in self.matrices:
                raise DimMismatch(f"missing matrix for {modality.name}")
            m = self.matrices[modality]
            if m.rows.shape[0] != n:
                raise DimMismatch(
                    f"{modality.name}: {m.rows.shape[0]} rows for {n} manifest records"
                )
        self._f64: dict[Modality, np.ndarray] = {}
        self._zero_rows: dict[Modality, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.manifest)

    def record(self, sample_id: int) -> SampleRecord:
        if not 0 <= sample_id < len(self.manifest):
            raise UnknownId(f"sample id {sample_id} out of range 0..{len(self.manifest) - 1}")
        return self.manifest[sample_id]

    def rows64(self, modality: Modality) -> np.ndarray:
        """Float64 view of a matrix, converted once and cached."""
        if modality not in self._f64:
            self._f64[modality] = self.matrices[modality].rows.astype(np.float64)
        return self._f64[modality]

    def zero_rows(self, modality: Modality) -> np.ndarray:
        """Boolean mask of all-zero rows (corrupt features, never matchable)."""
        if modality not in self._zero_rows:
            rows = self.matrices[modality].rows
            self._zero_rows[modality] = ~np.any(rows != 0.0, axis=1)
        return self._zero_rows[modality]


# --- manifest (de)serialization -------------------------------------------

_MANIFEST_FIELDS = (
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
_MENTION_FIELDS = ("surface", "label", "linked_id")


def _record_from_obj(obj: dict, line_no: int) -> SampleRecord:
    if not isinstance(obj, dict):
        raise ManifestParse(f"line {line_no}: record is not a JSON object")
    if set(obj) != set(_MANIFEST_FIELDS):
        raise ManifestParse(
            f"line {line_no}: fields must be exactly {sorted(_MANIFEST_FIELDS)}"
        )
    mentions = []
    if not isinstance(obj["named_entities"], list):
        raise ManifestParse(f"line {line_no}: named_entities must be a list")
    for ent in obj["named_entities"]:
        if not isinstance(ent, dict) or set(ent) != set(_MENTION_FIELDS):
            raise ManifestParse(
                f"line {line_no}: entity fields must be exactly {sorted(_MENTION_FIELDS)}"
            )
        try:
            label = EntityLabel(ent["label"])
        except ValueError:
            raise ManifestParse(f"line {line_no}: unknown entity label {ent['label']!r}")
        mentions.append(EntityMention(ent["surface"], label, ent["linked_id"]))
    try:
        return SampleRecord(
            sample_id=int(obj["sample_id"]),
            source=str(obj["source"]),
            timestamp=int(obj["timestamp"]),
            caption=str(obj["caption"]),
            word_count=int(obj["word_count"]),
            named_entities=tuple(mentions),
            person_role_excluded=bool(obj["person_role_excluded"]),
            is_generic_caption=bool(obj["is_generic_caption"]),
            has_person_bbox=bool(obj["has_person_bbox"]),
            image_ok=bool(obj["image_ok"]),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestParse(f"line {line_no}: {exc}")


def _record_to_obj(rec: SampleRecord) -> dict:
    return {
        "sample_id": rec.sample_id,
        "source": rec.source,
        "timestamp": rec.timestamp,
        "caption": rec.caption,
        "word_count": rec.word_count,
        "named_entities": [
            {"surface": m.surface, "label": m.label.value, "linked_id": m.linked_id}
            for m in rec.named_entities
        ],
        "person_role_excluded": rec.person_role_excluded,
        "is_generic_caption": rec.is_generic_caption,
        "has_person_bbox": rec.has_person_bbox,
        "image_ok": rec.image_ok,
    }


def _dump_record(rec: SampleRecord) -> str:
    return json.dumps(_record_to_obj(rec), ensure_ascii=False, separators=(",", ":"))


def read_manifest(path: Path) -> list[SampleRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                raise ManifestParse(f"line {line_no}: empty manifest line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParse(f"line {line_no}: {exc}")
            records.append(_record_from_obj(obj, line_no))
    for i, rec in enumerate(records):
        if rec.sample_id != i:
            raise ManifestParse(
                f"sample ids must be dense 0..N-1 in order; got {rec.sample_id} at position {i}"
            )
    return records


# --- embedding file (de)serialization --------------------------------------

def write_embedding_file(path: Path, matrix: EmbeddingMatrix) -> None:
    rows = matrix.rows
    header = struct.pack(
        "<4sIIIQB7x",
        MAGIC,
        FORMAT_VERSION,
        matrix.modality.value,
        matrix.dim,
        rows.shape[0],
        1 if matrix.normalized else 0,
    )
    assert len(header) == HEADER_SIZE
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes(order="C"))


def read_embedding_file(path: Path, expected: Modality) -> EmbeddingMatrix:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(str(path))
    if len(raw) < HEADER_SIZE:
        raise MagicMismatch(f"{path}: truncated header")
    magic, version, mod_code, dim, row_count, norm_flag = struct.unpack(
        "<4sIIIQB7x", raw[:HEADER_SIZE]
    )
    if magic != MAGIC:
        raise MagicMismatch(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MagicMismatch(f"{path}: unsupported format version {version}")
    if mod_code != expected.value:
        raise MagicMismatch(
            f"{path}: modality code {mod_code}, expected {expected.value} ({expected.name})"
        )
    if dim == 0:
        raise MagicMismatch(f"{path}: dim must be positive")
    payload = raw[HEADER_SIZE:]
    want = row_count * dim * 4
    if len(payload) != want:
        raise DimMismatch(
            f"{path}: payload holds {len(payload)} bytes, header implies {want}"
        )
    rows = np.frombuffer(payload, dtype="<f4").reshape(row_count, dim)
    return EmbeddingMatrix(expected, dim, rows.copy(), bool(norm_flag))


# --- store load / save ------------------------------------------------------

def load_store(root_path: str | Path) -> FeatureStore:
    """Load and structurally validate a store directory."""
    root = Path(root_path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingFile(str(manifest_path))
    manifest = read_manifest(manifest_path)
    matrices = {}
    for modality in Modality:
        matrix = read_embedding_file(root / modality.filename, modality)
        if matrix.rows.shape[0] != len(manifest):
            raise DimMismatch(
                f"{modality.name}: {matrix.rows.shape[0]} rows, manifest has {len(manifest)}"
            )
        matrices[modality] = matrix
    return FeatureStore(manifest, matrices)


def write_store(store: FeatureStore, root_path: str | Path) -> None:
    """Write a store in canonical form (the form load_store round-trips byte-exactly)."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as fh:
        for rec in store.manifest:
            fh.write(_dump_record(rec))
            fh.write("\n")
    for modality in Modality:
        write_embedding_file(root / modality.filename, store.matrices[modality])


# --- validation --------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    offending_ids: list[int] = field(default_factory=list)


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_obj(self) -> dict:
        return {
            "checks": [
                {"name": c.name, "passed": c.passed, "offending_ids": c.offending_ids}
                for c in self.checks
            ],
            "failure_count": len(self.failures),
        }


def validate_store(store: FeatureStore) -> ValidationReport:
    """Value-level audit of a loaded store; failures are report entries, not errors."""
    checks = []

    bad_ids = [i for i, rec in enumerate(store.manifest) if rec.sample_id != i]
    checks.append(CheckResult("id_density", not bad_ids, bad_ids))

    bad_wc = [
        rec.sample_id
        for rec in store.manifest
        if rec.word_count != len(rec.caption.split())
    ]
    checks.append(CheckResult("word_count", not bad_wc, bad_wc))

    for modality in Modality:
        m = store.matrices[modality]
        name = modality.name.lower()

        nonfinite = np.where(~np.isfinite(m.rows).all(axis=1))[0]
        checks.append(
            CheckResult(f"nan_scan_{name}", nonfinite.size == 0, nonfinite.tolist())
        )

        zero = np.where(store.zero_rows(modality))[0]
        checks.append(CheckResult(f"zero_rows_{name}", zero.size == 0, zero.tolist()))

        if m.normalized:
            with np.errstate(invalid="ignore", over="ignore"):
                norms = np.linalg.norm(m.rows.astype(np.float64), axis=1)
            mask = ~store.zero_rows(modality) & np.isfinite(norms)
            off = np.where(mask & (np.abs(norms - 1.0) > NORM_TOLERANCE))[0]
            checks.append(
                CheckResult(f"normalization_{name}", off.size == 0, off.tolist())
            )

    return ValidationReport(checks)


