"""Out-of-context image-caption match dataset generation."""

from .balancing import (
    AnnotationRecord,
    Label,
    SplitDataset,
    adversarial_filter,
    build_merged,
    build_split,
    dataset_totals,
    enforce_image_balance,
)
from .constraints import FilterReason, FilterVerdict, check_pair, check_pristine_quality, entity_overlap
from .matcher import (
    ChunkAssignment,
    MatchResult,
    Partition,
    assign_chunks,
    match_bruteforce,
    match_one,
    match_split,
)
from .reports import (
    OverlapMatrix,
    audit_constraints,
    cti_ratio_audit,
    dataset_stats,
    export_eval_subset,
    overlap_matrix,
    retrieval_sanity,
)
from .scoring import Strategy, cti, dot, strategy_score
from .store import (
    EmbeddingMatrix,
    EntityLabel,
    EntityMention,
    FeatureStore,
    Modality,
    SampleRecord,
    load_store,
    validate_store,
    write_store,
)
from .synth import ModalityConfig, SynthConfig, generate_synthetic

__version__ = "0.1.0"
