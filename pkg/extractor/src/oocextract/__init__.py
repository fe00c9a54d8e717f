"""Feature-store extraction from raw image-caption corpora."""

from .corpus import RawCorpusRecord, read_corpus
from .encoders import ModelConfig, build_models
from .extract import extract
from .nlp import GazetteerNer, GenericCaptionClassifier, flag_caption_roles

__version__ = "0.1.0"
