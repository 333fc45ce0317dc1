"""Frozen code and image embeddings for the gocoma pipeline."""

from .config import CODE_MODELS, VISION_MODELS, ExtractorConfig, ModelInfo
from .records import CODE, IMAGE, Record, read_records, write_records

__all__ = [
    "CODE",
    "CODE_MODELS",
    "IMAGE",
    "VISION_MODELS",
    "ExtractorConfig",
    "ModelInfo",
    "Record",
    "read_records",
    "write_records",
]
