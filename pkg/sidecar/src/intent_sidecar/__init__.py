"""Embedding sidecar: CLS vectors from pretrained encoders over NDJSON/TCP."""

from .encoder import (
    DEFAULT_MODEL,
    MODES,
    EncoderError,
    StubEncoder,
    TransformerEncoder,
)
from .server import SidecarConfig, SidecarServer, serve

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "MODES",
    "EncoderError",
    "SidecarConfig",
    "SidecarServer",
    "StubEncoder",
    "TransformerEncoder",
    "serve",
    "__version__",
]
