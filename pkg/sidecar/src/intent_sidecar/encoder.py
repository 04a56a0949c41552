"""Encoders that turn text into fixed-width CLS-token vectors.

Two implementations: a pretrained-transformer wrapper (the real thing)
and a seeded stub that needs no checkpoint, for protocol tests and
deployment smoke runs. Both truncate head-only: only the first
``max_tokens`` tokens influence the vector.
"""

from __future__ import annotations

import hashlib
import math
import random

MODES = ("raw_cls", "pooled")
DEFAULT_MODEL = "roberta-base"


class EncoderError(RuntimeError):
    """Raised when a request cannot be encoded; reported to the client."""


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise EncoderError(f"mode must be one of {MODES}, got {mode!r}")


class StubEncoder:
    """Deterministic checkpoint-free encoder.

    Vectors are unit-norm Gaussians seeded from the truncated token
    sequence and the mode, so identical (truncated) inputs give
    identical vectors and the head-only truncation contract is
    observable without loading a model.
    """

    def __init__(self, dimension: int = 768, model_name: str = "stub"):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.model_name = model_name

    def encode(self, text: str, max_tokens: int, mode: str) -> list[float]:
        _check_mode(mode)
        tokens = text.split()[:max_tokens]
        material = ("\x1f".join(tokens) + "\x1f" + mode).encode("utf-8")
        digest = hashlib.blake2b(material, digest_size=8).digest()
        rng = random.Random(int.from_bytes(digest, "big"))
        vec = [rng.gauss(0.0, 1.0) for _ in range(self.dimension)]
        norm = math.sqrt(sum(v * v for v in vec)) or 1.0
        return [v / norm for v in vec]


class TransformerEncoder:
    """First-token vectors from a pretrained bidirectional encoder.

    raw_cls returns the last hidden state of the first token; pooled
    returns the checkpoint's pooler output for it. Inference runs in
    eval mode with gradients off, so repeated calls are deterministic.
    torch and transformers import lazily; install the ``model`` extra.
    """

    def __init__(self, model_name: str = DEFAULT_MODEL):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderError(
                "transformer encoder needs the 'model' extra "
                "(pip install intent-sidecar[model])"
            ) from exc
        self.model_name = model_name
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModel.from_pretrained(model_name)
        self._model.eval()
        self.dimension = int(self._model.config.hidden_size)

    def encode(self, text: str, max_tokens: int, mode: str) -> list[float]:
        _check_mode(mode)
        encoded = self._tokenizer(
            text,
            truncation=True,
            max_length=max_tokens,
            return_tensors="pt",
        )
        with self._torch.no_grad():
            output = self._model(**encoded)
        if mode == "raw_cls":
            vec = output.last_hidden_state[0, 0]
        else:
            pooled = getattr(output, "pooler_output", None)
            if pooled is None:
                raise EncoderError(
                    f"checkpoint {self.model_name!r} has no pooler; use raw_cls"
                )
            vec = pooled[0]
        return [float(v) for v in vec]
