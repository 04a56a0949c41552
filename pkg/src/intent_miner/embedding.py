"""Title and description embeddings behind a provider contract.

Two providers exist: a deterministic hashed bag-of-ngrams encoder that is
fully self-contained (used for tests and offline runs), and a client for
an external transformer sidecar speaking newline-delimited JSON over TCP.
Both produce fixed-dimension vectors; the default geometry is 768 to
match the transformer CLS output consumed downstream.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import uuid
from dataclasses import dataclass
from typing import Iterator, Protocol, Sequence

import numpy as np

DEFAULT_DIMENSION = 768
DEFAULT_MAX_TOKENS = 256
SIDECAR_ENV_VAR = "INTENT_MINER_SIDECAR"

_HASH_KEY = b"intent-miner-embed"
_BIGRAM_SEP = "\x1e"


class TransportError(RuntimeError):
    """Sidecar unreachable, connection dropped, or timed out."""


class ProtocolError(RuntimeError):
    """Sidecar replied with an error or a malformed/mismatched payload."""


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    """Configuration selecting and parameterizing an embedding provider."""

    kind: str = "hashed"
    dimension: int = DEFAULT_DIMENSION
    max_tokens: int = DEFAULT_MAX_TOKENS
    mode: str = "raw_cls"

    def __post_init__(self) -> None:
        if self.kind not in ("hashed", "sidecar"):
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.dimension <= 0:
            raise ValueError("dimension must be > 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")
        if self.mode not in ("raw_cls", "pooled"):
            raise ValueError(f"unknown embedding mode: {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "max_tokens": self.max_tokens,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EmbeddingProviderSpec":
        return cls(
            kind=str(obj.get("kind", "hashed")),
            dimension=int(obj.get("dimension", DEFAULT_DIMENSION)),
            max_tokens=int(obj.get("max_tokens", DEFAULT_MAX_TOKENS)),
            mode=str(obj.get("mode", "raw_cls")),
        )


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _stable_hash(data: str) -> int:
    digest = hashlib.blake2b(
        data.encode("utf-8"), digest_size=8, key=_HASH_KEY
    ).digest()
    return int.from_bytes(digest, "big")


class HashedProvider:
    """Deterministic hashed unigram+bigram embeddings.

    Text is lowercased, whitespace-tokenized, and truncated to the first
    max_tokens tokens. Every unigram and bigram lands at (hash mod
    dimension) with sign taken from the hash's top bit; the accumulated
    vector is L2-normalized. Empty text maps to the zero vector.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, max_tokens: int = DEFAULT_MAX_TOKENS):
        if dimension <= 0 or max_tokens <= 0:
            raise ValueError("dimension and max_tokens must be > 0")
        self.dimension = dimension
        self.max_tokens = max_tokens

    def embed(self, text: str) -> np.ndarray:
        tokens = text.lower().split()[: self.max_tokens]
        vec = np.zeros(self.dimension)
        for gram in self._ngrams(tokens):
            h = _stable_hash(gram)
            sign = -1.0 if h >> 63 & 1 else 1.0
            vec[h % self.dimension] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]

    @staticmethod
    def _ngrams(tokens: list[str]) -> Iterator[str]:
        yield from tokens
        for a, b in zip(tokens, tokens[1:]):
            yield a + _BIGRAM_SEP + b


class SidecarClient:
    """TCP client for the transformer sidecar.

    The wire format is one JSON object per line. On connect the client
    sends {"op": "hello"} and checks the advertised dimension. Embed
    requests carry a unique id; replies may arrive in any order and are
    matched back by id.
    """

    def __init__(
        self,
        address: str,
        dimension: int = DEFAULT_DIMENSION,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        mode: str = "raw_cls",
        timeout: float = 30.0,
    ):
        self.address = address
        self.dimension = dimension
        self.max_tokens = max_tokens
        self.mode = mode
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._reader = None
        self._pending: dict[str, dict] = {}

    # -- connection management --------------------------------------

    def connect(self) -> None:
        if self._sock is not None:
            return
        host, _, port_str = self.address.rpartition(":")
        if not host or not port_str.isdigit():
            raise ValueError(f"sidecar address must be host:port, got {self.address!r}")
        try:
            sock = socket.create_connection((host, int(port_str)), timeout=self.timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach sidecar at {self.address}: {exc}") from None
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8", newline="\n")
        hello = self._roundtrip({"op": "hello"})
        if "dimension" not in hello:
            raise ProtocolError(f"bad handshake reply: {hello!r}")
        if int(hello["dimension"]) != self.dimension:
            raise ProtocolError(
                f"sidecar dimension {hello['dimension']} != expected {self.dimension}"
            )
        self.model_name = str(hello.get("model", ""))

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self) -> "SidecarClient":
        self.connect()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- wire helpers -------------------------------------------------

    def _send(self, obj: dict) -> None:
        assert self._sock is not None
        try:
            self._sock.sendall((json.dumps(obj) + "\n").encode("utf-8"))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def _read_reply(self) -> dict:
        assert self._reader is not None
        try:
            line = self._reader.readline()
        except OSError as exc:
            raise TransportError(f"read failed: {exc}") from None
        if not line:
            raise TransportError("sidecar closed the connection")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"unparseable sidecar reply: {line!r}") from None
        if not isinstance(obj, dict):
            raise ProtocolError(f"sidecar reply is not an object: {obj!r}")
        return obj

    def _roundtrip(self, obj: dict) -> dict:
        self._send(obj)
        return self._read_reply()

    def _receive_for(self, request_id: str) -> dict:
        # Replies can interleave across requests; park strangers by id.
        if request_id in self._pending:
            return self._pending.pop(request_id)
        while True:
            obj = self._read_reply()
            got = obj.get("id")
            if got == request_id:
                return obj
            if isinstance(got, str):
                self._pending[got] = obj
            else:
                raise ProtocolError(f"reply without id: {obj!r}")

    def _decode_vector(self, reply: dict) -> np.ndarray:
        if "error" in reply:
            raise ProtocolError(f"sidecar error: {reply['error']}")
        if "vector" not in reply:
            raise ProtocolError(f"reply missing vector: {reply!r}")
        vec = np.asarray(reply["vector"], dtype=float)
        if vec.shape != (self.dimension,):
            raise ProtocolError(
                f"vector has dimension {vec.shape}, expected ({self.dimension},)"
            )
        if not np.all(np.isfinite(vec)):
            raise ProtocolError("vector contains non-finite values")
        return vec

    # -- public API --------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        self.connect()
        request_id = uuid.uuid4().hex
        self._send(
            {
                "id": request_id,
                "text": text,
                "max_tokens": self.max_tokens,
                "mode": self.mode,
            }
        )
        return self._decode_vector(self._receive_for(request_id))

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        self.connect()
        ids = [uuid.uuid4().hex for _ in texts]
        for request_id, text in zip(ids, texts):
            self._send(
                {
                    "id": request_id,
                    "text": text,
                    "max_tokens": self.max_tokens,
                    "mode": self.mode,
                }
            )
        out = []
        for i, request_id in enumerate(ids):
            try:
                out.append(self._decode_vector(self._receive_for(request_id)))
            except (TransportError, ProtocolError) as exc:
                raise type(exc)(f"batch item {i}: {exc}") from None
        return out


def make_provider(
    spec: EmbeddingProviderSpec, address: str | None = None
) -> EmbeddingProvider:
    """Instantiate the provider a spec describes.

    For the sidecar kind the address comes from the argument or the
    INTENT_MINER_SIDECAR environment variable.
    """

    if spec.kind == "hashed":
        return HashedProvider(dimension=spec.dimension, max_tokens=spec.max_tokens)
    address = address or os.environ.get(SIDECAR_ENV_VAR)
    if not address:
        raise ValueError(
            "sidecar provider needs an address (argument or "
            f"{SIDECAR_ENV_VAR} environment variable)"
        )
    return SidecarClient(
        address,
        dimension=spec.dimension,
        max_tokens=spec.max_tokens,
        mode=spec.mode,
    )
