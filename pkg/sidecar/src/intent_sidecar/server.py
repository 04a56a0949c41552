"""Newline-delimited-JSON embedding server.

One JSON object per line over TCP. Requests:

    {"op": "hello"}                          -> {"dimension": d, "model": name}
    {"id": s, "text": t,
     "max_tokens": m, "mode": raw_cls|pooled} -> {"id": s, "vector": [...]}
                                              | {"id": s, "error": msg}

Unparseable lines get {"id": null, "error": msg} and the connection
stays open. max_tokens and mode are optional per request and fall back
to the server config. One request is in flight per connection; separate
connections are served concurrently, but inference itself is serialized
on a single worker.
"""

from __future__ import annotations

import json
import socketserver
import threading
from dataclasses import dataclass

from .encoder import DEFAULT_MODEL, MODES, EncoderError, StubEncoder, TransformerEncoder

__all__ = ["SidecarConfig", "SidecarServer", "serve"]


@dataclass(frozen=True)
class SidecarConfig:
    model: str = DEFAULT_MODEL
    host: str = "127.0.0.1"
    port: int = 8750  # 0 binds an ephemeral port
    max_tokens: int = 256
    mode: str = "raw_cls"

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            try:
                request = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                if not self._reply({"id": None, "error": "unparseable request line"}):
                    return
                continue
            if not isinstance(request, dict):
                if not self._reply({"id": None, "error": "request must be a JSON object"}):
                    return
                continue
            if request.get("op") == "hello":
                encoder = self.server.encoder
                reply = {"dimension": encoder.dimension, "model": encoder.model_name}
            else:
                reply = self._embed(request)
            if not self._reply(reply):
                return

    def _embed(self, request: dict) -> dict:
        request_id = request.get("id")
        if not isinstance(request_id, str) or not request_id:
            return {"id": None, "error": "id must be a non-empty string"}
        text = request.get("text")
        if not isinstance(text, str):
            return {"id": request_id, "error": "text must be a string"}
        max_tokens = request.get("max_tokens", self.server.config.max_tokens)
        if isinstance(max_tokens, bool) or not isinstance(max_tokens, int) or max_tokens < 1:
            return {"id": request_id, "error": "max_tokens must be a positive integer"}
        mode = request.get("mode", self.server.config.mode)
        if mode not in MODES:
            return {"id": request_id, "error": f"mode must be one of {MODES}"}
        try:
            with self.server.inference_lock:
                vector = self.server.encoder.encode(text, max_tokens, mode)
        except EncoderError as exc:
            return {"id": request_id, "error": str(exc)}
        return {"id": request_id, "vector": vector}

    def _reply(self, obj: dict) -> bool:
        # False when the peer is gone; the handler then stops reading
        try:
            self.wfile.write((json.dumps(obj) + "\n").encode("utf-8"))
            self.wfile.flush()
            return True
        except OSError:
            return False


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class SidecarServer:
    """Bound server; call serve_forever() to block or start() for a
    background thread (tests)."""

    def __init__(self, config: SidecarConfig, encoder=None):
        if encoder is None:
            encoder = TransformerEncoder(config.model)
        self.config = config
        self._tcp = _TcpServer((config.host, config.port), _Handler)
        self._tcp.config = config
        self._tcp.encoder = encoder
        self._tcp.inference_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._tcp.server_address[:2]
        return f"{host}:{port}"

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def __enter__(self) -> "SidecarServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def serve(config: SidecarConfig, encoder=None, use_stub: bool = False) -> None:
    """Run the server until interrupted."""

    if encoder is None and use_stub:
        encoder = StubEncoder(model_name=f"stub:{config.model}")
    server = SidecarServer(config, encoder)
    print(f"intent-sidecar listening on {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
