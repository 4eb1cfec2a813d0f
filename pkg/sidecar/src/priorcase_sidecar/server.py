"""Socket server answering the engine's scoring protocol.

Request kinds: `hello` (capabilities), `embed`, `score_pairs`,
`annotate`. Every response echoes the request id; array lengths always
equal the request's. Overlong inputs are truncated, with a per-item
`truncated` flag in the response; model failures produce a structured
error response on the same connection (never a dropped socket mid-batch).
Connections are served concurrently, but requests within one connection
are answered strictly in order.
"""

from __future__ import annotations

import os
import socketserver
import threading
from dataclasses import dataclass, field

from . import framing
from .models import BACKENDS, ROLE_NAMES, ModelBundle

KIND_HELLO = "hello"
KIND_EMBED = "embed"
KIND_SCORE_PAIRS = "score_pairs"
KIND_ANNOTATE = "annotate"

DEFAULT_MAX_PAIR_LENGTH = 4000
DEFAULT_MAX_TEXT_CHARS = 60_000


class BadRequest(Exception):
    """Request payload does not match the protocol schema."""


@dataclass
class SidecarConfig:
    host: str = "127.0.0.1"
    port: int = 0
    unix_path: str | None = None
    backend: str = "hashing"
    dimension: int = 768
    max_pair_length: int = DEFAULT_MAX_PAIR_LENGTH
    max_text_chars: int = DEFAULT_MAX_TEXT_CHARS
    annotate_enabled: bool = True


class ModelService:
    """Kind dispatch over one loaded model bundle."""

    def __init__(self, config: SidecarConfig):
        try:
            factory = BACKENDS[config.backend]
        except KeyError:
            raise ValueError(
                f"unknown backend {config.backend!r}; available: {sorted(BACKENDS)}"
            ) from None
        self.config = config
        bundle: ModelBundle = factory(config.dimension)
        self.embedder, self.scorer, self.tagger = bundle

    def capabilities(self) -> dict:
        kinds = [KIND_EMBED, KIND_SCORE_PAIRS]
        if self.config.annotate_enabled:
            kinds.append(KIND_ANNOTATE)
        return {
            "dimension": self.embedder.dimension,
            "max_pair_length": self.config.max_pair_length,
            "kinds": kinds,
        }

    @staticmethod
    def _string_list(payload: dict, key: str) -> list[str]:
        value = payload.get(key)
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            raise BadRequest(f"payload field {key!r} must be a list of strings")
        return value

    def _cut(self, text: str, limit: int) -> tuple[str, bool]:
        if len(text) > limit:
            return text[:limit], True
        return text, False

    def handle(self, kind: str, payload: dict) -> dict:
        if kind == KIND_HELLO:
            return self.capabilities()
        if kind == KIND_EMBED:
            texts = self._string_list(payload, "texts")
            cut = [self._cut(t, self.config.max_text_chars) for t in texts]
            vectors = self.embedder.embed([t for t, _ in cut])
            return {
                "dimension": self.embedder.dimension,
                "vectors": vectors,
                "truncated": [flag for _, flag in cut],
            }
        if kind == KIND_SCORE_PAIRS:
            pairs = payload.get("pairs")
            if not isinstance(pairs, list) or any(
                not (isinstance(p, list) and len(p) == 2 and all(isinstance(s, str) for s in p))
                for p in pairs
            ):
                raise BadRequest("payload field 'pairs' must be a list of [query, document] pairs")
            scores: list[float] = []
            truncated: list[bool] = []
            limit = self.config.max_pair_length
            for query, document in pairs:
                q, q_cut = self._cut(query, limit)
                d, d_cut = self._cut(document, limit)
                scores.append(self.scorer.score(q, d))
                truncated.append(q_cut or d_cut)
            return {"scores": scores, "truncated": truncated}
        if kind == KIND_ANNOTATE:
            if not self.config.annotate_enabled:
                raise BadRequest("annotate is disabled on this sidecar")
            sentences = self._string_list(payload, "sentences")
            cut = [self._cut(s, self.config.max_text_chars) for s in sentences]
            roles = self.tagger.tag([s for s, _ in cut])
            bad = [r for r in roles if r not in ROLE_NAMES]
            if bad:
                raise RuntimeError(f"tagger produced unknown roles {bad!r}")
            return {"roles": roles, "truncated": [flag for _, flag in cut]}
        raise BadRequest(f"unsupported kind {kind!r}")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        service: ModelService = self.server.service  # type: ignore[attr-defined]
        while True:
            try:
                message = framing.read(self.rfile)
            except framing.ProtocolError:
                return
            if message is None:
                return
            request_id = message.get("id")
            kind = message.get("kind")
            base = {"id": request_id, "kind": kind}
            try:
                payload = message.get("payload") or {}
                if not isinstance(payload, dict):
                    raise BadRequest("payload must be an object")
                response = {**base, "payload": service.handle(str(kind), payload)}
            except BadRequest as exc:
                response = {**base, "error": {"type": "bad_request", "message": str(exc)}}
            except Exception as exc:  # model failure: structured error, keep serving
                response = {
                    **base,
                    "error": {"type": "model_error", "message": f"{type(exc).__name__}: {exc}"},
                }
            try:
                self.wfile.write(framing.encode(response))
                self.wfile.flush()
            except OSError:
                return


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class _UnixServer(socketserver.ThreadingUnixStreamServer):
    daemon_threads = True


@dataclass
class RunningSidecar:
    server: socketserver.BaseServer
    endpoint: str
    _thread: threading.Thread | None = field(default=None, repr=False)

    def serve_background(self) -> "RunningSidecar":
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.server.serve_forever()

    def shutdown(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        if isinstance(self.server, _UnixServer) and os.path.exists(self.server.server_address):
            os.unlink(self.server.server_address)

    def __enter__(self) -> "RunningSidecar":
        return self.serve_background()

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def create_sidecar(config: SidecarConfig) -> RunningSidecar:
    service = ModelService(config)
    if config.unix_path:
        if os.path.exists(config.unix_path):
            os.unlink(config.unix_path)
        server: socketserver.BaseServer = _UnixServer(config.unix_path, _Handler)
        endpoint = f"unix:{config.unix_path}"
    else:
        server = _TcpServer((config.host, config.port), _Handler)
        host, port = server.server_address[:2]
        endpoint = f"{host}:{port}"
    server.service = service  # type: ignore[attr-defined]
    return RunningSidecar(server=server, endpoint=endpoint)
