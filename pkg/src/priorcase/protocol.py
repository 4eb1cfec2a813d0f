"""Wire protocol for the optional model sidecar, plus an in-process stub.

Messages are UTF-8 JSON objects `{id, kind, payload}` (responses carry
`payload` or `error`), length-prefixed by a decimal byte count and a
newline:

    b"137\\n" + <137 bytes of JSON>

Request kinds: `hello` (capabilities), `embed` {texts}, `score_pairs`
{pairs}, `annotate` {sentences}. Every response echoes the request's id;
response array lengths equal request array lengths. The engine is fully
functional without a sidecar: `StubSidecarServer` serves the same protocol
from the deterministic in-process models, and the conformance suite below
runs against any endpoint.

Transport failures raise ScorerTransportError (retryable); a structured
error response raises SidecarRequestError (not retryable).
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import ScorerTransportError, SidecarRequestError, ValidationError

KIND_HELLO = "hello"
KIND_EMBED = "embed"
KIND_SCORE_PAIRS = "score_pairs"
KIND_ANNOTATE = "annotate"

_MAX_PREFIX_DIGITS = 12


def encode_message(message: dict) -> bytes:
    data = json.dumps(message, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return str(len(data)).encode("ascii") + b"\n" + data


def read_message(reader) -> dict | None:
    """Read one length-prefixed message; None on clean EOF at a boundary."""
    prefix = b""
    while True:
        byte = reader.read(1)
        if not byte:
            if prefix:
                raise ScorerTransportError("connection closed inside a length prefix")
            return None
        if byte == b"\n":
            break
        if not byte.isdigit() or len(prefix) >= _MAX_PREFIX_DIGITS:
            raise ScorerTransportError(f"malformed length prefix {prefix + byte!r}")
        prefix += byte
    if not prefix:
        raise ScorerTransportError("empty length prefix")
    length = int(prefix)
    data = b""
    while len(data) < length:
        piece = reader.read(length - len(data))
        if not piece:
            raise ScorerTransportError("connection closed mid-message")
        data += piece
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScorerTransportError(f"undecodable message: {exc}") from exc


@dataclass(frozen=True)
class Capabilities:
    dimension: int
    max_pair_length: int | None
    kinds: tuple[str, ...]


def parse_endpoint(endpoint: str) -> tuple[str, int] | str:
    """`host:port` for TCP or `unix:/path` for a unix socket."""
    if endpoint.startswith("unix:"):
        return endpoint[len("unix:") :]
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValidationError(f"bad sidecar endpoint {endpoint!r}; expected host:port or unix:/path")
    return host, int(port)


class SidecarClient:
    """Blocking protocol client with reconnect-and-retry on transport errors."""

    def __init__(
        self,
        endpoint: str,
        retries: int = 3,
        retry_delay: float = 0.05,
        timeout: float = 30.0,
    ):
        self.endpoint = endpoint
        self._address = parse_endpoint(endpoint)
        self._retries = retries
        self._retry_delay = retry_delay
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self._reader = None
        self._next_id = 0
        self._lock = threading.Lock()
        self.last_exchange: tuple[str, str] | None = None  # (sent id, echoed id)
        self._hello: Capabilities | None = None

    def _connect(self) -> None:
        self.close()
        try:
            if isinstance(self._address, tuple):
                sock = socket.create_connection(self._address, timeout=self._timeout)
            else:
                sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                sock.settimeout(self._timeout)
                sock.connect(self._address)
        except OSError as exc:
            raise ScorerTransportError(f"cannot connect to sidecar {self.endpoint}: {exc}") from exc
        self._sock = sock
        self._reader = sock.makefile("rb")

    def close(self) -> None:
        if self._reader is not None:
            try:
                self._reader.close()
            except OSError:
                pass
            self._reader = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def __enter__(self) -> "SidecarClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _exchange(self, message: dict) -> dict:
        if self._sock is None:
            self._connect()
        assert self._sock is not None
        try:
            self._sock.sendall(encode_message(message))
            response = read_message(self._reader)
        except OSError as exc:
            raise ScorerTransportError(f"sidecar i/o error: {exc}") from exc
        if response is None:
            raise ScorerTransportError("sidecar closed the connection")
        return response

    def request(self, kind: str, payload: dict) -> dict:
        """One request/response round trip with id-echo verification."""
        with self._lock:
            self._next_id += 1
            request_id = str(self._next_id)
            message = {"id": request_id, "kind": kind, "payload": payload}
            last_error: ScorerTransportError | None = None
            for attempt in range(self._retries):
                try:
                    response = self._exchange(message)
                    break
                except ScorerTransportError as exc:
                    last_error = exc
                    self.close()
                    if attempt + 1 < self._retries:
                        time.sleep(self._retry_delay * (attempt + 1))
            else:
                assert last_error is not None
                raise last_error
            echoed = str(response.get("id"))
            self.last_exchange = (request_id, echoed)
            if echoed != request_id:
                raise ScorerTransportError(
                    f"correlation id mismatch: sent {request_id!r}, got {echoed!r}"
                )
            if "error" in response:
                err = response["error"]
                raise SidecarRequestError(f"sidecar error for {kind}: {err}")
            result = response.get("payload")
            if not isinstance(result, dict):
                raise ScorerTransportError(f"sidecar response for {kind} has no payload")
            return result

    def hello(self, refresh: bool = False) -> Capabilities:
        if self._hello is None or refresh:
            payload = self.request(KIND_HELLO, {})
            try:
                self._hello = Capabilities(
                    dimension=int(payload["dimension"]),
                    max_pair_length=(
                        int(payload["max_pair_length"])
                        if payload.get("max_pair_length") is not None
                        else None
                    ),
                    kinds=tuple(payload["kinds"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ScorerTransportError(f"malformed hello payload: {payload!r}") from exc
        return self._hello

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        payload = self.request(KIND_EMBED, {"texts": list(texts)})
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ScorerTransportError(
                f"embed: expected {len(texts)} vectors, got {type(vectors)}"
            )
        return [[float(x) for x in vec] for vec in vectors]

    def score_pairs(self, pairs: Sequence[Sequence[str]]) -> list[float]:
        payload = self.request(KIND_SCORE_PAIRS, {"pairs": [list(p) for p in pairs]})
        scores = payload.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ScorerTransportError(
                f"score_pairs: expected {len(pairs)} scores, got {type(scores)}"
            )
        return [float(s) for s in scores]

    def annotate(self, sentences: Sequence[str]) -> list[str]:
        payload = self.request(KIND_ANNOTATE, {"sentences": list(sentences)})
        roles = payload.get("roles")
        if not isinstance(roles, list) or len(roles) != len(sentences):
            raise ScorerTransportError(
                f"annotate: expected {len(sentences)} roles, got {type(roles)}"
            )
        return [str(r) for r in roles]


Handler = Callable[[dict], dict]


class _ProtocolRequestHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        while True:
            try:
                message = read_message(self.rfile)
            except ScorerTransportError:
                return
            if message is None:
                return
            response = self.server.dispatch(message)  # type: ignore[attr-defined]
            try:
                self.wfile.write(encode_message(response))
                self.wfile.flush()
            except OSError:
                return


class _ProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, handlers: dict[str, Handler]):
        super().__init__(address, _ProtocolRequestHandler)
        self._handlers = handlers

    def dispatch(self, message: dict) -> dict:
        request_id = message.get("id")
        kind = message.get("kind")
        base = {"id": request_id, "kind": kind}
        handler = self._handlers.get(kind or "")
        if handler is None:
            return {**base, "error": {"type": "unsupported_kind", "message": str(kind)}}
        try:
            return {**base, "payload": handler(message.get("payload") or {})}
        except Exception as exc:  # model failure -> structured error, keep serving
            return {**base, "error": {"type": type(exc).__name__, "message": str(exc)}}


class StubSidecarServer:
    """Serves the protocol from the in-process stub models.

    Lets every remote-capable code path (external embedder/scorer/
    annotator, conformance suite) run hermetically without the real
    sidecar.
    """

    def __init__(self, dimension: int = 768, max_pair_length: int | None = 4000):
        from .rerank import JaccardPairScorer
        from .segmenter import CuePhraseAnnotator
        from .vector import HashingEmbedder

        embedder = HashingEmbedder(dimension)
        scorer = JaccardPairScorer()
        annotator = CuePhraseAnnotator()

        def on_hello(payload: dict) -> dict:
            return {
                "dimension": dimension,
                "max_pair_length": max_pair_length,
                "kinds": [KIND_EMBED, KIND_SCORE_PAIRS, KIND_ANNOTATE],
            }

        def on_embed(payload: dict) -> dict:
            texts = payload["texts"]
            matrix = embedder.embed([str(t) for t in texts])
            return {"dimension": dimension, "vectors": [list(map(float, row)) for row in matrix]}

        def on_score_pairs(payload: dict) -> dict:
            pairs = [(str(q), str(d)) for q, d in payload["pairs"]]
            return {"scores": scorer.score_pairs(pairs)}

        def on_annotate(payload: dict) -> dict:
            labels = annotator.label([str(s) for s in payload["sentences"]])
            return {"roles": [r.value for r in labels]}

        self._server = _ProtocolServer(
            ("127.0.0.1", 0),
            {
                KIND_HELLO: on_hello,
                KIND_EMBED: on_embed,
                KIND_SCORE_PAIRS: on_score_pairs,
                KIND_ANNOTATE: on_annotate,
            },
        )
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "StubSidecarServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "StubSidecarServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


@dataclass
class ConformanceCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    endpoint: str
    checks: list[ConformanceCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"conformance against {self.endpoint}:"]
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            suffix = f" ({check.detail})" if check.detail else ""
            lines.append(f"  [{status}] {check.name}{suffix}")
        return "\n".join(lines)


_SAMPLE_TEXTS = (
    "The appellant was convicted under the relevant penal provision.",
    "The question before us is whether the conviction can stand.",
    "",
    "Short.",
)

_ROLE_NAMES = {"Facts", "Issue", "Argument", "Reasoning", "Decision", "Other"}


def run_conformance(endpoint: str, texts: Sequence[str] = _SAMPLE_TEXTS) -> ConformanceReport:
    """Protocol conformance: length equalities, id echo, determinism,
    dimension consistency. Passes against the stub server and must pass
    against any real sidecar."""
    report = ConformanceReport(endpoint=endpoint)

    def check(name: str, fn: Callable[[], str | None]) -> None:
        try:
            detail = fn()
            report.checks.append(ConformanceCheck(name, True, detail or ""))
        except Exception as exc:
            report.checks.append(ConformanceCheck(name, False, f"{type(exc).__name__}: {exc}"))

    with SidecarClient(endpoint) as client:

        def c_hello() -> str:
            caps = client.hello()
            assert caps.dimension >= 1, f"dimension {caps.dimension}"
            assert KIND_EMBED in caps.kinds and KIND_SCORE_PAIRS in caps.kinds, caps.kinds
            return f"dimension={caps.dimension} kinds={','.join(caps.kinds)}"

        check("hello declares capabilities", c_hello)
        caps = client.hello()

        def c_id_echo() -> str | None:
            client.request(KIND_HELLO, {})
            sent, echoed = client.last_exchange or ("", "")
            assert sent == echoed, f"{sent!r} != {echoed!r}"
            return None

        check("correlation id echoed", c_id_echo)

        def c_embed_lengths() -> str:
            vectors = client.embed(list(texts))
            assert len(vectors) == len(texts)
            for vec in vectors:
                assert len(vec) == caps.dimension, f"vector length {len(vec)}"
            return f"{len(texts)} texts -> {len(vectors)} vectors"

        check("embed length and dimension", c_embed_lengths)

        def c_embed_empty() -> str | None:
            assert client.embed([]) == []
            return None

        check("embed of empty batch", c_embed_empty)

        def c_embed_deterministic() -> str | None:
            first = client.embed(list(texts))
            second = client.embed(list(texts))
            assert first == second, "repeated embed requests differ"
            return None

        check("embed determinism", c_embed_deterministic)

        def c_scores() -> str:
            pairs = [[texts[0], t] for t in texts]
            scores = client.score_pairs(pairs)
            assert len(scores) == len(pairs)
            assert all(isinstance(s, float) for s in scores)
            return f"{len(pairs)} pairs -> {len(scores)} scores"

        check("score_pairs length", c_scores)

        def c_scores_deterministic() -> str | None:
            pairs = [[texts[0], texts[0]], [texts[0], texts[1]]]
            assert client.score_pairs(pairs) == client.score_pairs(pairs)
            return None

        check("score_pairs determinism", c_scores_deterministic)

        if KIND_ANNOTATE in caps.kinds:

            def c_annotate() -> str:
                sentences = [t for t in texts if t]
                roles = client.annotate(sentences)
                assert len(roles) == len(sentences)
                bad = [r for r in roles if r not in _ROLE_NAMES]
                assert not bad, f"unknown roles {bad}"
                return f"{len(sentences)} sentences -> {len(roles)} roles"

            check("annotate length and role names", c_annotate)

    return report
