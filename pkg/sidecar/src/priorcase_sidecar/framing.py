"""Length-prefixed JSON message codec.

One message = decimal byte count, a newline, then that many bytes of
UTF-8 JSON: `{id, kind, payload}` requests, `{id, kind, payload | error}`
responses.
"""

from __future__ import annotations

import json

MAX_PREFIX_DIGITS = 12


class ProtocolError(Exception):
    """Malformed frame or connection broken mid-message."""


def encode(message: dict) -> bytes:
    data = json.dumps(message, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return str(len(data)).encode("ascii") + b"\n" + data


def read(reader) -> dict | None:
    """Read one message; None on clean EOF at a frame boundary."""
    prefix = b""
    while True:
        byte = reader.read(1)
        if not byte:
            if prefix:
                raise ProtocolError("EOF inside length prefix")
            return None
        if byte == b"\n":
            break
        if not byte.isdigit() or len(prefix) >= MAX_PREFIX_DIGITS:
            raise ProtocolError(f"bad length prefix byte {byte!r}")
        prefix += byte
    if not prefix:
        raise ProtocolError("empty length prefix")
    length = int(prefix)
    data = b""
    while len(data) < length:
        piece = reader.read(length - len(data))
        if not piece:
            raise ProtocolError("EOF inside message body")
        data += piece
    try:
        message = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable message: {exc}") from exc
    if not isinstance(message, dict):
        raise ProtocolError("message is not an object")
    return message
