"""Command-line entry point: `priorcase-sidecar serve`.

Prints `listening on HOST:PORT` (or `listening on unix:PATH`) once bound,
so callers that start the sidecar with `--port 0` can discover the
OS-assigned port from stdout.
"""

from __future__ import annotations

import argparse
import sys

from .models import BACKENDS
from .server import (
    DEFAULT_MAX_PAIR_LENGTH,
    DEFAULT_MAX_TEXT_CHARS,
    SidecarConfig,
    create_sidecar,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priorcase-sidecar")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="Serve the scoring protocol.")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0, help="0 = OS-assigned")
    serve.add_argument("--unix", dest="unix_path", default=None, help="Unix socket path (overrides host/port)")
    serve.add_argument("--backend", default="hashing", choices=sorted(BACKENDS))
    serve.add_argument("--dim", dest="dimension", type=int, default=768)
    serve.add_argument("--max-pair-length", type=int, default=DEFAULT_MAX_PAIR_LENGTH)
    serve.add_argument("--max-text-chars", type=int, default=DEFAULT_MAX_TEXT_CHARS)
    serve.add_argument("--no-annotate", dest="annotate", action="store_false",
                       help="Decline the annotate kind in capabilities.")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = SidecarConfig(
        host=args.host,
        port=args.port,
        unix_path=args.unix_path,
        backend=args.backend,
        dimension=args.dimension,
        max_pair_length=args.max_pair_length,
        max_text_chars=args.max_text_chars,
        annotate_enabled=args.annotate,
    )
    try:
        sidecar = create_sidecar(config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"listening on {sidecar.endpoint}", flush=True)
    try:
        sidecar.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        sidecar.server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
