"""Command line entry point: intent-sidecar."""

from __future__ import annotations

import argparse
import sys

from .encoder import DEFAULT_MODEL, MODES
from .server import SidecarConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intent-sidecar",
        description="Serve transformer CLS vectors over newline-delimited JSON.",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL, help="checkpoint name")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750, help="0 for ephemeral")
    parser.add_argument("--max-tokens", type=int, default=256,
                        help="default truncation cap per request")
    parser.add_argument("--mode", choices=MODES, default="raw_cls",
                        help="default vector variant per request")
    parser.add_argument("--stub", action="store_true",
                        help="serve seeded stub vectors, no checkpoint")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = SidecarConfig(
            model=args.model,
            host=args.host,
            port=args.port,
            max_tokens=args.max_tokens,
            mode=args.mode,
        )
    except ValueError as exc:
        print(f"intent-sidecar: error: {exc}", file=sys.stderr)
        return 1
    try:
        serve(config, use_stub=args.stub)
    except OSError as exc:
        print(f"intent-sidecar: i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
