"""Bundled stub scorer speaking chadpod-scorer/1 over stdio.

Used two ways: as a stand-in external scorer (``const`` and ``hash``
modes) and as a conformance harness for exercising every client error
path (the misbehavior modes). Run it with::

    python -m chadpod.stub_scorer [--mode MODE] [--p P] [--reverse-batch N]

Modes:
    const           answer every request with --p (default 0.5)
    hash            deterministic per-pair probability in [0, 1]
    out-of-range    answer with an out-of-range probability
    malformed       answer with a line that is not JSON
    error-lines     answer every request with an error response
    hang            accept requests but never answer them
    refuse          refuse the handshake (as if the model failed to load)
"""

from __future__ import annotations

import argparse
import json
import sys

from . import protocol
from .scorer import stable_hash64


def hash_probability(prefix: str, postfix: str) -> float:
    return (stable_hash64(prefix + "\x1f" + postfix) % 10_000) / 9_999.0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="chadpod-stub-scorer", description=__doc__)
    parser.add_argument(
        "--mode",
        default="const",
        choices=["const", "hash", "out-of-range", "malformed", "error-lines", "hang", "refuse"],
    )
    parser.add_argument("--p", type=float, default=0.5)
    parser.add_argument(
        "--reverse-batch",
        type=int,
        default=0,
        metavar="N",
        help="buffer N requests and answer them in reverse order",
    )
    args = parser.parse_args(argv)

    stdin, stdout = sys.stdin, sys.stdout
    name = f"chadpod-stub/{args.mode}"

    if args.mode == "refuse":
        protocol.serve(lambda a, b: 0.0, stdin, stdout, name, refuse="model unavailable")
        return 0

    if args.mode in ("const", "hash") and args.reverse_batch <= 0:
        handler = (
            (lambda prefix, postfix: args.p)
            if args.mode == "const"
            else hash_probability
        )
        protocol.serve(handler, stdin, stdout, name)
        return 0

    # Custom loops for the misbehaving modes and reverse batching.
    first = stdin.readline()
    if not first or not protocol.is_valid_hello(first.strip()):
        stdout.write(protocol.handshake_refuse_line("expected chadpod-scorer/1 hello") + "\n")
        stdout.flush()
        return 0
    stdout.write(protocol.handshake_ok_line(name) + "\n")
    stdout.flush()

    buffered: list[tuple[str, str, str]] = []

    def flush_buffered():
        for req_id, prefix, postfix in reversed(buffered):
            p = args.p if args.mode == "const" else hash_probability(prefix, postfix)
            stdout.write(protocol.response_line(req_id, p) + "\n")
        stdout.flush()
        buffered.clear()

    for raw in stdin:
        raw = raw.strip()
        if not raw:
            continue
        try:
            req_id, prefix, postfix = protocol.parse_request(raw)
        except ValueError as e:
            stdout.write(protocol.error_line(None, str(e)) + "\n")
            stdout.flush()
            continue
        if args.mode == "hang":
            continue
        if args.mode == "out-of-range":
            stdout.write(json.dumps({"id": req_id, "p": 1.3}) + "\n")
        elif args.mode == "malformed":
            stdout.write("this is not json\n")
        elif args.mode == "error-lines":
            stdout.write(protocol.error_line(req_id, "stub declines to score") + "\n")
        else:  # const | hash with reverse batching
            buffered.append((req_id, prefix, postfix))
            if len(buffered) >= args.reverse_batch:
                flush_buffered()
            continue
        stdout.flush()
    if buffered:
        flush_buffered()
    return 0


if __name__ == "__main__":
    sys.exit(main())
