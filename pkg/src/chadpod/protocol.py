"""The chadpod-scorer/1 wire protocol.

Newline-delimited JSON over any byte stream (child-process stdio or a TCP
connection). The client opens with a handshake line and the server
confirms before any scoring traffic:

    client: {"hello": "chadpod-scorer/1"}
    server: {"ok": true, "name": "<server name>"}      (or {"ok": false, "error": ...})

After the handshake, each request line is ``{"id": str, "prefix": str,
"postfix": str}`` and each response line is ``{"id": str, "p": float}``.
Responses may arrive in any order; ids tie them back to requests. A
server that cannot parse a request line answers ``{"id": null, "error":
str}`` (with the id filled in when it could be recovered) and keeps
serving.
"""

from __future__ import annotations

import json
from typing import Callable, TextIO

PROTOCOL_NAME = "chadpod-scorer/1"


def hello_line() -> str:
    return json.dumps({"hello": PROTOCOL_NAME})


def is_valid_hello(line: str) -> bool:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return False
    return isinstance(obj, dict) and obj.get("hello") == PROTOCOL_NAME


def handshake_ok_line(name: str) -> str:
    return json.dumps({"ok": True, "name": name})


def handshake_refuse_line(error: str) -> str:
    return json.dumps({"ok": False, "error": error})


def request_line(req_id: str, prefix: str, postfix: str) -> str:
    return json.dumps({"id": req_id, "prefix": prefix, "postfix": postfix}, ensure_ascii=False)


def response_line(req_id: str, p: float) -> str:
    return json.dumps({"id": req_id, "p": p})


def error_line(req_id: str | None, message: str) -> str:
    return json.dumps({"id": req_id, "error": message}, ensure_ascii=False)


def parse_request(line: str) -> tuple[str, str, str]:
    """Parse one request line. Raises ValueError with a reason on any
    malformed input; the caller turns that into an error response."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ValueError(f"invalid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ValueError("request must be a JSON object")
    req_id = obj.get("id")
    prefix = obj.get("prefix")
    postfix = obj.get("postfix")
    if not isinstance(req_id, str) or not req_id:
        raise ValueError("request id must be a non-empty string")
    if not isinstance(prefix, str) or not prefix:
        raise ValueError("prefix must be a non-empty string")
    if not isinstance(postfix, str) or not postfix:
        raise ValueError("postfix must be a non-empty string")
    return req_id, prefix, postfix


def serve(
    handler: Callable[[str, str], float],
    stdin: TextIO,
    stdout: TextIO,
    name: str,
    refuse: str | None = None,
) -> None:
    """Run a conformant server loop over text streams.

    ``handler(prefix, postfix)`` returns the branching probability. When
    ``refuse`` is set the handshake is rejected with that message and the
    loop exits (a server whose model failed to load behaves this way).
    """
    first = stdin.readline()
    if not first:
        return
    if not is_valid_hello(first.strip()):
        stdout.write(handshake_refuse_line("expected chadpod-scorer/1 hello") + "\n")
        stdout.flush()
        return
    if refuse is not None:
        stdout.write(handshake_refuse_line(refuse) + "\n")
        stdout.flush()
        return
    stdout.write(handshake_ok_line(name) + "\n")
    stdout.flush()

    for raw in stdin:
        raw = raw.strip()
        if not raw:
            continue
        try:
            req_id, prefix, postfix = parse_request(raw)
        except ValueError as e:
            recovered = None
            try:
                obj = json.loads(raw)
                if isinstance(obj, dict) and isinstance(obj.get("id"), str):
                    recovered = obj["id"]
            except json.JSONDecodeError:
                pass
            stdout.write(error_line(recovered, str(e)) + "\n")
            stdout.flush()
            continue
        p = handler(prefix, postfix)
        stdout.write(response_line(req_id, p) + "\n")
        stdout.flush()
