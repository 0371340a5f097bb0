"""In-process mock of a ``/book`` venue for collector tests and demos.

A script maps each token to a list of responses; the n-th request for a
token gets entry ``min(n, len - 1)``.  An entry can be a book payload
(served as JSON), an HTTP status code, ``"timeout"`` (the handler stalls
for ``stall_s`` before answering) or ``"drop"`` (connection closed without
a response).
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import defaultdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping, Sequence
from urllib.parse import parse_qs, urlparse

log = logging.getLogger(__name__)


def book_payload(
    token_id: str,
    bids: Sequence[tuple[str, str]] = (),
    asks: Sequence[tuple[str, str]] = (),
    book_hash: str | None = None,
    timestamp_ms: int | None = None,
) -> dict[str, Any]:
    """A venue-shaped book; level lists are emitted in the venue's order
    (bids ascending, asks descending) so parsers cannot rely on position."""
    out: dict[str, Any] = {
        "market": "0xmock",
        "asset_id": token_id,
        "bids": [{"price": p, "size": s} for p, s in sorted(bids)],
        "asks": [{"price": p, "size": s} for p, s in sorted(asks, reverse=True)],
        "min_order_size": "5",
        "tick_size": "0.01",
        "neg_risk": False,
    }
    if book_hash is not None:
        out["hash"] = book_hash
    if timestamp_ms is not None:
        out["timestamp"] = str(timestamp_ms)
    return out


class MockVenue:
    """Threaded HTTP server on 127.0.0.1 with an ephemeral port."""

    def __init__(self, script: Mapping[str, Sequence[Any]], stall_s: float = 3.0):
        self.script = {tok: list(entries) for tok, entries in script.items()}
        self.stall_s = stall_s
        self.counts: dict[str, int] = defaultdict(int)
        self.requests: list[tuple[float, str]] = []
        self._lock = threading.Lock()
        venue = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # keep test output quiet
                log.debug(fmt, *args)

            def do_GET(self):
                url = urlparse(self.path)
                if url.path != "/book":
                    self._send(404, {"error": "not found"})
                    return
                token = (parse_qs(url.query).get("token_id") or [""])[0]
                entry = venue._next(token)
                if entry is None:
                    self._send(404, {"error": f"unknown token {token}"})
                elif entry == "timeout":
                    time.sleep(venue.stall_s)
                    self._send(504, {"error": "stalled"})
                elif entry == "drop":
                    self.close_connection = True
                    self.connection.close()
                elif isinstance(entry, int):
                    self._send(entry, {"error": "scripted failure"})
                else:
                    self._send(200, entry)

            def _send(self, status: int, body: Any) -> None:
                data = json.dumps(body).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self._thread: threading.Thread | None = None

    def _next(self, token: str):
        with self._lock:
            self.requests.append((time.monotonic(), token))
            entries = self.script.get(token)
            if not entries:
                return None
            n = self.counts[token]
            self.counts[token] += 1
            return entries[min(n, len(entries) - 1)]

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockVenue":
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()

    def __enter__(self) -> "MockVenue":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
