"""Browser access: static files plus a WebSocket endpoint.

Browsers cannot open raw TCP sockets, so this module bridges them onto
the same NDJSON channel the TCP server speaks. The WebSocket layer is
deliberately small: text frames only, no fragmentation, no extensions.
Each text frame carries one JSON message in either direction.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import struct
import threading
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .server import BaseClient, UiServer

log = logging.getLogger("ovgrasp.webbridge")

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

PLACEHOLDER = b"""<!doctype html>
<meta charset="utf-8"><title>ovgrasp</title>
<p>No UI bundle found. Build the frontend and pass its dist directory
with --ui-dir, or connect over raw TCP NDJSON instead.</p>
"""


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_text_frame(payload: bytes) -> bytes:
    """Server-to-client text frame; unmasked per RFC 6455."""
    n = len(payload)
    if n < 126:
        head = struct.pack("!BB", 0x80 | OP_TEXT, n)
    elif n < 1 << 16:
        head = struct.pack("!BBH", 0x80 | OP_TEXT, 126, n)
    else:
        head = struct.pack("!BBQ", 0x80 | OP_TEXT, 127, n)
    return head + payload


def encode_close_frame() -> bytes:
    return struct.pack("!BB", 0x80 | OP_CLOSE, 0)


def _read_exact(rfile, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = rfile.read(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return buf


def read_frame(rfile) -> tuple[int, bytes]:
    """Read one client frame; returns (opcode, unmasked payload).

    Client frames must be masked and unfragmented; anything else is a
    protocol violation and raises.
    """
    b0, b1 = _read_exact(rfile, 2)
    if not b0 & 0x80:
        raise ConnectionError("fragmented frames not supported")
    opcode = b0 & 0x0F
    if not b1 & 0x80:
        raise ConnectionError("client frames must be masked")
    length = b1 & 0x7F
    if length == 126:
        (length,) = struct.unpack("!H", _read_exact(rfile, 2))
    elif length == 127:
        (length,) = struct.unpack("!Q", _read_exact(rfile, 8))
    mask = _read_exact(rfile, 4)
    data = bytearray(_read_exact(rfile, length))
    for i in range(len(data)):
        data[i] ^= mask[i % 4]
    return opcode, bytes(data)


class WsClient(BaseClient):
    def __init__(self, connection):
        self.connection = connection
        self._wlock = threading.Lock()

    def send(self, msg: dict) -> None:
        data = json.dumps(msg, separators=(",", ":")).encode("utf-8")
        with self._wlock:
            self.connection.sendall(encode_text_frame(data))

    def close(self) -> None:
        try:
            with self._wlock:
                self.connection.sendall(encode_close_frame())
        except OSError:
            pass
        try:
            self.connection.close()
        except OSError:
            pass


class BridgeHandler(SimpleHTTPRequestHandler):
    """Static files for the UI bundle; /ws upgrades to WebSocket."""

    server_version = "ovgrasp-bridge"
    protocol_version = "HTTP/1.1"
    ui_server: UiServer  # injected via partial
    has_bundle: bool

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("%s " + fmt, self.address_string(), *args)

    def do_GET(self):
        if self.headers.get("Upgrade", "").lower() == "websocket":
            self._serve_websocket()
        elif self.has_bundle:
            super().do_GET()
        elif self.path in ("/", "/index.html"):
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(PLACEHOLDER)))
            self.end_headers()
            self.wfile.write(PLACEHOLDER)
        else:
            self.send_error(404)

    def _serve_websocket(self) -> None:
        key = self.headers.get("Sec-WebSocket-Key")
        if not key:
            self.send_error(400, "missing Sec-WebSocket-Key")
            return
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", accept_key(key))
        self.end_headers()
        self.close_connection = True

        client = WsClient(self.connection)
        self.ui_server.attach(client)
        try:
            while True:
                opcode, payload = read_frame(self.rfile)
                if opcode == OP_CLOSE:
                    break
                if opcode == OP_PING:
                    with client._wlock:
                        self.connection.sendall(
                            struct.pack("!BB", 0x80 | OP_PONG, len(payload)) + payload)
                elif opcode == OP_TEXT:
                    self.ui_server.handle_text(client, payload.decode("utf-8"))
        except (ConnectionError, OSError, UnicodeDecodeError):
            pass
        finally:
            self.ui_server.detach(client)


def start_bridge(ui_server: UiServer, *, host: str = "127.0.0.1",
                 http_port: int = 8081, ui_dir=None) -> ThreadingHTTPServer:
    """Start the HTTP/WebSocket bridge in a daemon thread."""
    bundle = Path(ui_dir) if ui_dir is not None else None
    has_bundle = bundle is not None and bundle.is_dir()
    # A per-bridge subclass keeps two bridges in one process independent.
    bound = type("BoundBridgeHandler", (BridgeHandler,),
                 {"ui_server": ui_server, "has_bundle": has_bundle})
    handler = partial(bound, directory=str(bundle) if has_bundle else None)
    httpd = ThreadingHTTPServer((host, http_port), handler)
    t = threading.Thread(target=httpd.serve_forever, name="ui-bridge", daemon=True)
    t.start()
    log.info("bridge on http://%s:%d (bundle: %s)", host, http_port,
             bundle if has_bundle else "placeholder")
    return httpd
