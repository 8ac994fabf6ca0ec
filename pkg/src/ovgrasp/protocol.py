"""Wire formats: command frames, sensor frame stream, UI channel.

Command frames are 4 bytes: magic 0xA5, sequence, token byte, CRC-8.
Sensor frames are a fixed little-endian header followed by the raw
payload. The UI channel is newline-delimited JSON over a bidirectional
socket. All decoders are incremental and resynchronize after garbage.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass

COMMAND_MAGIC = 0xA5
COMMAND_TOKENS = (ord("G"), ord("R"), ord("S"))

SENSOR_MAGIC = b"OVGF"
KIND_DEPTH16 = 0
KIND_RGB8 = 1
BYTES_PER_SAMPLE = {KIND_DEPTH16: 2, KIND_RGB8: 3}

_HEADER = struct.Struct("<4sIQHHBI")
HEADER_SIZE = _HEADER.size  # 25 bytes


class ProtocolError(ValueError):
    pass


class BadMagic(ProtocolError):
    pass


class BadCrc(ProtocolError):
    pass


class InvalidToken(ProtocolError):
    pass


class BadHeader(ProtocolError):
    pass


class BadUiMessage(ProtocolError):
    pass


class SinkClosed(Exception):
    """The byte sink went away mid-stream; streaming stops cleanly."""


def _make_crc8_table(poly: int = 0x07) -> bytes:
    table = bytearray(256)
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table[byte] = crc
    return bytes(table)


_CRC8_TABLE = _make_crc8_table()


def crc8(data: bytes) -> int:
    """CRC-8, polynomial 0x07, init 0x00, no reflection or final xor."""
    crc = 0
    for b in data:
        crc = _CRC8_TABLE[crc ^ b]
    return crc


def encode_command(token: str, seq: int) -> bytes:
    """Build a 4-byte command frame. Token is one of G, R, S."""
    if len(token) != 1 or ord(token) not in COMMAND_TOKENS:
        raise InvalidToken(f"token {token!r}")
    if not 0 <= seq <= 255:
        raise ProtocolError(f"sequence {seq} out of range")
    body = bytes([COMMAND_MAGIC, seq, ord(token)])
    return body + bytes([crc8(body)])


def decode_command(buf: bytes) -> tuple[str, int] | None:
    """Decode one command frame from the start of buf.

    Returns None when fewer than 4 bytes are available. Checks run in
    the order magic, CRC, token, so a corrupted byte anywhere in the
    frame is caught before the token is trusted.
    """
    if len(buf) < 4:
        return None
    if buf[0] != COMMAND_MAGIC:
        raise BadMagic(f"0x{buf[0]:02X}")
    if crc8(bytes(buf[:3])) != buf[3]:
        raise BadCrc(f"expected 0x{crc8(bytes(buf[:3])):02X}, got 0x{buf[3]:02X}")
    if buf[2] not in COMMAND_TOKENS:
        raise InvalidToken(f"byte 0x{buf[2]:02X}")
    return chr(buf[2]), buf[1]


class CommandEncoder:
    """Stateful encoder that numbers frames with a wrapping sequence."""

    def __init__(self, seq: int = 0):
        if not 0 <= seq <= 255:
            raise ProtocolError(f"sequence {seq} out of range")
        self.seq = seq

    def encode(self, token: str) -> bytes:
        frame = encode_command(token, self.seq)
        self.seq = (self.seq + 1) % 256
        return frame


class CommandStreamDecoder:
    """Incremental command-frame decoder with resynchronization.

    feed() may be called with any chunking of the byte stream; the
    concatenation of outputs is identical either way. Corrupt frames
    advance the cursor one byte and bump error_count, so a valid frame
    embedded later in the stream is still found.
    """

    def __init__(self):
        self._buf = bytearray()
        self.error_count = 0

    def feed(self, data: bytes) -> list[tuple[str, int]]:
        self._buf.extend(data)
        out: list[tuple[str, int]] = []
        while len(self._buf) >= 4:
            try:
                decoded = decode_command(bytes(self._buf[:4]))
            except BadMagic:
                nxt = self._buf.find(COMMAND_MAGIC, 1)
                del self._buf[: nxt if nxt >= 0 else len(self._buf)]
                continue
            except (BadCrc, InvalidToken):
                self.error_count += 1
                del self._buf[:1]
                continue
            out.append(decoded)
            del self._buf[:4]
        return out


@dataclass(frozen=True)
class SensorFrameHeader:
    frame_id: int
    timestamp_us: int
    width: int
    height: int
    kind: int
    payload_len: int

    def __post_init__(self) -> None:
        if self.kind not in BYTES_PER_SAMPLE:
            raise BadHeader(f"unknown kind {self.kind}")
        expected = self.width * self.height * BYTES_PER_SAMPLE[self.kind]
        if self.payload_len != expected:
            raise BadHeader(f"payload_len {self.payload_len}, expected {expected}")


def encode_header(h: SensorFrameHeader) -> bytes:
    return _HEADER.pack(SENSOR_MAGIC, h.frame_id, h.timestamp_us,
                        h.width, h.height, h.kind, h.payload_len)


def decode_header(buf: bytes) -> SensorFrameHeader | None:
    """Decode a sensor header from the start of buf; None if short."""
    if len(buf) < HEADER_SIZE:
        return None
    magic, frame_id, ts, w, hgt, kind, plen = _HEADER.unpack(bytes(buf[:HEADER_SIZE]))
    if magic != SENSOR_MAGIC:
        raise BadMagic(magic.hex())
    return SensorFrameHeader(frame_id=frame_id, timestamp_us=ts, width=w,
                             height=hgt, kind=kind, payload_len=plen)


def depth_frame_wire(frame, frame_id: int) -> tuple[SensorFrameHeader, bytes]:
    """Wrap a DepthFrame as (header, payload) for the sensor stream.

    Payload is the raw little-endian uint16 raster.
    """
    payload = frame.data.astype("<u2").tobytes()
    header = SensorFrameHeader(frame_id=frame_id, timestamp_us=frame.timestamp_us,
                               width=frame.width, height=frame.height,
                               kind=KIND_DEPTH16, payload_len=len(payload))
    return header, payload


class FrameStreamDecoder:
    """Incremental sensor-frame decoder; scans forward after garbage."""

    def __init__(self):
        self._buf = bytearray()
        self.error_count = 0

    def _resync(self) -> None:
        nxt = self._buf.find(SENSOR_MAGIC, 1)
        if nxt >= 0:
            del self._buf[:nxt]
        else:
            # Keep a tail shorter than the magic in case it straddles chunks.
            keep = len(SENSOR_MAGIC) - 1
            del self._buf[: max(len(self._buf) - keep, 0)]

    def feed(self, data: bytes) -> list[tuple[SensorFrameHeader, bytes]]:
        self._buf.extend(data)
        out: list[tuple[SensorFrameHeader, bytes]] = []
        while len(self._buf) >= HEADER_SIZE:
            try:
                header = decode_header(bytes(self._buf[:HEADER_SIZE]))
            except BadMagic:
                self._resync()
                continue
            except BadHeader:
                self.error_count += 1
                self._resync()
                continue
            total = HEADER_SIZE + header.payload_len
            if len(self._buf) < total:
                break
            payload = bytes(self._buf[HEADER_SIZE:total])
            del self._buf[:total]
            out.append((header, payload))
        return out


def stream_frames(source, sink, *, realtime: bool = False, interval_s: float = 0.1) -> int:
    """Write (header, payload) pairs from source into sink.

    With realtime=True, frames are paced on a monotonic schedule of
    interval_s. Returns the number of frames written; a sink that
    disappears mid-stream ends the stream cleanly at that count.
    """
    sent = 0
    next_deadline = time.monotonic()
    for header, payload in source:
        if realtime:
            now = time.monotonic()
            if next_deadline > now:
                time.sleep(next_deadline - now)
            next_deadline += interval_s
        try:
            sink.write(encode_header(header))
            sink.write(payload)
        except (BrokenPipeError, ConnectionResetError, ValueError, OSError):
            break
        sent += 1
    return sent


# --- UI channel ------------------------------------------------------------

CLIENT_MESSAGE_TYPES = ("move_hand", "transcript", "reset")


def parse_client_message(line: str) -> dict:
    """Validate one NDJSON line from a UI client.

    Returns the parsed dict. Raises BadUiMessage with a reason for
    anything malformed; the server answers those with an error message
    instead of dying.
    """
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BadUiMessage(f"not JSON: {exc.msg}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise BadUiMessage("message must be an object with a type field")
    mtype = msg["type"]
    if mtype == "move_hand":
        for k in ("du", "dv", "dd"):
            if not isinstance(msg.get(k), (int, float)) or isinstance(msg.get(k), bool):
                raise BadUiMessage(f"move_hand needs numeric {k}")
    elif mtype == "transcript":
        if not isinstance(msg.get("text"), str):
            raise BadUiMessage("transcript needs a text string")
    elif mtype == "reset":
        pass
    else:
        raise BadUiMessage(f"unknown type {mtype!r}")
    return msg


def snapshot_message(intent: dict, telemetry: dict, detections: list[dict],
                     hand: tuple[float, float, float]) -> dict:
    return {"type": "snapshot", "intent": intent, "telemetry": telemetry,
            "detections": detections, "hand": [round(c, 3) for c in hand]}


def error_message(reason: str) -> dict:
    return {"type": "error", "reason": reason}


def encode_ndjson(msg: dict) -> bytes:
    return json.dumps(msg, separators=(",", ":")).encode("utf-8") + b"\n"
