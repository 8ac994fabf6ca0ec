"""Interactive NDJSON server for scenario playback.

Clients connect over TCP, send newline-delimited JSON messages
(move_hand, transcript, reset), and receive one snapshot message per
perception frame. A single simulation thread owns all mutable state;
reader threads only enqueue parsed messages, so client traffic can
never race the pipeline. Scripted scenarios ignore steering, which
keeps their traces identical with or without observers attached.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from collections import deque

from .geometry import HandCentroid
from .intent import TranscriptQueue, snapshot_json
from .protocol import (BadUiMessage, encode_ndjson, error_message,
                       parse_client_message, snapshot_message)
from .sim import (BACKGROUND_MM, FRAME_DT, Scenario, ScenarioRunner,
                  ScenarioTrace)

log = logging.getLogger("ovgrasp.server")

SEND_TIMEOUT_S = 0.5
RECV_POLL_S = 0.5
EVENT_QUEUE_LIMIT = 256

INITIAL_HAND = HandCentroid(320.0, 400.0, 1200.0)


class PortUnavailable(OSError):
    """The requested listen port could not be bound."""


class BaseClient:
    """One connected UI peer; transports subclass send/close."""

    def send(self, msg: dict) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class TcpClient(BaseClient):
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.settimeout(SEND_TIMEOUT_S)
        self._wlock = threading.Lock()

    def send(self, msg: dict) -> None:
        with self._wlock:
            self.sock.sendall(encode_ndjson(msg))

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class UiServer:
    """Serve one scenario to any number of UI clients.

    Interactive scenarios take steering input; scripted ones play back
    their hand path and stop after their configured duration. In both
    modes spoken transcripts from clients are merged with scripted
    ones, stop beating release on conflict downstream.
    """

    def __init__(self, scenario: Scenario, *, host: str = "127.0.0.1",
                 port: int = 8080, out_dir=None, seed: int | None = None,
                 distance_space: str | None = None):
        self.scenario = scenario
        self.host = host
        self.port = port
        self.out_dir = out_dir
        self.runner = ScenarioRunner(scenario, seed=seed,
                                     distance_space=distance_space)
        self.hand = INITIAL_HAND
        self.transcripts = TranscriptQueue(capacity=8)
        self._events: deque[dict] = deque(maxlen=EVENT_QUEUE_LIMIT)
        self._clients: list[BaseClient] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []

    # --- client plumbing (any transport) ---------------------------------

    def attach(self, client: BaseClient) -> None:
        with self._lock:
            self._clients.append(client)
        log.info("client attached (%d connected)", self.client_count)

    def detach(self, client: BaseClient) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)
        client.close()

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    def handle_text(self, client: BaseClient, text: str) -> None:
        """Parse client lines and enqueue them for the sim thread.

        A malformed message gets one error reply, then the client is
        dropped: a UI that cannot speak the protocol should fail loudly
        during development, not limp along.
        """
        for line in text.splitlines():
            if not line.strip():
                continue
            try:
                msg = parse_client_message(line)
            except BadUiMessage as exc:
                try:
                    client.send(error_message(str(exc)))
                except OSError:
                    pass
                self.detach(client)
                return
            if msg["type"] == "transcript":
                self.transcripts.push(msg["text"])
            else:
                self._events.append(msg)

    def _broadcast(self, msg: dict) -> None:
        with self._lock:
            targets = list(self._clients)
        for client in targets:
            try:
                client.send(msg)
            except OSError:
                log.info("client dropped while sending")
                self.detach(client)

    # --- TCP transport ----------------------------------------------------

    def start_listener(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
            sock.listen()
        except OSError as exc:
            sock.close()
            raise PortUnavailable(f"cannot listen on {self.host}:{self.port}: {exc}") from exc
        sock.settimeout(0.2)
        self._listener = sock
        self.port = sock.getsockname()[1]  # resolves port 0 to the real one
        t = threading.Thread(target=self._accept_loop, name="ui-accept", daemon=True)
        t.start()
        self._threads.append(t)
        log.info("listening on %s:%d", self.host, self.port)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            client = TcpClient(conn)
            self.attach(client)
            t = threading.Thread(target=self._read_loop, args=(client,),
                                 name="ui-reader", daemon=True)
            t.start()

    def _read_loop(self, client: TcpClient) -> None:
        buf = b""
        while not self._stop.is_set():
            try:
                chunk = client.sock.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                try:
                    text = line.decode("utf-8")
                except UnicodeDecodeError:
                    self.detach(client)
                    return
                self.handle_text(client, text)
        self.detach(client)

    # --- simulation loop ----------------------------------------------------

    def _apply_events(self) -> None:
        while self._events:
            msg = self._events.popleft()
            if msg["type"] == "reset":
                self.runner.reset()
                self.hand = INITIAL_HAND
            elif msg["type"] == "move_hand" and self.scenario.interactive:
                intr = self.scenario.intrinsics
                self.hand = HandCentroid(
                    min(max(self.hand.u + float(msg["du"]), 0.0), intr.width - 1.0),
                    min(max(self.hand.v + float(msg["dv"]), 0.0), intr.height - 1.0),
                    min(max(self.hand.d + float(msg["dd"]), 1.0), float(BACKGROUND_MM)))

    def _frame_transcript(self) -> str | None:
        parts = []
        scripted = self.runner.due_transcript()
        if scripted is not None:
            parts.append(scripted)
        while True:
            spoken = self.transcripts.pop()
            if spoken is None:
                break
            parts.append(spoken)
        return "\n".join(parts) if parts else None

    def step_once(self) -> dict:
        """Advance one frame and return the snapshot broadcast to clients."""
        self._apply_events()
        hand = self.hand if self.scenario.interactive \
            else self.scenario.hand_at(self.runner.t)
        record = self.runner.step_frame(hand, self._frame_transcript())
        telemetry = self.runner.trace.telemetry[-1].to_json()
        detections = [{"frame": record.index, "label": d.label,
                       "score": round(d.score, 6),
                       "box": [round(c, 3) for c in d.box], "id": d.object_id}
                      for d in record.detections]
        return snapshot_message(snapshot_json(self.runner.state,
                                              tau=self.runner.intent_cfg.tau),
                                telemetry, detections, (hand.u, hand.v, hand.d))

    def serve(self) -> ScenarioTrace:
        """Run the paced loop until the script ends or stop() is called.

        Frames follow a monotonic 10 Hz schedule; when the host stalls
        longer than a second the schedule resyncs instead of bursting.
        """
        scripted_frames = None
        if not self.scenario.interactive:
            scripted_frames = int(round(self.scenario.duration_s / FRAME_DT))
        deadline = time.monotonic()
        completed = False
        while not self._stop.is_set():
            if scripted_frames is not None and self.runner.frame_index >= scripted_frames:
                completed = True
                break
            self._broadcast(self.step_once())
            deadline += FRAME_DT
            now = time.monotonic()
            if deadline < now - 1.0:
                deadline = now
            elif deadline > now:
                time.sleep(deadline - now)
        trace = self.runner.finish(interrupted=not completed)
        if self.out_dir is not None:
            trace.write(self.out_dir)
        self.shutdown()
        return trace

    def stop(self) -> None:
        self._stop.set()

    def shutdown(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            clients = list(self._clients)
            self._clients.clear()
        for client in clients:
            client.close()


def serve_scenario(scenario: Scenario, *, host: str = "127.0.0.1",
                   port: int = 8080, out_dir=None, seed: int | None = None,
                   distance_space: str | None = None) -> UiServer:
    """Bind the listener and return the server; caller runs serve()."""
    server = UiServer(scenario, host=host, port=port, out_dir=out_dir,
                      seed=seed, distance_space=distance_space)
    server.start_listener()
    return server
