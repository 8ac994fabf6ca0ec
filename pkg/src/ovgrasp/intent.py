"""Multimodal intent: target selection, stability gating, speech overrides.

Vision proposes (grip the nearest stable target), speech disposes
(release and stop override vision). A short queue of consecutive
nearest-target observations debounces the grip decision so a hand
sweeping past an object does not trigger it.
"""

from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass, field

from .geometry import GraspPointGraph, HandCentroid, node_distance


class IntentError(ValueError):
    pass


class Token(str, enum.Enum):
    GRIP = "G"
    RELEASE = "R"
    STOP = "S"


class IntentPhase(str, enum.Enum):
    IDLE = "IDLE"
    GRASP_TRIGGERED = "GRASP_TRIGGERED"
    HOLDING = "HOLDING"
    RELEASING = "RELEASING"
    STOPPED = "STOPPED"


@dataclass(frozen=True)
class Command:
    """A single-letter actuation command with its origin."""

    token: Token
    timestamp_us: int = 0
    cause: str = "vision"

    def __post_init__(self) -> None:
        if self.token is Token.GRIP and self.cause != "vision":
            raise IntentError("G commands only come from vision")
        if self.token in (Token.RELEASE, Token.STOP) and self.cause != "speech":
            raise IntentError(f"{self.token.value} commands only come from speech")


@dataclass(frozen=True)
class IntentConfig:
    tau: int = 5
    activation_radius: float = 150.0
    keywords: dict[str, Token] = field(
        default_factory=lambda: {"release": Token.RELEASE, "stop": Token.STOP})
    closed_threshold: float = 0.95
    open_threshold: float = 0.02

    def __post_init__(self) -> None:
        if self.tau < 1:
            raise IntentError("tau must be at least 1")
        if self.activation_radius <= 0.0:
            raise IntentError("activation radius must be positive")
        for phrase, tok in self.keywords.items():
            if tok not in (Token.RELEASE, Token.STOP):
                raise IntentError(f"keyword {phrase!r} maps to {tok}, only R/S allowed")


@dataclass
class IntentState:
    phase: IntentPhase = IntentPhase.IDLE
    queue: deque = field(default_factory=deque)
    current_target: int | None = None
    last_delta_min: float | None = None

    def copy(self, tau: int) -> "IntentState":
        return IntentState(phase=self.phase, queue=deque(self.queue, maxlen=tau),
                           current_target=self.current_target,
                           last_delta_min=self.last_delta_min)


def select_target(graph: GraspPointGraph, hand: HandCentroid,
                  distance=node_distance) -> tuple[int, float] | None:
    """Nearest node to the hand as (object_id, distance), or None.

    Ties break toward the smaller object id so selection is total.
    """
    best: tuple[int, float] | None = None
    for node in graph.nodes:
        d = distance(node, hand)
        if best is None or (d, node.object_id) < (best[1], best[0]):
            best = (node.object_id, d)
    return best


def step_queue(state: IntentState, target: int | None, delta_min: float,
               cfg: IntentConfig, timestamp_us: int = 0) -> Command | None:
    """Feed one frame's nearest-target observation into the stability queue.

    Mutates state. An observation only counts when a target exists and
    lies within the activation radius; anything else clears the queue,
    as does a change of nearest target. When tau consecutive
    observations of one target have accumulated and the machine is
    IDLE, a G command is emitted and the phase advances, so G fires at
    most once per approach.
    """
    if state.queue.maxlen != cfg.tau:
        state.queue = deque(state.queue, maxlen=cfg.tau)
    if target is None or delta_min > cfg.activation_radius:
        state.queue.clear()
        state.current_target = target
        state.last_delta_min = delta_min if target is not None else None
        return None
    if state.queue and state.queue[-1] != target:
        state.queue.clear()
    state.queue.append(target)
    state.current_target = target
    state.last_delta_min = delta_min
    if len(state.queue) == cfg.tau and state.phase is IntentPhase.IDLE:
        state.phase = IntentPhase.GRASP_TRIGGERED
        return Command(Token.GRIP, timestamp_us, "vision")
    return None


def parse_transcript(text: str, cfg: IntentConfig, timestamp_us: int = 0) -> Command | None:
    """Scan a transcript for command keywords.

    Matching is case-insensitive substring search. If both a stop and a
    release phrase appear, stop wins.
    """
    lowered = text.lower()
    hits = {tok for phrase, tok in cfg.keywords.items() if phrase.lower() in lowered}
    if Token.STOP in hits:
        return Command(Token.STOP, timestamp_us, "speech")
    if Token.RELEASE in hits:
        return Command(Token.RELEASE, timestamp_us, "speech")
    return None


@dataclass(frozen=True)
class FrameInputs:
    """Everything the intent machine sees in one perception frame."""

    graph: GraspPointGraph
    hand: HandCentroid
    transcript: str | None = None
    closure: float | None = None
    timestamp_us: int = 0


def advance(state: IntentState, inputs: FrameInputs, cfg: IntentConfig,
            distance=node_distance) -> tuple[IntentState, Command | None]:
    """One tick of the intent machine. Pure: returns a new state.

    Order within a tick: closure feedback first (the hand physically
    finished closing or opening), then speech (safety overrides beat
    vision), then the vision queue. The structure guarantees at most
    one command per tick: a speech command moves the phase out of IDLE
    before the vision branch runs, and the vision branch only emits in
    IDLE.
    """
    s = state.copy(cfg.tau)

    if s.phase is IntentPhase.GRASP_TRIGGERED and inputs.closure is not None \
            and inputs.closure >= cfg.closed_threshold:
        s.phase = IntentPhase.HOLDING
    elif s.phase is IntentPhase.RELEASING and inputs.closure is not None \
            and inputs.closure <= cfg.open_threshold:
        s.phase = IntentPhase.IDLE
        s.queue.clear()  # a fresh approach is required before the next grip

    cmd: Command | None = None
    if inputs.transcript is not None:
        spoken = parse_transcript(inputs.transcript, cfg, inputs.timestamp_us)
        if spoken is not None:
            if spoken.token is Token.STOP and s.phase is not IntentPhase.STOPPED:
                s.phase = IntentPhase.STOPPED
                s.queue.clear()
                cmd = spoken
            elif spoken.token is Token.RELEASE and s.phase in (IntentPhase.HOLDING,
                                                               IntentPhase.STOPPED):
                s.phase = IntentPhase.RELEASING
                cmd = spoken

    sel = select_target(inputs.graph, inputs.hand, distance)
    target, delta = sel if sel is not None else (None, float("inf"))
    vision_cmd = step_queue(s, target, delta, cfg, inputs.timestamp_us)
    if cmd is None:
        cmd = vision_cmd
    return s, cmd


def snapshot_json(state: IntentState, tau: int | None = None) -> dict:
    """Intent state as the wire-format snapshot dict.

    Passing tau lets UI clients scale the queue meter; queue_fill alone
    has no denominator.
    """
    doc = {
        "phase": state.phase.value,
        "queue_fill": len(state.queue),
        "target": state.current_target,
        "delta_min": state.last_delta_min,
    }
    if tau is not None:
        doc["tau"] = tau
    return doc


class TranscriptQueue:
    """Thread-safe bounded FIFO of transcripts; overflow drops the oldest."""

    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise IntentError("capacity must be at least 1")
        self.capacity = capacity
        self.dropped = 0
        self._items: deque[str] = deque()
        self._lock = threading.Lock()

    def push(self, text: str) -> None:
        with self._lock:
            if len(self._items) == self.capacity:
                self._items.popleft()
                self.dropped += 1
            self._items.append(text)

    def pop(self) -> str | None:
        with self._lock:
            if self._items:
                return self._items.popleft()
            return None

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
