"""Scene model, synthetic frames, and deterministic scenario playback.

A scene is a handful of labeled boxes in camera space. Rendering paints
object depths into a far background; detection, intent, wire encoding,
and actuation then run in lockstep: one perception frame at 10 Hz, ten
control ticks at 100 Hz. Everything is seeded, so a scenario replays
bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .actuation import Controller, ControllerConfig, PidGains, Telemetry
from .evaluation import GroundTruth, scenario_metrics
from .geometry import (DepthFrame, GraspPointGraph, HandCentroid, Intrinsics,
                       NoValidDepth, build_graph, extract_grasp_point,
                       metric_node_distance, node_distance, project)
from .intent import (Command, FrameInputs, IntentConfig, IntentState, Token,
                     advance)
from .ovdetect import (Detection, IdTracker, Vocabulary, embedding_for_label,
                       load_vocabulary, mock_detect)
from .protocol import CommandEncoder, CommandStreamDecoder

FRAME_DT = 0.1
CONTROL_TICKS_PER_FRAME = 10
BACKGROUND_MM = 5000

DEFAULT_INTRINSICS = Intrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0,
                                width=640, height=480)


class ScenarioInvalid(ValueError):
    """Scenario file rejected; the message names the offending location."""


@dataclass(frozen=True)
class SceneObject:
    """A box-shaped object in camera space."""

    key: str
    label: str
    position: tuple[float, float, float]  # mm
    extent: tuple[float, float, float]    # mm
    grasp_type: str
    latent: np.ndarray

    def __post_init__(self) -> None:
        if min(self.extent) <= 0.0:
            raise ScenarioInvalid(f"object {self.key!r}: extent must be positive")


@dataclass(frozen=True)
class VisibleObject:
    """A scene object as seen by the camera this frame."""

    key: str
    label: str
    box: tuple[float, float, float, float]
    depth_mm: float
    latent: np.ndarray


@dataclass
class SceneSnapshot:
    frame_id: int
    t_us: int
    objects: list[VisibleObject]
    depth: DepthFrame | None = None
    hand: HandCentroid | None = None


def object_view(obj: SceneObject, intr: Intrinsics) -> VisibleObject | None:
    """Project one object; None when behind the camera or off frame."""
    x, y, z = obj.position
    if z <= 0.0:
        return None
    cu, cv = project((x, y, z), intr)
    if not intr.contains(cu, cv):
        return None
    hw = intr.fx * obj.extent[0] / (2.0 * z)
    hh = intr.fy * obj.extent[1] / (2.0 * z)
    return VisibleObject(key=obj.key, label=obj.label,
                         box=(cu - hw, cv - hh, cu + hw, cv + hh),
                         depth_mm=z, latent=obj.latent)


def render_snapshot(objects: list[SceneObject], hand: HandCentroid | None,
                    intr: Intrinsics, frame_id: int, t_us: int,
                    with_depth: bool = True) -> SceneSnapshot:
    """Synthesize what the camera sees: boxes and a painted depth frame.

    Depth is box-painting over a 5000 mm background, far objects first
    so nearer ones overwrite. Objects behind the camera or with centers
    off frame are omitted.
    """
    views = [v for v in (object_view(o, intr) for o in objects) if v is not None]
    depth = None
    if with_depth:
        data = np.full((intr.height, intr.width), BACKGROUND_MM, dtype=np.uint16)
        for v in sorted(views, key=lambda v: -v.depth_mm):
            x1, y1, x2, y2 = v.box
            u0 = max(int(math.floor(x1)), 0)
            v0 = max(int(math.floor(y1)), 0)
            u1 = min(int(math.ceil(x2)) + 1, intr.width)
            v1 = min(int(math.ceil(y2)) + 1, intr.height)
            data[v0:v1, u0:u1] = int(round(v.depth_mm))
        depth = DepthFrame(data, timestamp_us=t_us)
    return SceneSnapshot(frame_id=frame_id, t_us=t_us, objects=views,
                         depth=depth, hand=hand)


# --- scenario loading -------------------------------------------------------

@dataclass(frozen=True)
class HandWaypoint:
    t: float
    u: float
    v: float
    d: float


@dataclass(frozen=True)
class ScenarioConfig:
    tau: int = 5
    activation_radius: float = 150.0
    distance_space: str = "mixed"  # or "metric"
    noise_sigma: float = 0.0
    score_threshold: float = 0.5
    edge_epsilon: float = 200.0
    track_dist: float = 50.0
    controller: ControllerConfig = ControllerConfig()

    def __post_init__(self) -> None:
        if self.distance_space not in ("mixed", "metric"):
            raise ScenarioInvalid(f"config.distance_space: {self.distance_space!r}")


@dataclass
class Scenario:
    name: str
    objects: list[SceneObject]
    hand_path: list[HandWaypoint] | str  # waypoints or "interactive"
    transcripts: list[tuple[float, str]]
    duration_s: float
    seed: int
    vocab: Vocabulary
    cfg: ScenarioConfig
    intrinsics: Intrinsics = DEFAULT_INTRINSICS

    @property
    def interactive(self) -> bool:
        return self.hand_path == "interactive"

    def hand_at(self, t: float) -> HandCentroid:
        """Piecewise-linear interpolation over the scripted waypoints."""
        path = self.hand_path
        if isinstance(path, str):
            raise ScenarioInvalid("interactive scenario has no scripted hand path")
        if t <= path[0].t:
            w = path[0]
            return HandCentroid(w.u, w.v, w.d)
        if t >= path[-1].t:
            w = path[-1]
            return HandCentroid(w.u, w.v, w.d)
        for a, b in zip(path, path[1:]):
            if a.t <= t <= b.t:
                f = (t - a.t) / (b.t - a.t)
                return HandCentroid(a.u + f * (b.u - a.u),
                                    a.v + f * (b.v - a.v),
                                    a.d + f * (b.d - a.d))
        raise ScenarioInvalid("hand path interpolation fell through")


def _require(raw: dict, key: str, where: str):
    if key not in raw:
        raise ScenarioInvalid(f"{where}: missing {key!r}")
    return raw[key]


def _vec(raw, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(raw, (list, tuple)) or len(raw) != n:
        raise ScenarioInvalid(f"{where}: expected {n} numbers")
    try:
        return tuple(float(x) for x in raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"{where}: {exc}") from exc


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file.

    The vocabulary reference is resolved relative to the scenario file.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ScenarioInvalid(f"{path}: top level must be an object")

    name = raw.get("name", path.stem)
    seed = int(raw.get("seed", 0))
    vocab_ref = _require(raw, "vocabulary", str(path))
    vocab = load_vocabulary(path.parent / vocab_ref)

    cfg_raw = raw.get("config", {})
    ctl_raw = cfg_raw.pop("controller", {}) if isinstance(cfg_raw, dict) else {}
    try:
        gains_raw = ctl_raw.pop("gains", None)
        controller = ControllerConfig(**ctl_raw) if gains_raw is None else \
            ControllerConfig(gains=PidGains(**gains_raw), **ctl_raw)
        cfg = ScenarioConfig(controller=controller, **cfg_raw)
    except TypeError as exc:
        raise ScenarioInvalid(f"config: {exc}") from exc

    objects: list[SceneObject] = []
    seen_labels: set[str] = set()
    for i, entry in enumerate(_require(raw, "objects", str(path))):
        where = f"objects[{i}]"
        label = _require(entry, "label", where)
        if label in seen_labels:
            raise ScenarioInvalid(f"{where}: duplicate label {label!r}")
        seen_labels.add(label)
        objects.append(SceneObject(
            key=entry.get("key", label),
            label=label,
            position=_vec(_require(entry, "position", where), 3, f"{where}.position"),
            extent=_vec(_require(entry, "extent", where), 3, f"{where}.extent"),
            grasp_type=entry.get("grasp_type", "cylindrical"),
            latent=embedding_for_label(label, vocab.seed)))

    hp_raw = _require(raw, "hand_path", str(path))
    hand_path: list[HandWaypoint] | str
    if hp_raw == "interactive":
        hand_path = "interactive"
    else:
        hand_path = []
        last_t = -math.inf
        for i, wp in enumerate(hp_raw):
            where = f"hand_path[{i}]"
            t = float(_require(wp, "t", where))
            if t <= last_t:
                raise ScenarioInvalid(f"{where}: times must strictly increase")
            last_t = t
            u, v, d = (float(_require(wp, k, where)) for k in ("u", "v", "d"))
            if not DEFAULT_INTRINSICS.contains(u, v) or d <= 0.0:
                raise ScenarioInvalid(f"{where}: waypoint outside frame or depth ≤ 0")
            hand_path.append(HandWaypoint(t, u, v, d))
        if not hand_path:
            raise ScenarioInvalid("hand_path: empty")

    transcripts: list[tuple[float, str]] = []
    for i, tr in enumerate(raw.get("transcripts", [])):
        where = f"transcripts[{i}]"
        transcripts.append((float(_require(tr, "t", where)),
                            str(_require(tr, "text", where))))
    transcripts.sort(key=lambda p: p[0])

    duration = float(raw.get("duration_s", 0.0))
    if hand_path != "interactive" and duration <= 0.0:
        raise ScenarioInvalid("duration_s: required and positive for scripted runs")

    return Scenario(name=name, objects=objects, hand_path=hand_path,
                    transcripts=transcripts, duration_s=duration, seed=seed,
                    vocab=vocab, cfg=cfg)


# --- playback ---------------------------------------------------------------

@dataclass
class FrameRecord:
    index: int
    t: float
    hand: HandCentroid
    detections: list[Detection]
    graph: GraspPointGraph
    target_id: int | None
    target_label: str | None
    delta_min: float | None
    command: str | None
    phase: str
    closure: float
    gt_nearest_label: str | None
    gt_delta: float | None

    def to_json(self) -> dict:
        return {
            "frame": self.index,
            "t": round(self.t, 3),
            "hand": [round(self.hand.u, 3), round(self.hand.v, 3), round(self.hand.d, 3)],
            "phase": self.phase,
            "closure": round(self.closure, 6),
            "target": self.target_id,
            "delta_min": None if self.delta_min is None else round(self.delta_min, 3),
            "command": self.command,
            "gt_nearest": None if self.gt_nearest_label is None else
                {"label": self.gt_nearest_label, "delta": round(self.gt_delta, 3)},
            "detections": [{"id": d.object_id, "label": d.label,
                            "score": round(d.score, 6),
                            "box": [round(c, 3) for c in d.box]}
                           for d in self.detections],
            "nodes": [[n.u, n.v, round(n.d, 3), n.object_id, n.label]
                      for n in self.graph.nodes],
            "edges": [[e.i, e.j, round(e.length, 3)] for e in self.graph.edges],
        }


@dataclass
class ScenarioTrace:
    name: str
    frames: list[FrameRecord] = field(default_factory=list)
    telemetry: list[Telemetry] = field(default_factory=list)
    outcome: dict | None = None
    activation_radius: float = 150.0
    open_threshold: float = 0.02

    def trace_lines(self) -> list[str]:
        return [json.dumps(f.to_json(), separators=(",", ":")) for f in self.frames]

    def telemetry_lines(self) -> list[str]:
        return [json.dumps(s.to_json(), separators=(",", ":")) for s in self.telemetry]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.jsonl").write_text("\n".join(self.trace_lines()) + "\n",
                                         encoding="utf-8")
        (out / "telemetry.jsonl").write_text("\n".join(self.telemetry_lines()) + "\n",
                                             encoding="utf-8")
        doc = {"outcome": self.outcome, "metrics": scenario_metrics(self)}
        (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")


class ScenarioRunner:
    """Steps one scenario frame at a time; owns all pipeline state.

    Batch playback and the interactive server share this engine so both
    produce identical traces for identical inputs.
    """

    def __init__(self, scenario: Scenario, *, seed: int | None = None,
                 distance_space: str | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        space = distance_space or scenario.cfg.distance_space
        if space not in ("mixed", "metric"):
            raise ScenarioInvalid(f"distance_space: {space!r}")
        self.distance = node_distance if space == "mixed" else \
            metric_node_distance(scenario.intrinsics)
        self.intent_cfg = IntentConfig(tau=scenario.cfg.tau,
                                       activation_radius=scenario.cfg.activation_radius)
        self.reset()

    def reset(self) -> None:
        s = self.scenario
        self.frame_index = 0
        self.tracker = IdTracker(s.cfg.track_dist)
        self.state = IntentState()
        self.controller = Controller(s.cfg.controller)
        self.encoder = CommandEncoder()
        self.decoder = CommandStreamDecoder()
        self.trace = ScenarioTrace(name=s.name,
                                   activation_radius=s.cfg.activation_radius,
                                   open_threshold=self.intent_cfg.open_threshold)
        self._pending_transcripts = list(s.transcripts)

    @property
    def t(self) -> float:
        return self.frame_index * FRAME_DT

    def due_transcript(self) -> str | None:
        """Pop the next scripted transcript due at the current frame time."""
        if self._pending_transcripts and self._pending_transcripts[0][0] <= self.t + 1e-9:
            return self._pending_transcripts.pop(0)[1]
        return None

    def step_frame(self, hand: HandCentroid, transcript: str | None) -> FrameRecord:
        s = self.scenario
        t = self.t
        t_us = self.frame_index * 100000

        snapshot = render_snapshot(s.objects, hand, s.intrinsics,
                                   self.frame_index, t_us, with_depth=True)
        dets = mock_detect(snapshot, s.vocab, self.seed,
                           sigma=s.cfg.noise_sigma,
                           score_threshold=s.cfg.score_threshold)
        dets = self.tracker.update(dets)

        # Single virtual camera: depth is already on the color grid, so
        # registration would be the identity map; skip the copy.
        depth = snapshot.depth
        points = []
        for d in dets:
            try:
                points.append(extract_grasp_point(d.box, depth, d.object_id, d.label))
            except NoValidDepth:
                continue
        graph = build_graph(points, s.cfg.edge_epsilon)

        closure = self.controller.closure
        inputs = FrameInputs(graph=graph, hand=hand, transcript=transcript,
                             closure=closure, timestamp_us=t_us)
        self.state, cmd = advance(self.state, inputs, self.intent_cfg, self.distance)

        if cmd is not None:
            # Commands cross the wire even in batch mode, so framing bugs
            # cannot hide behind direct calls.
            for token, _seq in self.decoder.feed(self.encoder.encode(cmd.token.value)):
                cause = "vision" if token == "G" else "speech"
                self.controller.mailbox.post(Command(Token(token), t_us, cause))

        gt_label, gt_delta = self._gt_nearest(snapshot, hand)
        record = FrameRecord(
            index=self.frame_index, t=t, hand=hand, detections=dets, graph=graph,
            target_id=self.state.current_target,
            target_label=self._label_of(graph, self.state.current_target),
            delta_min=self.state.last_delta_min,
            command=None if cmd is None else cmd.token.value,
            phase=self.state.phase.value, closure=closure,
            gt_nearest_label=gt_label, gt_delta=gt_delta)
        self.trace.frames.append(record)

        dt = self.controller.cfg.dt
        for k in range(CONTROL_TICKS_PER_FRAME):
            sample = self.controller.tick()
            # Anchor telemetry time to the global tick count so the frame
            # clock and control clock cannot drift apart.
            tick = self.frame_index * CONTROL_TICKS_PER_FRAME + k + 1
            self.trace.telemetry.append(replace(sample, t=round(tick * dt, 9)))

        self.frame_index += 1
        return record

    @staticmethod
    def _label_of(graph: GraspPointGraph, object_id: int | None) -> str | None:
        if object_id is None:
            return None
        for n in graph.nodes:
            if n.object_id == object_id:
                return n.label
        return None

    def _gt_nearest(self, snapshot: SceneSnapshot,
                    hand: HandCentroid) -> tuple[str | None, float | None]:
        best_label, best_delta = None, None
        for v in snapshot.objects:
            x1, y1, x2, y2 = v.box
            node = _GtNode((x1 + x2) / 2.0, (y1 + y2) / 2.0, v.depth_mm)
            delta = self.distance(node, hand)
            if best_delta is None or delta < best_delta:
                best_label, best_delta = v.label, delta
        return best_label, best_delta

    def finish(self, interrupted: bool = False) -> ScenarioTrace:
        commands: dict[str, int] = {"G": 0, "R": 0, "S": 0}
        for fr in self.trace.frames:
            if fr.command is not None:
                commands[fr.command] += 1
        self.trace.outcome = {
            "frames": len(self.trace.frames),
            "final_phase": self.state.phase.value,
            "final_closure": round(self.controller.closure, 6),
            "commands": commands,
            "interrupted": interrupted,
        }
        return self.trace


@dataclass(frozen=True)
class _GtNode:
    """Duck-typed stand-in for GraspPoint in ground-truth distance checks."""
    u: float
    v: float
    d: float


def run_scenario(scenario: Scenario, *, seed: int | None = None,
                 distance_space: str | None = None) -> ScenarioTrace:
    """Play a scripted scenario to completion. Deterministic."""
    if scenario.interactive:
        raise ScenarioInvalid("interactive scenario requires the server, not batch run")
    runner = ScenarioRunner(scenario, seed=seed, distance_space=distance_space)
    n_frames = int(round(scenario.duration_s / FRAME_DT))
    for _ in range(n_frames):
        hand = scenario.hand_at(runner.t)
        runner.step_frame(hand, runner.due_transcript())
    return runner.finish()


# --- ablation dataset -------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    label: str
    split: str
    grasp_type: str
    extent: tuple[float, float, float]


def load_object_catalog(path) -> list[CatalogEntry]:
    """Read the object catalog: labels with split tags, grasp types, sizes."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    out = []
    try:
        for entry in raw["objects"]:
            out.append(CatalogEntry(label=entry["label"], split=entry["split"],
                                    grasp_type=entry["grasp_type"],
                                    extent=tuple(float(x) for x in entry["extent"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"object catalog {path}: {exc}") from exc
    return out


def build_ablation_dataset(catalog: list[CatalogEntry], vocab: Vocabulary, *,
                           groups: int = 5, keyframes: int = 20,
                           seed: int = 0,
                           intr: Intrinsics = DEFAULT_INTRINSICS
                           ) -> tuple[list[SceneSnapshot], list[GroundTruth]]:
    """Synthesize grouped keyframe scenes with ground truth.

    The catalog objects are partitioned into groups; each group yields
    keyframes snapshots with per-keyframe positional jitter. Frame ids
    are globally unique. No depth frames: detection scoring is box-only.
    """
    if len(catalog) % groups != 0:
        raise ScenarioInvalid(f"{len(catalog)} objects do not split into {groups} groups")
    per_group = len(catalog) // groups
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(catalog))

    snapshots: list[SceneSnapshot] = []
    gts: list[GroundTruth] = []
    slot_x = np.linspace(-170.0, 170.0, per_group)
    for g in range(groups):
        members = [catalog[i] for i in order[g * per_group:(g + 1) * per_group]]
        for k in range(keyframes):
            frame_id = g * keyframes + k
            scene: list[SceneObject] = []
            for slot, entry in enumerate(members):
                jitter = rng.normal(0.0, 15.0, size=3)
                pos = (float(slot_x[slot] + jitter[0]),
                       float(40.0 + jitter[1]),
                       float(max(720.0 + 40.0 * slot + jitter[2], 400.0)))
                scene.append(SceneObject(key=entry.label, label=entry.label,
                                         position=pos, extent=entry.extent,
                                         grasp_type=entry.grasp_type,
                                         latent=embedding_for_label(entry.label, vocab.seed)))
            snap = render_snapshot(scene, None, intr, frame_id,
                                   frame_id * 100000, with_depth=False)
            snapshots.append(snap)
            splits = {e.label: e.split for e in members}
            for v in snap.objects:
                gts.append(GroundTruth(frame_id=frame_id, label=v.label,
                                       box=v.box, split=splits[v.label]))
    return snapshots, gts


def detect_over_snapshots(snapshots: list[SceneSnapshot], vocab: Vocabulary,
                          noise_seed: int, sigma: float = 2.0,
                          score_threshold: float = 0.5) -> list[Detection]:
    """Run the mock detector over a snapshot list; ids stay untracked."""
    out: list[Detection] = []
    for snap in snapshots:
        out.extend(mock_detect(snap, vocab, noise_seed, sigma=sigma,
                               score_threshold=score_threshold))
    return out
