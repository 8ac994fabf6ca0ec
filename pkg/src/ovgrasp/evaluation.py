"""Detection and grasp-outcome scoring.

Detection quality uses all-points interpolated average precision at an
IoU threshold, reported per seen/unseen split. Grasp outcomes use the
grasping/maintaining trial rubric: each trial scores 0, 0.5, or 1 on
both axes, and GAS is the mean of the two percentages.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .ovdetect import Detection, Vocabulary

Box = tuple[float, float, float, float]


class EvalError(ValueError):
    pass


class DegenerateBox(EvalError):
    pass


class EmptyGroundTruth(EvalError):
    pass


class EmptyTrials(EvalError):
    pass


class IncompleteTrace(EvalError):
    pass


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes."""
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    if ax2 <= ax1 or ay2 <= ay1:
        raise DegenerateBox(f"{a}")
    if bx2 <= bx1 or by2 <= by1:
        raise DegenerateBox(f"{b}")
    ix1, iy1 = max(ax1, bx1), max(ay1, by1)
    ix2, iy2 = min(ax2, bx2), min(ay2, by2)
    iw, ih = max(ix2 - ix1, 0.0), max(iy2 - iy1, 0.0)
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


@dataclass(frozen=True)
class GroundTruth:
    frame_id: int
    label: str
    box: Box
    split: str


def load_ground_truth(path) -> list[GroundTruth]:
    """Read the ground-truth JSON: {"frames": [{"frame", "objects": [...]}]}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    out: list[GroundTruth] = []
    try:
        for fr in raw["frames"]:
            fid = int(fr["frame"])
            for obj in fr["objects"]:
                out.append(GroundTruth(frame_id=fid, label=obj["label"],
                                       box=tuple(float(c) for c in obj["box"]),
                                       split=obj["split"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise EvalError(f"malformed ground truth {path}: {exc}") from exc
    return out


def save_ground_truth(gts: list[GroundTruth], path) -> None:
    frames: dict[int, list[dict]] = {}
    for gt in gts:
        frames.setdefault(gt.frame_id, []).append(
            {"label": gt.label, "box": [round(c, 3) for c in gt.box], "split": gt.split})
    doc = {"frames": [{"frame": fid, "objects": objs}
                      for fid, objs in sorted(frames.items())]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _match_ranked(dets: list[Detection], gts: list[GroundTruth],
                  iou_thresh: float, same_label: bool) -> tuple[list[bool], int]:
    """Greedy score-ranked matching. Returns per-detection TP flags.

    Detections are visited by descending score (input order breaks
    ties); each claims the highest-IoU unmatched ground truth in its
    frame at or above the threshold.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    matched = [False] * len(gts)
    tp = [False] * len(dets)
    for i in order:
        det = dets[i]
        best_j, best_iou = -1, iou_thresh
        for j, gt in enumerate(gts):
            if matched[j] or gt.frame_id != det.frame_id:
                continue
            if same_label and gt.label != det.label:
                continue
            v = iou(det.box, gt.box)
            if v > best_iou or (v == best_iou and v >= iou_thresh and best_j == -1):
                best_j, best_iou = j, v
        if best_j >= 0:
            matched[best_j] = True
            tp[i] = True
    ordered_tp = [tp[i] for i in order]
    return ordered_tp, len(gts)


def _ap_from_flags(tp_ranked: list[bool], n_gt: int) -> float:
    """All-points interpolated AP from ranked TP flags."""
    recalls, precisions = [], []
    tp_cum = 0
    for k, flag in enumerate(tp_ranked, start=1):
        tp_cum += int(flag)
        recalls.append(tp_cum / n_gt)
        precisions.append(tp_cum / k)
    mrec = [0.0] + recalls + [1.0]
    mpre = [0.0] + precisions + [0.0]
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    ap = 0.0
    for i in range(len(mrec) - 1):
        if mrec[i + 1] != mrec[i]:
            ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1]
    return ap


def average_precision(dets: list[Detection], gts: list[GroundTruth],
                      iou_thresh: float = 0.5) -> float:
    """All-points interpolated AP for one category.

    Callers pass detections and ground truths already filtered to one
    label; matching here is label-blind.
    """
    if not gts:
        raise EmptyGroundTruth("AP is undefined without ground truth")
    tp_ranked, n_gt = _match_ranked(dets, gts, iou_thresh, same_label=False)
    return _ap_from_flags(tp_ranked, n_gt)


@dataclass(frozen=True)
class ApReport:
    ap_seen: float | None
    ap_unseen: float | None
    ap_all: float
    map: float
    per_category: dict[str, float]

    def to_json(self) -> dict:
        rounded = {k: round(v, 6) for k, v in sorted(self.per_category.items())}
        return {"ap_seen": None if self.ap_seen is None else round(self.ap_seen, 6),
                "ap_unseen": None if self.ap_unseen is None else round(self.ap_unseen, 6),
                "ap_all": round(self.ap_all, 6),
                "map": round(self.map, 6),
                "per_category": rounded}


def evaluate_splits(dets: list[Detection], gts: list[GroundTruth],
                    vocab: Vocabulary | None = None,
                    iou_thresh: float = 0.5) -> ApReport:
    """AP per category, averaged by split.

    Categories are the labels with at least one ground-truth instance.
    A category's split comes from the vocabulary when it has a prompt
    there, else from the ground-truth annotation, so a closed-vocabulary
    detector is still scored on the full category set. ap_seen, ap_unseen
    and map are macro averages over categories; ap_all ranks every
    detection in one pooled list with label-aware matching.
    """
    if not gts:
        raise EmptyGroundTruth("no ground-truth objects")
    categories = sorted({gt.label for gt in gts})

    split_of: dict[str, str] = {}
    for cat in categories:
        gt_splits = {gt.split for gt in gts if gt.label == cat}
        if len(gt_splits) != 1:
            raise EvalError(f"category {cat!r} has conflicting split tags")
        if vocab is not None and cat in vocab:
            split_of[cat] = vocab.split_of(cat)
        else:
            split_of[cat] = gt_splits.pop()

    per_category: dict[str, float] = {}
    for cat in categories:
        cat_dets = [d for d in dets if d.label == cat]
        cat_gts = [g for g in gts if g.label == cat]
        per_category[cat] = average_precision(cat_dets, cat_gts, iou_thresh)

    seen = [per_category[c] for c in categories if split_of[c] == "seen"]
    unseen = [per_category[c] for c in categories if split_of[c] == "unseen"]
    ap_seen = sum(seen) / len(seen) if seen else None
    ap_unseen = sum(unseen) / len(unseen) if unseen else None
    map_value = sum(per_category.values()) / len(per_category)

    tp_ranked, n_gt = _match_ranked(dets, gts, iou_thresh, same_label=True)
    ap_all = _ap_from_flags(tp_ranked, n_gt)
    return ApReport(ap_seen=ap_seen, ap_unseen=ap_unseen, ap_all=ap_all,
                    map=map_value, per_category=per_category)


def format_ap_table(report: ApReport) -> str:
    def cell(v: float | None) -> str:
        return "   -" if v is None else f"{v:.4f}"

    lines = ["  AP_seen  AP_unseen  AP_all     mAP",
             f"  {cell(report.ap_seen):>7}  {cell(report.ap_unseen):>9}  "
             f"{cell(report.ap_all):>6}  {cell(report.map):>6}"]
    return "\n".join(lines)


# --- grasp trials -----------------------------------------------------------

TRIAL_SCORES = (0.0, 0.5, 1.0)
GRASP_TYPES = ("pinch", "spherical", "cylindrical")


@dataclass(frozen=True)
class TrialRow:
    object_label: str
    grasp_type: str
    grasping: float
    maintaining: float


def read_trials_csv(path) -> list[TrialRow]:
    """Read grasp trials: columns object, grasp_type, grasping, maintaining.

    Scores must be 0, 0.5, or 1. Errors name the offending row.
    """
    rows: list[TrialRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"object", "grasp_type", "grasping", "maintaining"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise EvalError(f"{path}: header must contain {sorted(required)}")
        for rownum, rec in enumerate(reader, start=2):
            try:
                g = float(rec["grasping"])
                m = float(rec["maintaining"])
                gtype = rec["grasp_type"]
            except (TypeError, ValueError) as exc:
                raise EvalError(f"{path}: row {rownum}: {exc}") from exc
            if g not in TRIAL_SCORES or m not in TRIAL_SCORES:
                raise EvalError(f"{path}: row {rownum}: scores must be 0, 0.5, or 1")
            if gtype not in GRASP_TYPES:
                raise EvalError(f"{path}: row {rownum}: unknown grasp type {gtype!r}")
            rows.append(TrialRow(rec["object"], gtype, g, m))
    return rows


@dataclass(frozen=True)
class TypeScore:
    grasping_pct: float
    maintaining_pct: float
    gas: float
    trials: int


@dataclass(frozen=True)
class GasReport:
    per_type: dict[str, TypeScore]
    overall: float

    def to_json(self) -> dict:
        return {"per_type": {t: {"grasping": round(s.grasping_pct, 4),
                                 "maintaining": round(s.maintaining_pct, 4),
                                 "gas": round(s.gas, 4),
                                 "trials": s.trials}
                             for t, s in self.per_type.items()},
                "overall": round(self.overall, 4)}


def gas_report(rows: list[TrialRow]) -> GasReport:
    """Score trials per grasp type; overall is the mean of per-type GAS."""
    if not rows:
        raise EmptyTrials("no trial rows")
    per_type: dict[str, TypeScore] = {}
    for gtype in GRASP_TYPES:
        sub = [r for r in rows if r.grasp_type == gtype]
        if not sub:
            continue
        g = 100.0 * sum(r.grasping for r in sub) / len(sub)
        m = 100.0 * sum(r.maintaining for r in sub) / len(sub)
        per_type[gtype] = TypeScore(grasping_pct=g, maintaining_pct=m,
                                    gas=(g + m) / 2.0, trials=len(sub))
    overall = sum(s.gas for s in per_type.values()) / len(per_type)
    return GasReport(per_type=per_type, overall=overall)


def format_gas_table(report: GasReport) -> str:
    lines = [f"  {'grasp type':<12} {'trials':>6} {'grasping':>9} {'maintaining':>12} {'GAS':>7}"]
    for gtype, s in report.per_type.items():
        lines.append(f"  {gtype:<12} {s.trials:>6} {s.grasping_pct:>9.2f} "
                     f"{s.maintaining_pct:>12.2f} {s.gas:>7.2f}")
    lines.append(f"  {'overall':<12} {'':>6} {'':>9} {'':>12} {report.overall:>7.2f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class PublishedGas:
    method: str
    grasp_type: str
    grasping_pct: float
    maintaining_pct: float
    gas: float


def load_published_gas(path) -> list[PublishedGas]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return [PublishedGas(method=r["method"], grasp_type=r["grasp_type"],
                             grasping_pct=float(r["grasping"]),
                             maintaining_pct=float(r["maintaining"]),
                             gas=float(r["gas"]))
                for r in raw["rows"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise EvalError(f"malformed published scores {path}: {exc}") from exc


def verify_published_gas(rows: list[PublishedGas], tol: float = 0.02) -> list[dict]:
    """Check each published row's GAS against (grasping + maintaining) / 2.

    Published tables sometimes carry transcription slips; this makes
    them visible instead of silently averaging them away.
    """
    out = []
    for r in rows:
        computed = (r.grasping_pct + r.maintaining_pct) / 2.0
        out.append({"method": r.method, "grasp_type": r.grasp_type,
                    "published_gas": r.gas, "computed_gas": round(computed, 4),
                    "consistent": abs(computed - r.gas) <= tol})
    return out


def format_consistency_table(checks: list[dict]) -> str:
    lines = [f"  {'method':<16} {'grasp type':<12} {'published':>9} {'computed':>9}  flag"]
    for c in checks:
        flag = "ok" if c["consistent"] else "INCONSISTENT"
        lines.append(f"  {c['method']:<16} {c['grasp_type']:<12} "
                     f"{c['published_gas']:>9.2f} {c['computed_gas']:>9.2f}  {flag}")
    return "\n".join(lines)


# --- scenario traces --------------------------------------------------------

def scenario_metrics(trace) -> dict:
    """Summarize a scenario trace.

    frames_to_grip counts perception frames from the first frame whose
    ground-truth nearest object lies within the activation radius up to
    and including the frame that emitted G. release_latency_s measures
    from the frame consuming a release transcript to the first telemetry
    sample at or below the open threshold.
    """
    frames = trace.frames
    if not frames or trace.outcome is None:
        raise IncompleteTrace("trace has no frames or no outcome")

    radius = trace.activation_radius
    first_in_radius = None
    grip_frame = None
    grip_count = 0
    wrong_target = 0
    release_frame_t = None
    commands: dict[str, int] = {"G": 0, "R": 0, "S": 0}
    for fr in frames:
        if first_in_radius is None and fr.gt_delta is not None and fr.gt_delta <= radius:
            first_in_radius = fr.index
        if fr.command is not None:
            commands[fr.command] += 1
            if fr.command == "G":
                grip_count += 1
                if grip_frame is None:
                    grip_frame = fr.index
                if fr.target_label != fr.gt_nearest_label:
                    wrong_target += 1
            if fr.command == "R" and release_frame_t is None:
                release_frame_t = fr.t

    frames_to_grip = None
    if grip_frame is not None and first_in_radius is not None:
        frames_to_grip = grip_frame - first_in_radius + 1

    release_latency = None
    if release_frame_t is not None:
        for sample in trace.telemetry:
            if sample.t >= release_frame_t and sample.closure <= trace.open_threshold:
                release_latency = round(sample.t - release_frame_t, 6)
                break

    return {"frames_to_grip": frames_to_grip,
            "grip_count": grip_count,
            "wrong_target_grips": wrong_target,
            "release_latency_s": release_latency,
            "commands": commands}
