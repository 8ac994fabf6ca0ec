// Wire schema for the simulation server's NDJSON/WebSocket channel.
// One JSON object per line in both directions; the server broadcasts
// snapshots at 10 Hz and replies to malformed input with an error
// message before dropping the connection.

export interface IntentView {
  phase: string;
  queue_fill: number;
  target: number | null;
  delta_min: number | null;
  tau?: number;
}

export interface TelemetryView {
  t: number;
  setpoint: number;
  omega: number;
  u: number;
  closure: number;
  phase: string;
}

export interface DetectionView {
  frame: number;
  label: string;
  score: number;
  box: [number, number, number, number];
  id: number;
}

export interface Snapshot {
  type: "snapshot";
  intent: IntentView;
  telemetry: TelemetryView;
  detections: DetectionView[];
  hand: [number, number, number];
}

export interface ServerError {
  type: "error";
  reason: string;
}

export type ServerMessage = Snapshot | ServerError;

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isTriple(v: unknown): v is [number, number, number] {
  return Array.isArray(v) && v.length === 3 && v.every(isNum);
}

function isBox(v: unknown): v is [number, number, number, number] {
  return Array.isArray(v) && v.length === 4 && v.every(isNum);
}

function isDetection(v: unknown): v is DetectionView {
  if (typeof v !== "object" || v === null) return false;
  const d = v as Record<string, unknown>;
  return isNum(d.frame) && typeof d.label === "string" && isNum(d.score) &&
    isBox(d.box) && isNum(d.id);
}

function isIntent(v: unknown): v is IntentView {
  if (typeof v !== "object" || v === null) return false;
  const i = v as Record<string, unknown>;
  return typeof i.phase === "string" && isNum(i.queue_fill) &&
    (i.target === null || isNum(i.target)) &&
    (i.delta_min === null || isNum(i.delta_min)) &&
    (i.tau === undefined || isNum(i.tau));
}

function isTelemetry(v: unknown): v is TelemetryView {
  if (typeof v !== "object" || v === null) return false;
  const t = v as Record<string, unknown>;
  return isNum(t.t) && isNum(t.setpoint) && isNum(t.omega) && isNum(t.u) &&
    isNum(t.closure) && typeof t.phase === "string";
}

/**
 * Parse one server line. Returns null for anything that is not valid
 * JSON or does not match the schema; callers show the raw line as a
 * fallback instead of guessing.
 */
export function parseServerMessage(line: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (msg.type === "error" && typeof msg.reason === "string") {
    return { type: "error", reason: msg.reason };
  }
  if (msg.type === "snapshot" && isIntent(msg.intent) &&
    isTelemetry(msg.telemetry) && Array.isArray(msg.detections) &&
    msg.detections.every(isDetection) && isTriple(msg.hand)) {
    return {
      type: "snapshot",
      intent: msg.intent,
      telemetry: msg.telemetry,
      detections: msg.detections,
      hand: msg.hand,
    };
  }
  return null;
}

export function encodeMoveHand(du: number, dv: number, dd: number): string {
  return JSON.stringify({ type: "move_hand", du, dv, dd });
}

export function encodeTranscript(text: string): string {
  return JSON.stringify({ type: "transcript", text });
}

export function encodeReset(): string {
  return JSON.stringify({ type: "reset" });
}
