import { describe, expect, it } from "vitest";
import { Snapshot } from "../src/messages.js";
import {
  COLORS, Draw2D, boxCenter, queueFraction, renderScene, renderSparkline,
} from "../src/render.js";

type Op = { op: string; args: unknown[]; stroke: string; fill: string };

/** Records every draw call with the style active at the time. */
class FakeCtx implements Draw2D {
  strokeStyle = "";
  fillStyle = "";
  lineWidth = 0;
  font = "";
  ops: Op[] = [];

  private log(op: string, ...args: unknown[]): void {
    this.ops.push({ op, args, stroke: this.strokeStyle, fill: this.fillStyle });
  }

  clearRect(...a: number[]) { this.log("clearRect", ...a); }
  fillRect(...a: number[]) { this.log("fillRect", ...a); }
  strokeRect(...a: number[]) { this.log("strokeRect", ...a); }
  beginPath() { this.log("beginPath"); }
  moveTo(...a: number[]) { this.log("moveTo", ...a); }
  lineTo(...a: number[]) { this.log("lineTo", ...a); }
  arc(...a: number[]) { this.log("arc", ...a); }
  stroke() { this.log("stroke"); }
  fill() { this.log("fill"); }
  fillText(text: string, x: number, y: number) { this.log("fillText", text, x, y); }

  count(op: string, style?: string): number {
    return this.ops.filter((o) => o.op === op &&
      (style === undefined || o.stroke === style || o.fill === style)).length;
  }
}

function snap(partial: Partial<Snapshot["intent"]> = {},
              detections: Snapshot["detections"] = []): Snapshot {
  return {
    type: "snapshot",
    intent: { phase: "IDLE", queue_fill: 0, target: null, delta_min: null, ...partial },
    telemetry: { t: 0.1, setpoint: 0, omega: 0, u: 0, closure: 0, phase: "idle" },
    detections,
    hand: [320, 400, 1200],
  };
}

const THREE = [
  { frame: 1, label: "cup", score: 0.7, box: [100, 100, 160, 180] as [number, number, number, number], id: 0 },
  { frame: 1, label: "orange", score: 0.7, box: [300, 120, 360, 180] as [number, number, number, number], id: 1 },
  { frame: 1, label: "banana", score: 0.7, box: [420, 200, 560, 240] as [number, number, number, number], id: 2 },
];

describe("renderScene", () => {
  it("draws one box and one label per detection", () => {
    const ctx = new FakeCtx();
    renderScene(ctx, snap({}, THREE), 640, 480);
    expect(ctx.count("strokeRect")).toBe(3);
    const labels = ctx.ops.filter((o) => o.op === "fillText").map((o) => o.args[0]);
    expect(labels).toEqual(["cup 0.70", "orange 0.70", "banana 0.70"]);
  });

  it("highlights exactly the targeted box", () => {
    const ctx = new FakeCtx();
    renderScene(ctx, snap({ target: 1 }, THREE), 640, 480);
    expect(ctx.count("strokeRect", COLORS.boxTarget)).toBe(1);
    expect(ctx.count("strokeRect", COLORS.box)).toBe(2);
    const highlighted = ctx.ops.find(
      (o) => o.op === "strokeRect" && o.stroke === COLORS.boxTarget);
    expect(highlighted?.args).toEqual([300, 120, 60, 60]);
  });

  it("derives one node per detection and edges between all pairs", () => {
    const ctx = new FakeCtx();
    renderScene(ctx, snap({}, THREE), 640, 480);
    expect(ctx.count("arc", COLORS.node)).toBe(3);
    expect(ctx.count("lineTo", COLORS.edge)).toBe(3); // C(3,2)
  });

  it("shows only the crosshair when nothing is detected", () => {
    const ctx = new FakeCtx();
    renderScene(ctx, snap({}, []), 640, 480);
    expect(ctx.count("strokeRect")).toBe(0);
    expect(ctx.count("fillText")).toBe(0);
    // crosshair: two strokes for the bars plus the ring
    expect(ctx.count("stroke", COLORS.hand)).toBe(3);
    const ring = ctx.ops.find((o) => o.op === "arc" && o.stroke === COLORS.hand);
    expect(ring?.args.slice(0, 2)).toEqual([320, 400]);
  });
});

describe("panel helpers", () => {
  it("boxCenter is the box midpoint", () => {
    expect(boxCenter(THREE[0]!)).toEqual([130, 140]);
  });

  it("queueFraction is fill over tau", () => {
    expect(queueFraction(snap({ queue_fill: 4, tau: 5 }))).toBeCloseTo(0.8);
    expect(queueFraction(snap({ queue_fill: 5, tau: 5 }))).toBe(1);
    expect(queueFraction(snap({ queue_fill: 2 }))).toBe(0); // no tau sent
  });
});

describe("renderSparkline", () => {
  it("draws a polyline spanning the values", () => {
    const ctx = new FakeCtx();
    renderSparkline(ctx, [0, 0.5, 1], 300, 60);
    expect(ctx.count("moveTo", COLORS.node)).toBe(1);
    expect(ctx.count("lineTo", COLORS.node)).toBe(2);
    const last = ctx.ops.filter((o) => o.op === "lineTo").pop();
    expect(last?.args).toEqual([300, 0]); // max value at the top right
  });

  it("stays blank below two samples", () => {
    const ctx = new FakeCtx();
    renderSparkline(ctx, [0.7], 300, 60);
    expect(ctx.count("stroke")).toBe(0);
  });
});
