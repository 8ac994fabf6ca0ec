import { DetectionView, Snapshot } from "./messages.js";

// Minimal slice of CanvasRenderingContext2D the renderer touches;
// tests substitute a recording fake.
export interface Draw2D {
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export const COLORS = {
  background: "#10141a",
  box: "#4aa3ff",
  boxTarget: "#ffd24a",
  node: "#7ee08a",
  edge: "#3a5a40",
  hand: "#ff6a6a",
  label: "#d8e0ea",
};

export function boxCenter(d: DetectionView): [number, number] {
  const [x1, y1, x2, y2] = d.box;
  return [(x1 + x2) / 2, (y1 + y2) / 2];
}

/** Queue meter position in [0, 1]; 0 when the server sent no tau. */
export function queueFraction(snap: Snapshot): number {
  const tau = snap.intent.tau ?? 0;
  if (tau <= 0) return 0;
  return Math.min(snap.intent.queue_fill / tau, 1);
}

export function renderScene(ctx: Draw2D, snap: Snapshot,
                            width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  const centers = snap.detections.map(boxCenter);

  // edges under nodes under boxes, so labels stay readable
  ctx.strokeStyle = COLORS.edge;
  ctx.lineWidth = 1;
  for (let i = 0; i < centers.length; i++) {
    for (let j = i + 1; j < centers.length; j++) {
      const [ax, ay] = centers[i]!;
      const [bx, by] = centers[j]!;
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
    }
  }

  ctx.fillStyle = COLORS.node;
  for (const [cx, cy] of centers) {
    ctx.beginPath();
    ctx.arc(cx, cy, 3, 0, Math.PI * 2);
    ctx.fill();
  }

  ctx.font = "12px sans-serif";
  for (const det of snap.detections) {
    const isTarget = snap.intent.target !== null && det.id === snap.intent.target;
    ctx.strokeStyle = isTarget ? COLORS.boxTarget : COLORS.box;
    ctx.lineWidth = isTarget ? 3 : 1.5;
    const [x1, y1, x2, y2] = det.box;
    ctx.strokeRect(x1, y1, x2 - x1, y2 - y1);
    ctx.fillStyle = COLORS.label;
    ctx.fillText(`${det.label} ${det.score.toFixed(2)}`, x1, y1 - 4);
  }

  drawCrosshair(ctx, snap.hand[0], snap.hand[1]);
}

function drawCrosshair(ctx: Draw2D, u: number, v: number): void {
  ctx.strokeStyle = COLORS.hand;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(u - 12, v);
  ctx.lineTo(u + 12, v);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(u, v - 12);
  ctx.lineTo(u, v + 12);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(u, v, 7, 0, Math.PI * 2);
  ctx.stroke();
}

/** Rolling sparkline of a telemetry channel, newest sample at the right. */
export function renderSparkline(ctx: Draw2D, values: number[],
                                width: number, height: number,
                                vmin = 0, vmax = 1): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);
  if (values.length < 2) return;
  const span = vmax - vmin || 1;
  ctx.strokeStyle = COLORS.node;
  ctx.lineWidth = 1;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * width;
    const y = height - ((v - vmin) / span) * height;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
