import { Session, MIN_SEND_INTERVAL_MS } from "./session.js";
import { Snapshot } from "./messages.js";
import { Draw2D, queueFraction, renderScene, renderSparkline } from "./render.js";
import { webSocketTransport } from "./ws.js";

const PHASES = ["IDLE", "GRASP_TRIGGERED", "HOLDING", "RELEASING", "STOPPED"];
const SPARK_WINDOW = 120; // 12 s of closure history at 10 Hz

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("scene");
  const spark = byId<HTMLCanvasElement>("spark");
  const banner = byId<HTMLDivElement>("banner");
  const phaseRow = byId<HTMLDivElement>("phases");
  const queueBar = byId<HTMLDivElement>("queue-bar");
  const queueText = byId<HTMLSpanElement>("queue-text");
  const closureBar = byId<HTMLDivElement>("closure-bar");
  const closureText = byId<HTMLSpanElement>("closure-text");
  const deltaText = byId<HTMLSpanElement>("delta-text");
  const targetText = byId<HTMLSpanElement>("target-text");
  const rawBox = byId<HTMLPreElement>("raw-fallback");
  const sayForm = byId<HTMLFormElement>("say-form");
  const sayInput = byId<HTMLInputElement>("say-input");
  const resetBtn = byId<HTMLButtonElement>("reset-btn");

  const ctx = canvas.getContext("2d") as Draw2D | null;
  const sparkCtx = spark.getContext("2d") as Draw2D | null;
  if (ctx === null || sparkCtx === null) throw new Error("canvas 2d unavailable");

  phaseRow.innerHTML = PHASES
    .map((p) => `<span class="phase" data-phase="${p}">${p}</span>`)
    .join("");

  const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  const session = new Session(() => webSocketTransport(wsUrl));
  const closureHistory: number[] = [];

  session.onStatus = (status) => {
    banner.textContent = status === "connected" ? ""
      : status === "connecting" ? "connecting..."
      : "disconnected, retrying...";
    banner.className = status === "connected" ? "banner hidden" : "banner";
  };

  session.onSnapshot = (snap: Snapshot) => {
    closureHistory.push(snap.telemetry.closure);
    if (closureHistory.length > SPARK_WINDOW) closureHistory.shift();
  };

  function repaint(): void {
    const snap = session.latest;
    rawBox.textContent = session.rawFallback ?? "";
    rawBox.className = session.rawFallback === null ? "raw hidden" : "raw";
    if (snap !== null) {
      renderScene(ctx!, snap, canvas.width, canvas.height);
      renderSparkline(sparkCtx!, closureHistory, spark.width, spark.height);

      for (const el of phaseRow.querySelectorAll<HTMLSpanElement>(".phase")) {
        el.classList.toggle("active", el.dataset.phase === snap.intent.phase);
      }
      const qf = queueFraction(snap);
      queueBar.style.width = `${(qf * 100).toFixed(0)}%`;
      queueText.textContent = `${snap.intent.queue_fill}/${snap.intent.tau ?? "?"}`;
      closureBar.style.width = `${(snap.telemetry.closure * 100).toFixed(0)}%`;
      closureText.textContent = snap.telemetry.closure.toFixed(2);
      deltaText.textContent = snap.intent.delta_min === null ? "-"
        : snap.intent.delta_min.toFixed(1);
      const target = snap.detections.find((d) => d.id === snap.intent.target);
      targetText.textContent = target?.label ?? "-";
    }
    requestAnimationFrame(repaint);
  }
  requestAnimationFrame(repaint);

  // input: arrows steer in the image plane, wheel moves depth,
  // dragging on the canvas steers too; everything funnels through the
  // session's rate-limited flush
  const KEY_STEP = 8;
  document.addEventListener("keydown", (ev) => {
    if (document.activeElement === sayInput) return;
    switch (ev.key) {
      case "ArrowLeft": session.steer(-KEY_STEP, 0, 0); break;
      case "ArrowRight": session.steer(KEY_STEP, 0, 0); break;
      case "ArrowUp": session.steer(0, -KEY_STEP, 0); break;
      case "ArrowDown": session.steer(0, KEY_STEP, 0); break;
      case "PageUp": session.steer(0, 0, 40); break;
      case "PageDown": session.steer(0, 0, -40); break;
      default: return;
    }
    ev.preventDefault();
  });
  canvas.addEventListener("wheel", (ev) => {
    session.steer(0, 0, ev.deltaY > 0 ? 40 : -40);
    ev.preventDefault();
  });
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    session.steer(ev.offsetX - lastX, ev.offsetY - lastY, 0);
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  });
  canvas.addEventListener("pointerup", () => { dragging = false; });
  canvas.addEventListener("pointerleave", () => { dragging = false; });

  sayForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = sayInput.value.trim();
    if (text.length > 0) session.say(text);
    sayInput.value = "";
  });
  resetBtn.addEventListener("click", () => session.reset());

  setInterval(() => session.flush(), MIN_SEND_INTERVAL_MS);
  session.start();
}

main();
