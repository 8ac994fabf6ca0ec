import { Snapshot } from "./messages.js";
import { Session } from "./session.js";
import { tcpTransport } from "./tcp.js";
import { boxCenter } from "./render.js";

export interface ScriptedOutcome {
  phases: string[];
  snapshots: number;
  elapsedMs: number;
  released: boolean;
}

const UV_STEP = 25;
const DEPTH_STEP = 80;
const ALIGNED_PX = 4;

/**
 * Headless client that plays one grasp-and-release round: steer the
 * hand at the server's current target until the stability window fills
 * and the grip fires, wait for the hold, then speak "release" and
 * confirm the glove reopens.
 *
 * Steering uses only what the snapshots carry: pixel deltas come from
 * the target detection's box center, and depth is probed toward the
 * scene (hands spawn behind the tabletop) with a sign flip if the
 * distance readout grows while the crosshair is already aligned.
 */
export function scriptedSession(host: string, port: number,
                                timeoutMs = 25_000): Promise<ScriptedOutcome> {
  return new Promise((resolve, reject) => {
    const session = new Session(() => tcpTransport(host, port));
    const started = Date.now();
    const phases: string[] = [];
    let released = false;
    let depthSign = -1;
    let prevDelta: number | null = null;
    let done = false;

    const finish = (err?: Error) => {
      if (done) return;
      done = true;
      clearInterval(pump);
      clearTimeout(guard);
      session.stop();
      if (err) reject(err);
      else resolve({
        phases,
        snapshots: session.snapshotCount,
        elapsedMs: Date.now() - started,
        released,
      });
    };

    const guard = setTimeout(
      () => finish(new Error(`timed out; phases seen: ${phases.join(" -> ")}`)),
      timeoutMs);
    const pump = setInterval(() => session.flush(), 20);

    session.onSnapshot = (snap: Snapshot) => {
      const phase = snap.intent.phase;
      if (phases[phases.length - 1] !== phase) phases.push(phase);

      if (phase === "IDLE" && !released) {
        steerStep(session, snap);
      } else if (phase === "HOLDING" && !released) {
        // the release keyword only lands once the glove reports closed;
        // speaking during GRASP_TRIGGERED would be ignored, so wait for
        // the hold and repeat until the phase actually moves
        session.say("release");
      } else if (phase === "RELEASING") {
        released = true;
      } else if (released && phase === "IDLE") {
        finish();
      }
    };

    function steerStep(session: Session, snap: Snapshot): void {
      const target = snap.detections.find((d) => d.id === snap.intent.target)
        ?? snap.detections[0];
      if (target === undefined) return;
      const [cu, cv] = boxCenter(target);
      const du = clamp(cu - snap.hand[0], UV_STEP);
      const dv = clamp(cv - snap.hand[1], UV_STEP);
      const aligned = Math.abs(du) < ALIGNED_PX && Math.abs(dv) < ALIGNED_PX;
      const delta = snap.intent.delta_min;

      let dd = 0;
      if (aligned && delta !== null) {
        if (delta > 60) {
          if (prevDelta !== null && delta > prevDelta + 1) depthSign = -depthSign;
          dd = depthSign * DEPTH_STEP;
        }
        prevDelta = delta;
      }
      if (du !== 0 || dv !== 0 || dd !== 0) session.steer(du, dv, dd);
    }

    session.start();
  });
}

function clamp(v: number, limit: number): number {
  return Math.max(Math.min(v, limit), -limit);
}

// Usage: node dist/scripted.js [host] [port]
if (process.argv[1]?.endsWith("scripted.js")) {
  const host = process.argv[2] ?? "127.0.0.1";
  const port = Number(process.argv[3] ?? 8765);
  scriptedSession(host, port)
    .then((out) => {
      console.log(`phases: ${out.phases.join(" -> ")}`);
      console.log(`snapshots: ${out.snapshots}, elapsed: ${out.elapsedMs} ms`);
      process.exit(out.released ? 0 : 1);
    })
    .catch((err) => {
      console.error(String(err));
      process.exit(1);
    });
}
