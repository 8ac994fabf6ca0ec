import { parseServerMessage, encodeMoveHand, encodeTranscript, encodeReset, Snapshot } from "./messages.js";
import { LinkStatus, ReconnectingLink, TransportFactory } from "./transport.js";

export const MIN_SEND_INTERVAL_MS = 50; // hard cap: 20 outbound msg/s

/**
 * One live session against the simulation server.
 *
 * Rendering is decoupled from receiving: incoming snapshots overwrite
 * `latest` and the render loop reads it at its own pace. Outbound
 * traffic goes through a single flush gate that sends at most one
 * message per 50 ms regardless of input event rate; steering deltas
 * accumulate between flushes, transcripts queue so none are lost.
 */
export class Session {
  latest: Snapshot | null = null;
  rawFallback: string | null = null;
  lastError: string | null = null;
  snapshotCount = 0;

  onSnapshot: ((snap: Snapshot) => void) | null = null;
  onStatus: ((status: LinkStatus) => void) | null = null;

  private link: ReconnectingLink;
  private du = 0;
  private dv = 0;
  private dd = 0;
  private transcripts: string[] = [];
  private resetQueued = false;
  private lastSendAt = -Infinity;

  constructor(factory: TransportFactory,
              private now: () => number = () => Date.now()) {
    this.link = new ReconnectingLink(factory);
    this.link.onLine = (line) => this.handleLine(line);
    this.link.onStatus = (status) => this.onStatus?.(status);
  }

  get status(): LinkStatus {
    return this.link.status;
  }

  start(): void {
    this.link.start();
  }

  stop(): void {
    this.link.stop();
  }

  /** Accumulate a steering delta; sent on the next flush. */
  steer(du: number, dv: number, dd: number): void {
    this.du += du;
    this.dv += dv;
    this.dd += dd;
  }

  say(text: string): void {
    this.transcripts.push(text);
  }

  reset(): void {
    this.resetQueued = true;
  }

  /**
   * Send at most one pending message. Call on a timer (the app uses
   * 50 ms); extra calls inside the rate window do nothing, so callers
   * cannot exceed 20 msg/s no matter how often input events fire.
   */
  flush(): void {
    if (this.now() - this.lastSendAt < MIN_SEND_INTERVAL_MS) return;
    if (this.link.status !== "connected") {
      // steering while disconnected is dropped, not queued: stale
      // deltas replayed after a reconnect would jerk the hand
      this.du = this.dv = this.dd = 0;
      return;
    }
    let line: string | null = null;
    if (this.resetQueued) {
      this.resetQueued = false;
      line = encodeReset();
    } else if (this.transcripts.length > 0) {
      line = encodeTranscript(this.transcripts.shift()!);
    } else if (this.du !== 0 || this.dv !== 0 || this.dd !== 0) {
      line = encodeMoveHand(this.du, this.dv, this.dd);
      this.du = this.dv = this.dd = 0;
    }
    if (line !== null && this.link.send(line)) {
      this.lastSendAt = this.now();
    }
  }

  private handleLine(line: string): void {
    const msg = parseServerMessage(line);
    if (msg === null) {
      this.rawFallback = line;
      return;
    }
    this.rawFallback = null;
    if (msg.type === "error") {
      this.lastError = msg.reason;
      return;
    }
    this.latest = msg;
    this.snapshotCount += 1;
    this.onSnapshot?.(msg);
  }
}
