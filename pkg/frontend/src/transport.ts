// Transport abstraction: the session logic only sees lines in and
// lines out, so the same code runs over a browser WebSocket and a raw
// TCP socket in node (see ws.ts / tcp.ts).

export interface Transport {
  send(line: string): void;
  close(): void;
  onLine: ((line: string) => void) | null;
  onOpen: (() => void) | null;
  onClose: (() => void) | null;
}

export type TransportFactory = () => Transport;

export type LinkStatus = "connecting" | "connected" | "disconnected";

const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 5000;

export function backoffDelayMs(attempt: number): number {
  return Math.min(BACKOFF_BASE_MS * 2 ** attempt, BACKOFF_CAP_MS);
}

/**
 * Keeps one transport alive, reconnecting with exponential backoff
 * after drops. Status changes and incoming lines are forwarded to the
 * callbacks; outbound sends while disconnected are dropped silently.
 */
export class ReconnectingLink {
  status: LinkStatus = "disconnected";
  onLine: ((line: string) => void) | null = null;
  onStatus: ((status: LinkStatus) => void) | null = null;

  private transport: Transport | null = null;
  private attempt = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private factory: TransportFactory) {}

  start(): void {
    this.stopped = false;
    this.dial();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.transport?.close();
    this.transport = null;
    this.setStatus("disconnected");
  }

  send(line: string): boolean {
    if (this.status !== "connected" || this.transport === null) return false;
    this.transport.send(line);
    return true;
  }

  private setStatus(status: LinkStatus): void {
    if (status === this.status) return;
    this.status = status;
    this.onStatus?.(status);
  }

  private dial(): void {
    if (this.stopped) return;
    this.setStatus("connecting");
    let transport: Transport;
    try {
      transport = this.factory();
    } catch {
      this.scheduleRedial();
      return;
    }
    this.transport = transport;
    transport.onOpen = () => {
      this.attempt = 0;
      this.setStatus("connected");
    };
    transport.onLine = (line) => this.onLine?.(line);
    transport.onClose = () => {
      this.transport = null;
      this.setStatus("disconnected");
      this.scheduleRedial();
    };
  }

  private scheduleRedial(): void {
    if (this.stopped || this.timer !== null) return;
    const delay = backoffDelayMs(this.attempt);
    this.attempt += 1;
    this.setStatus("disconnected");
    this.timer = setTimeout(() => {
      this.timer = null;
      this.dial();
    }, delay);
  }
}

/** Splits a byte/text stream into newline-terminated lines. */
export class LineSplitter {
  private buf = "";

  constructor(private emit: (line: string) => void) {}

  push(chunk: string): void {
    this.buf += chunk;
    let idx = this.buf.indexOf("\n");
    while (idx >= 0) {
      const line = this.buf.slice(0, idx);
      this.buf = this.buf.slice(idx + 1);
      if (line.length > 0) this.emit(line);
      idx = this.buf.indexOf("\n");
    }
  }
}
