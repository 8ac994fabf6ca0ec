import { describe, expect, it } from "vitest";
import { Session } from "../src/session.js";
import { FakeTransport } from "./fake_transport.js";

function makeSession() {
  let clock = 0;
  const transport = new FakeTransport();
  const session = new Session(() => transport, () => clock);
  const tick = (ms: number) => { clock += ms; };
  session.start();
  transport.open();
  return { session, transport, tick };
}

const SNAP = (phase: string, n: number) => JSON.stringify({
  type: "snapshot",
  intent: { phase, queue_fill: n, target: 0, delta_min: 12, tau: 5 },
  telemetry: { t: n / 10, setpoint: 0, omega: 0, u: 0, closure: 0, phase: "idle" },
  detections: [],
  hand: [320, 400, 1200],
});

describe("outbound rate limiting", () => {
  it("coalesces a burst of steering events into one message", () => {
    const { session, transport, tick } = makeSession();
    for (let i = 0; i < 100; i++) session.steer(1, -1, 2);
    tick(50);
    session.flush();
    session.flush();
    expect(transport.sent).toEqual(['{"type":"move_hand","du":100,"dv":-100,"dd":200}']);
  });

  it("never exceeds 20 messages per second of clock time", () => {
    const { session, transport, tick } = makeSession();
    // input events and flush attempts every 5 ms for one second
    for (let i = 0; i < 200; i++) {
      session.steer(1, 0, 0);
      session.flush();
      tick(5);
    }
    expect(transport.sent.length).toBeLessThanOrEqual(20);
    expect(transport.sent.length).toBeGreaterThan(15);
  });

  it("sends nothing when there is nothing pending", () => {
    const { session, transport, tick } = makeSession();
    tick(1000);
    session.flush();
    expect(transport.sent).toEqual([]);
  });

  it("delivers every transcript, one per flush window", () => {
    const { session, transport, tick } = makeSession();
    session.say("release");
    session.say("stop");
    session.steer(5, 0, 0);
    for (let i = 0; i < 3; i++) {
      tick(50);
      session.flush();
    }
    expect(transport.sent).toEqual([
      '{"type":"transcript","text":"release"}',
      '{"type":"transcript","text":"stop"}',
      '{"type":"move_hand","du":5,"dv":0,"dd":0}',
    ]);
  });

  it("reset preempts queued steering", () => {
    const { session, transport, tick } = makeSession();
    session.steer(5, 0, 0);
    session.reset();
    tick(50);
    session.flush();
    expect(transport.sent[0]).toBe('{"type":"reset"}');
  });

  it("drops steering while disconnected instead of replaying it later", () => {
    const { session, transport, tick } = makeSession();
    transport.drop();
    session.steer(40, 0, 0);
    tick(50);
    session.flush();
    transport.open(); // pretend the same transport came back
    tick(50);
    session.flush();
    expect(transport.sent).toEqual([]);
  });
});

describe("inbound snapshots", () => {
  it("keeps only the latest snapshot", () => {
    const { session, transport } = makeSession();
    transport.receive(SNAP("IDLE", 1));
    transport.receive(SNAP("GRASP_TRIGGERED", 5));
    expect(session.snapshotCount).toBe(2);
    expect(session.latest?.intent.phase).toBe("GRASP_TRIGGERED");
  });

  it("stores unparseable lines as a raw fallback and recovers", () => {
    const { session, transport } = makeSession();
    transport.receive('{"type":"snapshot","intent":"garbled"}');
    expect(session.latest).toBeNull();
    expect(session.rawFallback).toContain("garbled");
    transport.receive(SNAP("IDLE", 0));
    expect(session.rawFallback).toBeNull();
    expect(session.latest?.intent.phase).toBe("IDLE");
  });

  it("records server error messages", () => {
    const { session, transport } = makeSession();
    transport.receive('{"type":"error","reason":"bad ui message"}');
    expect(session.lastError).toBe("bad ui message");
    expect(session.latest).toBeNull();
  });
});
