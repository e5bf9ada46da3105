import { describe, expect, it, vi } from "vitest";

import { BridgeStream, type SocketLike } from "../src/stream.js";
import { baseOrientationX } from "../src/math.js";

class FakeSocket implements SocketLike {
  binaryType = "";
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  pushText(text: string): void {
    this.onmessage?.({ data: text });
  }

  pushBinary(bytes: Uint8Array): void {
    this.onmessage?.({ data: bytes.buffer });
  }
}

function headerText(worker: number, frame: number, wh = 2): string {
  return JSON.stringify({
    frame,
    worker,
    width: wh,
    height: wh,
    axis: "X",
    placement: [0, -1, -1, 0, 1, -1, 0, 1, 1, 0, -1, 1],
  });
}

function makeStream(options: Partial<ConstructorParameters<typeof BridgeStream>[2]> = {}) {
  const sockets: FakeSocket[] = [];
  const timers: Array<{ fn: () => void; ms: number }> = [];
  let nowMs = 0;
  const stream = new BridgeStream(
    "ws://test/ws",
    {},
    {
      socketFactory: () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
      now: () => nowMs,
      setTimer: (fn, ms) => {
        const handle = { fn, ms };
        timers.push(handle);
        return handle;
      },
      clearTimer: (handle) => {
        const index = timers.indexOf(handle as never);
        if (index >= 0) timers.splice(index, 1);
      },
      ...options,
    },
  );
  return {
    stream,
    sockets,
    timers,
    advance(ms: number) {
      nowMs += ms;
    },
    fireTimers() {
      const due = timers.splice(0, timers.length);
      for (const timer of due) timer.fn();
    },
  };
}

describe("BridgeStream", () => {
  it("pairs each header with the following binary into one layer update", () => {
    const { stream, sockets } = makeStream();
    stream.connect();
    const socket = sockets[0];
    socket.open();
    socket.pushText(headerText(0, 3));
    socket.pushBinary(new Uint8Array(16));
    expect(stream.layers.get(0)!.header.frame).toBe(3);
    expect(stream.layers.accepted).toBe(1);
  });

  it("ignores binary data without a preceding header", () => {
    const { stream, sockets } = makeStream();
    stream.connect();
    sockets[0].open();
    sockets[0].pushBinary(new Uint8Array(16));
    expect(stream.layers.size).toBe(0);
  });

  it("rejects pixel payloads that disagree with the header", () => {
    const { stream, sockets } = makeStream();
    stream.connect();
    sockets[0].open();
    sockets[0].pushText(headerText(0, 1));
    sockets[0].pushBinary(new Uint8Array(5));
    expect(stream.layers.size).toBe(0);
  });

  it("drops out-of-order frames, layer unchanged", () => {
    const { stream, sockets } = makeStream();
    stream.connect();
    sockets[0].open();
    sockets[0].pushText(headerText(0, 5));
    sockets[0].pushBinary(new Uint8Array(16));
    sockets[0].pushText(headerText(0, 4));
    sockets[0].pushBinary(new Uint8Array(16));
    expect(stream.layers.get(0)!.header.frame).toBe(5);
    expect(stream.layers.dropped).toBe(1);
  });

  it("reconnects with backoff and flags stale state", () => {
    const { stream, sockets, timers, fireTimers } = makeStream();
    stream.connect();
    sockets[0].open();
    sockets[0].pushText(headerText(0, 1));
    sockets[0].pushBinary(new Uint8Array(16));
    sockets[0].close();
    expect(stream.status).toBe("stale");
    expect(stream.layers.size).toBe(1); // last layers survive for local redraw
    expect(timers.length).toBe(1);
    expect(timers[0].ms).toBe(500);
    fireTimers();
    expect(sockets.length).toBe(2);
    sockets[1].close();
    expect(stream.reconnects).toBe(2);
  });

  it("rate-limits view messages to maxRate with a trailing send", () => {
    const { stream, sockets, advance, fireTimers, timers } = makeStream({ maxRate: 30 });
    stream.connect();
    sockets[0].open();
    const m = baseOrientationX();
    for (let i = 0; i < 100; i++) {
      stream.sendView(m);
      advance(1); // 1 ms between drag events: 100 calls in 100 ms
    }
    expect(stream.sentViews).toBeLessThanOrEqual(4); // 100 ms at 30/s
    expect(timers.length).toBe(1); // trailing send scheduled
    advance(40);
    fireTimers();
    expect(stream.sentViews).toBeLessThanOrEqual(5);
    expect(sockets[0].sent.length).toBe(stream.sentViews);
    const last = JSON.parse(sockets[0].sent.at(-1)!);
    expect(last.type).toBe("view");
    expect(last.m).toHaveLength(9);
  });

  it("keeps only the newest pending orientation while throttled", () => {
    const { stream, sockets, advance, fireTimers } = makeStream({ maxRate: 10 });
    stream.connect();
    sockets[0].open();
    const first = baseOrientationX();
    stream.sendView(first); // goes out immediately
    const second = baseOrientationX();
    second[0] = 0.5; // distinguishable payload (not orthonormal; fine for transport)
    const third = baseOrientationX();
    third[0] = -0.25;
    stream.sendView(second);
    stream.sendView(third);
    advance(200);
    fireTimers();
    expect(sockets[0].sent).toHaveLength(2);
    expect(JSON.parse(sockets[0].sent[1]).m[0]).toBe(-0.25);
  });

  it("drops view sends while disconnected instead of blocking", () => {
    const { stream } = makeStream();
    // never connected: redraws stay local, nothing throws
    stream.sendView(baseOrientationX());
    expect(stream.sentViews).toBe(0);
  });
});
