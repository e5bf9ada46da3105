/**
 * Bridge connection: pairs header+binary pushes into layer updates,
 * reconnects with backoff, and rate-limits outbound view messages.
 *
 * Local interactivity never waits on the network: callers re-draw from
 * the LayerSet immediately and `sendView` only schedules the outbound
 * message (at most `maxRate` per second, trailing edge included).
 */

import type { Mat3 } from "./math.js";
import { LayerSet } from "./layers.js";
import { expectedPixelBytes, parseLayerHeader, viewMessage } from "./protocol.js";

/** The slice of the browser WebSocket API the stream needs (injectable). */
export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamOptions {
  socketFactory?: SocketFactory;
  maxRate?: number; // view messages per second
  reconnectBaseMs?: number;
  reconnectCapMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export interface StreamEvents {
  onStatus?: (status: "connecting" | "live" | "stale") => void;
  onLayer?: (worker: number) => void;
}

export class BridgeStream {
  readonly layers = new LayerSet();
  status: "connecting" | "live" | "stale" = "connecting";
  sentViews = 0;
  reconnects = 0;

  private socket: SocketLike | null = null;
  private pendingHeader: ReturnType<typeof parseLayerHeader> | null = null;
  private closed = false;
  private backoffMs: number;

  private lastSendMs = -Infinity;
  private pendingView: Mat3 | null = null;
  private viewTimer: unknown = null;

  private readonly factory: SocketFactory;
  private readonly maxRate: number;
  private readonly reconnectBaseMs: number;
  private readonly reconnectCapMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;

  constructor(
    private url: string,
    private events: StreamEvents = {},
    options: StreamOptions = {},
  ) {
    this.factory = options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.maxRate = options.maxRate ?? 30;
    this.reconnectBaseMs = options.reconnectBaseMs ?? 500;
    this.reconnectCapMs = options.reconnectCapMs ?? 5000;
    this.backoffMs = this.reconnectBaseMs;
    this.now = options.now ?? (() => Date.now());
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h as number));
  }

  connect(): void {
    if (this.closed) return;
    this.setStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.backoffMs = this.reconnectBaseMs;
      this.pendingHeader = null;
      this.setStatus("live");
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => socket.close();
    socket.onclose = () => {
      if (this.closed) return;
      // Keep the last layers on screen; flag them as stale and retry.
      this.setStatus("stale");
      this.reconnects += 1;
      this.setTimer(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, this.reconnectCapMs);
    };
  }

  private setStatus(status: "connecting" | "live" | "stale"): void {
    this.status = status;
    this.events.onStatus?.(status);
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      this.pendingHeader = parseLayerHeader(data);
      return;
    }
    const header = this.pendingHeader;
    this.pendingHeader = null;
    if (!header) return; // binary without its header: drop
    const pixels = new Uint8Array(data as ArrayBuffer);
    if (pixels.byteLength !== expectedPixelBytes(header)) return;
    if (this.layers.install(header, pixels)) {
      this.events.onLayer?.(header.worker);
    }
  }

  /**
   * Queue an orientation for upstream delivery.  Sends immediately when
   * under the rate limit, otherwise keeps only the newest orientation
   * and flushes it when the limit window reopens.
   */
  sendView(orientation: Mat3): void {
    this.pendingView = orientation;
    const interval = 1000 / this.maxRate;
    const wait = this.lastSendMs + interval - this.now();
    if (wait <= 0) {
      this.flushView();
    } else if (this.viewTimer === null) {
      this.viewTimer = this.setTimer(() => {
        this.viewTimer = null;
        this.flushView();
      }, wait);
    }
  }

  private flushView(): void {
    if (this.pendingView === null) return;
    if (this.status !== "live" || this.socket === null) return; // redraws stay local
    try {
      this.socket.send(viewMessage(this.pendingView));
    } catch {
      return; // connection raced shut; reconnect logic handles it
    }
    this.pendingView = null;
    this.lastSendMs = this.now();
    this.sentViews += 1;
  }

  close(): void {
    this.closed = true;
    if (this.viewTimer !== null) this.clearTimer(this.viewTimer);
    this.socket?.close();
  }
}
