/**
 * Layer store: the latest texture + placement per back-end worker.
 *
 * Updates are whole-layer atomic (header and pixels land together) and
 * stale frames are dropped: an arriving frame older than what the layer
 * already shows never replaces it.
 */

import type { Mat3 } from "./math.js";
import { layerDepth } from "./math.js";
import type { LayerHeader } from "./protocol.js";

export interface Layer {
  header: LayerHeader;
  pixels: Uint8Array;
  /** bumped on every accepted update so renderers know to re-upload */
  version: number;
}

export type LayerListener = (worker: number, layer: Layer) => void;

export class LayerSet {
  private layers = new Map<number, Layer>();
  private listeners: LayerListener[] = [];
  accepted = 0;
  dropped = 0;

  onUpdate(listener: LayerListener): void {
    this.listeners.push(listener);
  }

  /** Returns true when the update was accepted (not stale). */
  install(header: LayerHeader, pixels: Uint8Array): boolean {
    const existing = this.layers.get(header.worker);
    if (existing && header.frame < existing.header.frame) {
      this.dropped += 1;
      return false;
    }
    const layer: Layer = {
      header,
      pixels,
      version: (existing?.version ?? 0) + 1,
    };
    this.layers.set(header.worker, layer);
    this.accepted += 1;
    for (const listener of this.listeners) listener(header.worker, layer);
    return true;
  }

  get(worker: number): Layer | undefined {
    return this.layers.get(worker);
  }

  frames(): Map<number, number> {
    const out = new Map<number, number>();
    for (const [worker, layer] of this.layers) out.set(worker, layer.header.frame);
    return out;
  }

  clear(): void {
    this.layers.clear();
  }

  get size(): number {
    return this.layers.size;
  }

  /** Layers back-to-front for the given orientation. */
  drawOrder(orientation: Mat3): Layer[] {
    return [...this.layers.values()].sort(
      (a, b) => layerDepth(b.header.placement, orientation) - layerDepth(a.header.placement, orientation),
    );
  }
}
