import { describe, expect, it } from "vitest";

import { LayerSet } from "../src/layers.js";
import { baseOrientationX, rotateModel } from "../src/math.js";
import type { LayerHeader } from "../src/protocol.js";

function header(worker: number, frame: number, x = 0): LayerHeader {
  return {
    frame,
    worker,
    width: 2,
    height: 2,
    axis: "X",
    placement: [x, -1, -1, x, 1, -1, x, 1, 1, x, -1, 1],
  };
}

const pixels = () => new Uint8Array(2 * 2 * 4);

describe("LayerSet", () => {
  it("tracks independent per-worker frames", () => {
    const set = new LayerSet();
    set.install(header(0, 5), pixels());
    set.install(header(1, 2), pixels());
    expect(set.frames().get(0)).toBe(5);
    expect(set.frames().get(1)).toBe(2);
    expect(set.size).toBe(2);
  });

  it("drops stale frames without touching the layer", () => {
    const set = new LayerSet();
    const fresh = pixels();
    fresh[0] = 200;
    expect(set.install(header(0, 7), fresh)).toBe(true);
    expect(set.install(header(0, 3), pixels())).toBe(false);
    expect(set.get(0)!.header.frame).toBe(7);
    expect(set.get(0)!.pixels[0]).toBe(200);
    expect(set.dropped).toBe(1);
  });

  it("update is whole-layer atomic: header and pixels land together", () => {
    const set = new LayerSet();
    const seen: Array<{ frame: number; mark: number }> = [];
    set.onUpdate((_worker, layer) => seen.push({ frame: layer.header.frame, mark: layer.pixels[0] }));
    const a = pixels();
    a[0] = 1;
    const b = pixels();
    b[0] = 2;
    set.install(header(0, 1), a);
    set.install(header(0, 2), b);
    expect(seen).toEqual([
      { frame: 1, mark: 1 },
      { frame: 2, mark: 2 },
    ]);
  });

  it("equal frame numbers refresh the layer (same-frame retransmit)", () => {
    const set = new LayerSet();
    set.install(header(0, 4), pixels());
    const again = pixels();
    again[0] = 9;
    expect(set.install(header(0, 4), again)).toBe(true);
    expect(set.get(0)!.pixels[0]).toBe(9);
    expect(set.get(0)!.version).toBe(2);
  });

  it("orders draw back-to-front by quad depth along the gaze", () => {
    const set = new LayerSet();
    set.install(header(0, 0, -4), pixels());
    set.install(header(1, 0, +4), pixels());
    const base = baseOrientationX();
    expect(set.drawOrder(base).map((l) => l.header.worker)).toEqual([1, 0]);
    const flipped = rotateModel(base, [0, 0, 1], Math.PI);
    expect(set.drawOrder(flipped).map((l) => l.header.worker)).toEqual([0, 1]);
  });
});
