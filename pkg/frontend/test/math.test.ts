import { describe, expect, it } from "vitest";

import {
  baseOrientationX,
  det,
  dominantAxis,
  gaze,
  isOrthonormal,
  layerDepth,
  mat3,
  orbit,
  renormalize,
  rotateModel,
} from "../src/math.js";

describe("orientation conventions", () => {
  it("base X orientation gazes along +x and is a proper rotation", () => {
    const m = baseOrientationX();
    expect(gaze(m)).toEqual([1, 0, 0]);
    expect(det(m)).toBeCloseTo(1, 12);
    expect(isOrthonormal(m)).toBe(true);
  });

  it("rotating the model 50 degrees about z swings the gaze toward +y", () => {
    // Golden values shared with the viewer core's feedback test.
    const m = rotateModel(baseOrientationX(), [0, 0, 1], (-50 * Math.PI) / 180);
    const g = gaze(m);
    expect(g[0]).toBeCloseTo(Math.cos((50 * Math.PI) / 180), 9);
    expect(g[1]).toBeCloseTo(Math.sin((50 * Math.PI) / 180), 9);
    expect(g[2]).toBeCloseTo(0, 12);
    expect(dominantAxis(g)).toBe("Y");
  });

  it("10 degree rotations stay X dominant", () => {
    const m = rotateModel(baseOrientationX(), [0, 0, 1], (10 * Math.PI) / 180);
    expect(dominantAxis(gaze(m))).toBe("X");
  });

  it("dominant axis ties break X before Y before Z", () => {
    expect(dominantAxis([0.7071, 0.7071, 0])).toBe("X");
    expect(dominantAxis([0, 0.5, 0.5])).toBe("Y");
  });

  it("orbit preserves orthonormality through many increments", () => {
    let m = baseOrientationX();
    for (let i = 0; i < 500; i++) {
      m = renormalize(orbit(m, [0, 1, 0], 0.013));
      m = renormalize(orbit(m, [1, 0, 0], -0.007));
    }
    expect(isOrthonormal(m, 1e-9)).toBe(true);
  });
});

describe("layer depth ordering", () => {
  const quadAt = (x: number) => [x, -8, -8, x, 8, -8, x, 8, 8, x, -8, 8];

  it("matches the viewer core comparator: higher x is farther when gazing +x", () => {
    const m = baseOrientationX();
    expect(layerDepth(quadAt(4), m)).toBeGreaterThan(layerDepth(quadAt(-4), m));
  });

  it("reverses when the view flips", () => {
    const flipped = rotateModel(baseOrientationX(), [0, 0, 1], Math.PI);
    expect(layerDepth(quadAt(4), flipped)).toBeLessThan(layerDepth(quadAt(-4), flipped));
  });

  it("rejects malformed matrices", () => {
    expect(() => mat3([1, 2, 3])).toThrow();
    expect(isOrthonormal(mat3([1, 0, 0, 0, 2, 0, 0, 0, 1]))).toBe(false);
    expect(isOrthonormal(mat3([1, 0, 0, 0, 1, 0, 0, 0, -1]))).toBe(false); // reflection
  });
});
