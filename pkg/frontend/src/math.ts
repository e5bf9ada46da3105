/**
 * 3x3 rotation helpers shared by the trackball, layer sorting and the
 * bridge protocol.
 *
 * Orientations are row-major model->view rotations: row 0 is the view
 * right direction, row 1 up, row 2 the gaze.  These conventions mirror
 * the viewer core exactly; in particular the depth comparator below must
 * sort layers the same way the headless compositor does.
 */

export type Mat3 = Float64Array; // 9 elements, row-major
export type Vec3 = [number, number, number];

export function mat3(values: number[]): Mat3 {
  if (values.length !== 9) throw new Error(`mat3 needs 9 values, got ${values.length}`);
  return Float64Array.from(values);
}

export function identity(): Mat3 {
  return mat3([1, 0, 0, 0, 1, 0, 0, 0, 1]);
}

/** Base orientation looking along +X, matching the back end's default axis. */
export function baseOrientationX(): Mat3 {
  return mat3([0, 1, 0, 0, 0, 1, 1, 0, 0]);
}

export function multiply(a: Mat3, b: Mat3): Mat3 {
  const out = new Float64Array(9);
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      out[r * 3 + c] = a[r * 3] * b[c] + a[r * 3 + 1] * b[3 + c] + a[r * 3 + 2] * b[6 + c];
    }
  }
  return out;
}

export function transpose(m: Mat3): Mat3 {
  return mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]]);
}

export function apply(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

export function rotationAboutAxis(axis: Vec3, angleRad: number): Mat3 {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  const [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
  const c = Math.cos(angleRad);
  const s = Math.sin(angleRad);
  const cc = 1 - c;
  return mat3([
    c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s,
    y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s,
    z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc,
  ]);
}

/** Rotate the *model* under a fixed camera: M' = M * R^T. */
export function rotateModel(orientation: Mat3, axis: Vec3, angleRad: number): Mat3 {
  return multiply(orientation, transpose(rotationAboutAxis(axis, angleRad)));
}

/** Orbit the camera in view space (trackball): M' = R_view * M. */
export function orbit(orientation: Mat3, viewAxis: Vec3, angleRad: number): Mat3 {
  return multiply(rotationAboutAxis(viewAxis, angleRad), orientation);
}

export function gaze(orientation: Mat3): Vec3 {
  return [orientation[6], orientation[7], orientation[8]];
}

export type AxisName = "X" | "Y" | "Z";

/** Largest-magnitude gaze component; ties break X before Y before Z. */
export function dominantAxis(direction: Vec3): AxisName {
  const abs = direction.map(Math.abs);
  let best = 0;
  for (let i = 1; i < 3; i++) {
    if (abs[i] > abs[best]) best = i;
  }
  return (["X", "Y", "Z"] as const)[best];
}

export function isOrthonormal(m: Mat3, tol = 1e-6): boolean {
  const t = transpose(m);
  const product = multiply(m, t);
  const eye = identity();
  for (let i = 0; i < 9; i++) {
    if (Math.abs(product[i] - eye[i]) > tol) return false;
  }
  return det(m) > 0;
}

export function det(m: Mat3): number {
  return (
    m[0] * (m[4] * m[8] - m[5] * m[7]) -
    m[1] * (m[3] * m[8] - m[5] * m[6]) +
    m[2] * (m[3] * m[7] - m[4] * m[6])
  );
}

/** Re-orthonormalize after accumulated drag increments (Gram-Schmidt on rows). */
export function renormalize(m: Mat3): Mat3 {
  const r0: Vec3 = [m[0], m[1], m[2]];
  const r1: Vec3 = [m[3], m[4], m[5]];
  const norm = (v: Vec3): Vec3 => {
    const n = Math.hypot(v[0], v[1], v[2]);
    return [v[0] / n, v[1] / n, v[2] / n];
  };
  const dot = (a: Vec3, b: Vec3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  const cross = (a: Vec3, b: Vec3): Vec3 => [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
  const u0 = norm(r0);
  const d = dot(r1, u0);
  const u1 = norm([r1[0] - d * u0[0], r1[1] - d * u0[1], r1[2] - d * u0[2]]);
  const u2 = cross(u0, u1); // right x up = gaze keeps the basis right-handed
  return mat3([...u0, ...u1, ...u2]);
}

/**
 * Depth of a quad center along the gaze; layers sort descending (far
 * first), matching the headless compositor's back-to-front order.
 */
export function layerDepth(placement: Float32Array | number[], orientation: Mat3): number {
  let cx = 0;
  let cy = 0;
  let cz = 0;
  for (let i = 0; i < 4; i++) {
    cx += placement[i * 3] / 4;
    cy += placement[i * 3 + 1] / 4;
    cz += placement[i * 3 + 2] / 4;
  }
  const g = gaze(orientation);
  return cx * g[0] + cy * g[1] + cz * g[2];
}
