/**
 * Trackball rotation: pixel drags orbit the camera about its view axes.
 *
 * Horizontal drag rotates about the view up axis, vertical about the
 * view right axis.  The orientation is re-orthonormalized after each
 * increment so long interactions never drift.  No zoom or pan.
 */

import type { Mat3 } from "./math.js";
import { baseOrientationX, orbit, renormalize } from "./math.js";

export class Trackball {
  orientation: Mat3;
  /** radians of rotation per dragged pixel */
  sensitivity: number;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(sensitivity = 0.008) {
    this.orientation = baseOrientationX();
    this.sensitivity = sensitivity;
  }

  startDrag(x: number, y: number): void {
    this.dragging = true;
    this.lastX = x;
    this.lastY = y;
  }

  drag(x: number, y: number): boolean {
    if (!this.dragging) return false;
    const dx = x - this.lastX;
    const dy = y - this.lastY;
    this.lastX = x;
    this.lastY = y;
    if (dx === 0 && dy === 0) return false;
    this.rotateBy(dx * this.sensitivity, dy * this.sensitivity);
    return true;
  }

  endDrag(): void {
    this.dragging = false;
  }

  /** Yaw about view up, pitch about view right (radians). */
  rotateBy(yaw: number, pitch: number): void {
    let m = this.orientation;
    if (yaw !== 0) m = orbit(m, [0, 1, 0], yaw);
    if (pitch !== 0) m = orbit(m, [1, 0, 0], pitch);
    this.orientation = renormalize(m);
  }

  reset(): void {
    this.orientation = baseOrientationX();
  }
}
