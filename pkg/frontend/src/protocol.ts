/**
 * Bridge wire protocol.
 *
 * The viewer core pushes, per scene change, one JSON text frame
 * `{frame, worker, width, height, axis, placement}` followed by one
 * binary frame of premultiplied RGBA bytes (row 0 is the bottom of the
 * texture).  The client sends `{type: "view", m: [...9 floats...]}`
 * orientation updates, row-major model->view.
 */

import type { AxisName, Mat3 } from "./math.js";

export interface LayerHeader {
  frame: number;
  worker: number;
  width: number;
  height: number;
  axis: AxisName;
  placement: number[]; // 4 corners x 3 model coords
}

export function parseLayerHeader(text: string): LayerHeader {
  const raw = JSON.parse(text);
  const header = raw as LayerHeader;
  if (
    typeof header.frame !== "number" ||
    typeof header.worker !== "number" ||
    typeof header.width !== "number" ||
    typeof header.height !== "number" ||
    !["X", "Y", "Z"].includes(header.axis) ||
    !Array.isArray(header.placement) ||
    header.placement.length !== 12
  ) {
    throw new Error(`malformed layer header: ${text.slice(0, 120)}`);
  }
  return header;
}

export function viewMessage(orientation: Mat3): string {
  return JSON.stringify({ type: "view", m: Array.from(orientation) });
}

export function expectedPixelBytes(header: LayerHeader): number {
  return header.width * header.height * 4;
}
