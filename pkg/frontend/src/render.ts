/**
 * WebGL renderer: the layer stack as translucent textured quads.
 *
 * Quad corners are projected on the CPU (orthographic; the same
 * row-major orientation the viewer core uses) and drawn back-to-front
 * with premultiplied-alpha blending, ONE / ONE_MINUS_SRC_ALPHA.
 */

import type { Mat3 } from "./math.js";
import { apply } from "./math.js";
import type { Layer, LayerSet } from "./layers.js";

const VERTEX_SRC = `
attribute vec2 aCorner;     // quad parameter (s, t) in [0,1]
uniform vec2 uCorners[4];   // projected corner positions, clip space
varying vec2 vTex;
void main() {
  vec2 bottom = mix(uCorners[0], uCorners[1], aCorner.x);
  vec2 top = mix(uCorners[3], uCorners[2], aCorner.x);
  vec2 pos = mix(bottom, top, aCorner.y);
  vTex = aCorner;
  gl_Position = vec4(pos, 0.0, 1.0);
}
`;

const FRAGMENT_SRC = `
precision mediump float;
uniform sampler2D uTexture;
varying vec2 vTex;
void main() {
  gl_FragColor = texture2D(uTexture, vTex);
}
`;

function compile(gl: WebGLRenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type)!;
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

export class LayerRenderer {
  private gl: WebGLRenderingContext;
  private cornersLoc: WebGLUniformLocation;
  private textures = new Map<number, { texture: WebGLTexture; version: number }>();
  /** model units visible across the viewport */
  viewExtent = 2.0;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl", { premultipliedAlpha: true, alpha: false });
    if (!gl) throw new Error("WebGL unavailable");
    this.gl = gl;

    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERTEX_SRC));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAGMENT_SRC));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    gl.useProgram(program);

    const quad = gl.createBuffer();
    gl.bindBuffer(gl.ARRAY_BUFFER, quad);
    gl.bufferData(gl.ARRAY_BUFFER, new Float32Array([0, 0, 1, 0, 1, 1, 0, 1]), gl.STATIC_DRAW);
    const cornerLoc = gl.getAttribLocation(program, "aCorner");
    gl.enableVertexAttribArray(cornerLoc);
    gl.vertexAttribPointer(cornerLoc, 2, gl.FLOAT, false, 0, 0);

    this.cornersLoc = gl.getUniformLocation(program, "uCorners")!;
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.ONE, gl.ONE_MINUS_SRC_ALPHA);
    gl.clearColor(0.07, 0.07, 0.09, 1.0);
  }

  /** Fit the view to a volume's bounding sphere. */
  fitTo(placement: number[]): void {
    let radius = 1.0;
    for (let i = 0; i < 4; i++) {
      const r = Math.hypot(placement[i * 3], placement[i * 3 + 1], placement[i * 3 + 2]);
      radius = Math.max(radius, r);
    }
    this.viewExtent = radius * 2.3;
  }

  private textureFor(worker: number, layer: Layer): WebGLTexture {
    const gl = this.gl;
    let entry = this.textures.get(worker);
    if (!entry) {
      entry = { texture: gl.createTexture()!, version: -1 };
      this.textures.set(worker, entry);
    }
    if (entry.version !== layer.version) {
      gl.bindTexture(gl.TEXTURE_2D, entry.texture);
      gl.pixelStorei(gl.UNPACK_PREMULTIPLY_ALPHA_WEBGL, false);
      gl.texImage2D(
        gl.TEXTURE_2D, 0, gl.RGBA, layer.header.width, layer.header.height, 0,
        gl.RGBA, gl.UNSIGNED_BYTE, layer.pixels,
      );
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.LINEAR);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.LINEAR);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
      entry.version = layer.version;
    }
    return entry.texture;
  }

  draw(layers: LayerSet, orientation: Mat3): void {
    const gl = this.gl;
    const w = this.canvas.width;
    const h = this.canvas.height;
    gl.viewport(0, 0, w, h);
    gl.clear(gl.COLOR_BUFFER_BIT);

    const scale = 2 / this.viewExtent;
    const aspect = w / h;
    const corners = new Float32Array(8);
    for (const layer of layers.drawOrder(orientation)) {
      const p = layer.header.placement;
      for (let i = 0; i < 4; i++) {
        const v = apply(orientation, [p[i * 3], p[i * 3 + 1], p[i * 3 + 2]]);
        corners[i * 2] = (v[0] * scale) / (aspect > 1 ? aspect : 1);
        corners[i * 2 + 1] = v[1] * scale * (aspect < 1 ? aspect : 1);
      }
      gl.uniform2fv(this.cornersLoc, corners);
      gl.bindTexture(gl.TEXTURE_2D, this.textureFor(layer.header.worker, layer));
      gl.drawArrays(gl.TRIANGLE_FAN, 0, 4);
    }
  }
}
