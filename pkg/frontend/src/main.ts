/** App wiring: stream -> layers -> renderer, trackball -> stream. */

import { dominantAxis, gaze } from "./math.js";
import { BridgeStream } from "./stream.js";
import { Trackball } from "./trackball.js";
import { LayerRenderer } from "./render.js";

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function start(): void {
  const canvas = element<HTMLCanvasElement>("view");
  const statusEl = element<HTMLSpanElement>("status");
  const axisEl = element<HTMLSpanElement>("axis");
  const framesEl = element<HTMLSpanElement>("frames");
  const rateEl = element<HTMLSpanElement>("rate");

  const renderer = new LayerRenderer(canvas);
  const trackball = new Trackball();
  let fitted = false;
  let installsThisSecond = 0;

  const wsUrl = `ws://${location.host}/ws`;
  const stream = new BridgeStream(
    wsUrl,
    {
      onStatus: (status) => {
        statusEl.textContent = status === "live" ? "live" : status === "stale" ? "stale (reconnecting)" : "connecting";
        statusEl.className = status;
      },
      onLayer: (worker) => {
        const layer = stream.layers.get(worker);
        if (layer && !fitted) {
          renderer.fitTo(layer.header.placement);
          fitted = true;
        }
        installsThisSecond += 1;
        redraw();
        updateHud();
      },
    },
  );

  function redraw(): void {
    renderer.draw(stream.layers, trackball.orientation);
  }

  function updateHud(): void {
    const frames = [...stream.layers.frames().entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([worker, frame]) => `w${worker}:f${frame}`)
      .join(" ");
    framesEl.textContent = frames || "-";
    const indicated = stream.layers.size
      ? [...stream.layers.frames().keys()].map((w) => stream.layers.get(w)!.header.axis)[0]
      : dominantAxis(gaze(trackball.orientation));
    axisEl.textContent = `slabs ${indicated} / view ${dominantAxis(gaze(trackball.orientation))}`;
  }

  setInterval(() => {
    rateEl.textContent = `${installsThisSecond} layer/s`;
    installsThisSecond = 0;
  }, 1000);

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    trackball.startDrag(ev.clientX, ev.clientY);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (trackball.drag(ev.clientX, ev.clientY)) {
      redraw(); // local redraw first, never gated on the network
      updateHud();
      stream.sendView(trackball.orientation);
    }
  });
  canvas.addEventListener("pointerup", () => trackball.endDrag());
  canvas.addEventListener("pointercancel", () => trackball.endDrag());

  element<HTMLButtonElement>("reset").addEventListener("click", () => {
    trackball.reset();
    redraw();
    updateHud();
    stream.sendView(trackball.orientation);
  });

  let spinning = false;
  let lastTick = 0;
  element<HTMLInputElement>("autorotate").addEventListener("change", (ev) => {
    spinning = (ev.target as HTMLInputElement).checked;
    lastTick = performance.now();
    if (spinning) requestAnimationFrame(tick);
  });

  function tick(t: number): void {
    if (!spinning) return;
    const dt = (t - lastTick) / 1000;
    lastTick = t;
    trackball.rotateBy(dt * 0.5, 0);
    redraw();
    updateHud();
    stream.sendView(trackball.orientation);
    requestAnimationFrame(tick);
  }

  stream.connect();
  redraw();
  updateHud();
}

start();
