"""Software ray casting and premultiplied-alpha compositing.

Two renderers live here:

* `render_slab` — the production path: orthographic rays parallel to a
  decomposition axis, one ray per transverse voxel, one sample per voxel,
  accumulated back-to-front with the premultiplied over operator.
* `render_volume_view` — an independent renderer for arbitrary
  orthographic views: per-ray marching with trilinear sampling at unit
  step.  It serves as ground truth when measuring image-stack
  approximation artifacts at off-axis views.

Both treat colors as premultiplied RGBA, so compositing is
``out = front + (1 - front_alpha) * back`` on all four channels.
Accumulation happens in float64; quantization to the 8-bit wire format is
a separate, final step.
"""

from __future__ import annotations

import numpy as np

from corridor.volume import Axis, TransferFunction, classify, normalize_scalars


def over(front: np.ndarray, back: np.ndarray) -> np.ndarray:
    """Porter-Duff over for premultiplied (..., 4) colors."""
    front = np.asarray(front, dtype=np.float64)
    back = np.asarray(back, dtype=np.float64)
    return front + (1.0 - front[..., 3:4]) * back


def composite_stack(layers) -> np.ndarray:
    """Composite same-shape layers given back to front."""
    layers = list(layers)
    if not layers:
        raise ValueError("no layers to composite")
    out = np.array(layers[0], dtype=np.float64)
    for layer in layers[1:]:
        out = over(layer, out)
    return out


def quantize(image: np.ndarray) -> np.ndarray:
    """Float [0,1] image -> uint8 (the 8-bit premultiplied wire format)."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def dequantize(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64) / 255.0


def render_slab(
    slab: np.ndarray,
    tf: TransferFunction,
    axis: Axis,
    direction: int = 1,
    value_range: tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Ray-cast a slab along `axis` into an (H, W, 4) premultiplied image.

    `direction=+1` means the gaze points along +axis (the eye sits on the
    negative side), so samples at higher axis coordinates are farther away
    and are composited first.  Texture axes: X slabs map (u, v) = (y, z);
    Y slabs (-x, z); Z slabs (x, y).  The Y mapping is mirrored so that
    every axis-aligned base view is a proper rotation (reachable by a
    trackball) while staying exactly texel aligned.
    """
    axis = Axis.parse(axis)
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    slab = np.asarray(slab)
    if slab.ndim != 3 or slab.size == 0:
        raise ValueError(f"slab must be a non-empty 3-D array, got shape {slab.shape}")

    # Planes indexed by position along the cast axis, shape (depth, H, W).
    planes = np.moveaxis(slab, axis.numpy_axis, 0)
    if axis == Axis.Y:
        planes = planes[:, :, ::-1]
    scalars = normalize_scalars(planes, *value_range)

    depth = planes.shape[0]
    order = range(depth - 1, -1, -1) if direction == 1 else range(depth)
    out = np.zeros(planes.shape[1:] + (4,), dtype=np.float64)
    for k in order:
        rgba = classify(tf, scalars[k])
        out = rgba + (1.0 - rgba[..., 3:4]) * out
    return out


# -- arbitrary-view orthographic renderer -------------------------------------


def axis_base_orientation(axis: Axis) -> np.ndarray:
    """Model->view rotation looking along +axis, matching the slab textures.

    Rows are the view-space right/up/gaze directions in model coordinates;
    the gaze is row 2.  All three are proper rotations, and at these
    orientations an axis-aligned composite is a 1:1 resample of the slab
    textures.
    """
    axis = Axis.parse(axis)
    if axis == Axis.X:
        return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    if axis == Axis.Y:
        return np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def rotate_orientation_about_model_axis(orientation: np.ndarray, model_axis, angle_deg: float) -> np.ndarray:
    """Rotate a model->view orientation about a model-space axis."""
    axis = np.asarray(model_axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    theta = np.deg2rad(angle_deg)
    x, y, z = axis
    c, s = np.cos(theta), np.sin(theta)
    cc = 1.0 - c
    rot = np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )
    # Rotating the model by `rot` is viewing it with the inverse rotation.
    return np.asarray(orientation, dtype=np.float64) @ rot.T


def gaze_direction(orientation: np.ndarray) -> np.ndarray:
    """Model-space direction the view looks along (view +z)."""
    return np.asarray(orientation, dtype=np.float64)[2]


def _trilinear(volume: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Trilinear sample at centered model coordinates, shape (..., 3)."""
    nz, ny, nx = volume.shape
    fx = pos[..., 0] + nx / 2.0 - 0.5
    fy = pos[..., 1] + ny / 2.0 - 0.5
    fz = pos[..., 2] + nz / 2.0 - 0.5

    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    z0 = np.floor(fz).astype(np.int64)
    wx = fx - x0
    wy = fy - y0
    wz = fz - z0

    def fetch(xi, yi, zi):
        xi = np.clip(xi, 0, nx - 1)
        yi = np.clip(yi, 0, ny - 1)
        zi = np.clip(zi, 0, nz - 1)
        return volume[zi, yi, xi]

    c000 = fetch(x0, y0, z0)
    c100 = fetch(x0 + 1, y0, z0)
    c010 = fetch(x0, y0 + 1, z0)
    c110 = fetch(x0 + 1, y0 + 1, z0)
    c001 = fetch(x0, y0, z0 + 1)
    c101 = fetch(x0 + 1, y0, z0 + 1)
    c011 = fetch(x0, y0 + 1, z0 + 1)
    c111 = fetch(x0 + 1, y0 + 1, z0 + 1)

    c00 = c000 * (1 - wx) + c100 * wx
    c10 = c010 * (1 - wx) + c110 * wx
    c01 = c001 * (1 - wx) + c101 * wx
    c11 = c011 * (1 - wx) + c111 * wx
    c0 = c00 * (1 - wy) + c10 * wy
    c1 = c01 * (1 - wy) + c11 * wy
    return c0 * (1 - wz) + c1 * wz


def render_volume_view(
    volume: np.ndarray,
    tf: TransferFunction,
    orientation: np.ndarray,
    out_size: tuple[int, int],
    value_range: tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Orthographic render of a whole volume at an arbitrary orientation.

    Rays march through the volume's bounding box at unit step with samples
    offset half a step from the entry face, so at an axis-aligned base
    orientation every sample lands exactly on a voxel center and the
    result matches `render_slab` of the whole volume.
    """
    volume = np.asarray(volume, dtype=np.float64)
    nz, ny, nx = volume.shape
    width, height = out_size
    m = np.asarray(orientation, dtype=np.float64)

    d = m[2]
    us = np.arange(width) + 0.5 - width / 2.0
    vs = np.arange(height) + 0.5 - height / 2.0
    uu, vv = np.meshgrid(us, vs)
    origins = uu[..., None] * m[0] + vv[..., None] * m[1]  # view z = 0 plane

    half = np.array([nx / 2.0, ny / 2.0, nz / 2.0])
    t_lo = np.full(uu.shape, -np.inf)
    t_hi = np.full(uu.shape, np.inf)
    for c in range(3):
        o_c = origins[..., c]
        if abs(d[c]) < 1e-12:
            outside = (o_c < -half[c]) | (o_c > half[c])
            t_lo = np.where(outside, np.inf, t_lo)
            continue
        t1 = (-half[c] - o_c) / d[c]
        t2 = (half[c] - o_c) / d[c]
        t_lo = np.maximum(t_lo, np.minimum(t1, t2))
        t_hi = np.minimum(t_hi, np.maximum(t1, t2))

    span = t_hi - t_lo
    hit = span >= 0.5
    span_safe = np.where(hit, span, 0.5)
    counts = np.where(hit, np.floor(span_safe - 0.5).astype(np.int64) + 1, 0)
    t_start = np.where(hit, t_lo, 0.0)
    kmax = int(counts.max(initial=0))

    out = np.zeros((height, width, 4), dtype=np.float64)
    normalized = normalize_scalars(volume, *value_range)
    for k in range(kmax):
        active = counts > k
        if not np.any(active):
            break
        t = t_start + 0.5 + k
        pos = origins + t[..., None] * d
        scalars = np.zeros(uu.shape, dtype=np.float64)
        scalars[active] = _trilinear(normalized, pos[active])
        rgba = classify(tf, scalars)
        rgba[~active] = 0.0
        # Samples arrive near-to-far: accumulate front-to-back.
        out += (1.0 - out[..., 3:4]) * rgba
    return out
