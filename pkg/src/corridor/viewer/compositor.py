"""Headless compositing of textured slab quads.

Each slab texture is resampled onto the output raster through the
orthographic projection of its placement quad (an affine map, since
quads are rectangles), with bilinear sampling and a transparent border.
Quads are sorted back-to-front by the depth of their centers along the
view direction and combined with the premultiplied over operator.  At an
axis-aligned base orientation with a raster matching the texture grid the
resampling is exactly 1:1, which makes the stack equal to a monolithic
render of the whole volume.
"""

from __future__ import annotations

import numpy as np

from corridor.backend.payload import LightPayload
from corridor.raycast import (
    axis_base_orientation,
    render_slab,
    render_volume_view,
    rotate_orientation_about_model_axis,
)
from corridor.volume import (
    Axis,
    TransferFunction,
    decompose,
    default_transfer_function,
    slab_center_quad,
    slice_slab,
    texture_dims,
)

DEFAULT_RASTER = 512


def _bilinear_sample(texture: np.ndarray, tx: np.ndarray, ty: np.ndarray) -> np.ndarray:
    """Sample an (H, W, 4) texture at texel coordinates; outside is transparent.

    Texel k's center sits at coordinate k + 0.5.
    """
    h, w = texture.shape[:2]
    padded = np.zeros((h + 2, w + 2, 4), dtype=np.float64)
    padded[1 : h + 1, 1 : w + 1] = texture

    fx = tx - 0.5 + 1.0  # shift into padded index space
    fy = ty - 0.5 + 1.0
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    x0c = np.clip(x0, 0, w + 0)
    y0c = np.clip(y0, 0, h + 0)
    x1c = np.clip(x0 + 1, 0, w + 1)
    y1c = np.clip(y0 + 1, 0, h + 1)
    # Far outside the texture the clipped taps all land on the zero border.
    c00 = padded[y0c, x0c]
    c10 = padded[y0c, x1c]
    c01 = padded[y1c, x0c]
    c11 = padded[y1c, x1c]
    top = c00 * (1 - wx) + c10 * wx
    bot = c01 * (1 - wx) + c11 * wx
    return top * (1 - wy) + bot * wy


def rasterize_quad(
    out: np.ndarray,
    placement: np.ndarray,
    texture: np.ndarray,
    orientation: np.ndarray,
) -> None:
    """Over-composite one textured quad onto `out` (in place).

    `placement` rows are the quad corners for texture coordinates
    (0,0), (W,0), (W,H), (0,H); `out` pixel (i, j) sits at view coords
    (i + 0.5 - W_out/2, j + 0.5 - H_out/2).
    """
    h_out, w_out = out.shape[:2]
    m = np.asarray(orientation, dtype=np.float64)
    corners = (m @ np.asarray(placement, dtype=np.float64).T).T  # view space
    c0, c1, _c2, c3 = corners
    eu = (c1 - c0)[:2]
    ev = (c3 - c0)[:2]
    det = eu[0] * ev[1] - eu[1] * ev[0]
    if abs(det) < 1e-9:
        return  # edge-on: the quad projects to a line

    us = np.arange(w_out) + 0.5 - w_out / 2.0
    vs = np.arange(h_out) + 0.5 - h_out / 2.0
    uu, vv = np.meshgrid(us, vs)
    px = uu - c0[0]
    py = vv - c0[1]
    s = (px * ev[1] - py * ev[0]) / det
    t = (eu[0] * py - eu[1] * px) / det

    h_tex, w_tex = texture.shape[:2]
    inside = (s >= 0.0) & (s <= 1.0) & (t >= 0.0) & (t <= 1.0)
    rgba = np.zeros((h_out, w_out, 4), dtype=np.float64)
    if np.any(inside):
        sample = _bilinear_sample(texture, s[inside] * w_tex, t[inside] * h_tex)
        rgba[inside] = sample
    np.copyto(out, rgba + (1.0 - rgba[..., 3:4]) * out)


def composite_layers(
    layers: list[tuple[LightPayload, np.ndarray]],
    orientation: np.ndarray,
    out_size: tuple[int, int] = (DEFAULT_RASTER, DEFAULT_RASTER),
) -> np.ndarray:
    """Composite (light, float texture) layers at a view orientation.

    Layers sort back-to-front by the view depth of their quad centers; an
    empty layer list yields an all-transparent image.
    """
    width, height = out_size
    out = np.zeros((height, width, 4), dtype=np.float64)
    m = np.asarray(orientation, dtype=np.float64)
    gaze = m[2]

    def depth(item):
        center = item[0].placement_array.mean(axis=0)
        return float(center @ gaze)

    for light, texture in sorted(layers, key=depth, reverse=True):
        if texture.shape[:2] != (light.height, light.width):
            raise ValueError(
                f"texture shape {texture.shape[:2]} does not match light payload "
                f"{light.height}x{light.width}"
            )
        rasterize_quad(out, light.placement_array, texture, m)
    return out


def composite_scene(scene, orientation: np.ndarray, out_size=(DEFAULT_RASTER, DEFAULT_RASTER)) -> np.ndarray:
    """Composite whatever frames the scene's slots currently hold."""
    return composite_layers(scene.snapshot(), orientation, out_size)


def render_ibr_stack(
    volume: np.ndarray,
    tf: TransferFunction,
    axis: Axis,
    parts: int,
    value_range: tuple[float, float],
    direction: int = 1,
) -> list[tuple[LightPayload, np.ndarray]]:
    """Render the slab-image stack a back end would produce for one frame."""
    from corridor.backend.payload import light_from_quad

    nz, ny, nx = volume.shape
    dims = (nx, ny, nz)
    width, height = texture_dims(dims, axis)
    layers = []
    for assignment in decompose(dims, axis, parts):
        image = render_slab(slice_slab(volume, assignment), tf, axis, direction, value_range)
        quad = slab_center_quad(dims, assignment)
        light = light_from_quad(0, width, height, axis, quad)
        layers.append((light, image))
    return layers


def artifact_error(
    volume: np.ndarray,
    angle_deg: float,
    parts: int = 4,
    tf: TransferFunction | None = None,
    value_range: tuple[float, float] = (0.0, 1.0),
    out_size: tuple[int, int] | None = None,
    axis: Axis = Axis.X,
) -> float:
    """Mean absolute per-pixel error of the image stack at an off-axis view.

    The stack is built at `axis` (axis switching disabled), viewed after
    rotating the base orientation by `angle_deg` about the model z axis,
    and compared against a ground-truth re-render of the whole volume at
    that view.
    """
    tf = tf if tf is not None else default_transfer_function()
    nz, ny, nx = volume.shape
    if out_size is None:
        # Cover the rotated volume; match the texture grid's parity per
        # axis so the 0 degree view stays exactly texel aligned.
        side = int(np.ceil(np.sqrt(nx * nx + ny * ny + nz * nz)))
        tex_w, tex_h = texture_dims((nx, ny, nz), axis)
        out_size = (side + (side - tex_w) % 2, side + (side - tex_h) % 2)
    orientation = rotate_orientation_about_model_axis(
        axis_base_orientation(axis), (0.0, 0.0, 1.0), angle_deg
    )
    layers = render_ibr_stack(volume, tf, axis, parts, value_range)
    approx = composite_layers(layers, orientation, out_size)
    truth = render_volume_view(volume, tf, orientation, out_size, value_range)
    return float(np.mean(np.abs(approx - truth)))
