"""Volume datasets, slab decomposition, axis selection, transfer functions.

Conventions used throughout the pipeline:

* dims are (nx, ny, nz); a timestep is float32, x-fastest row-major, so a
  numpy array of shape (nz, ny, nx) in C order matches the file layout.
* model space is voxel units with the origin at the volume center, i.e.
  x spans [-nx/2, nx/2].
* scalars are stored raw; the dataset's global (vmin, vmax) is carried as
  metadata and values are normalized to [0, 1] at classification time so
  transfer functions are dataset independent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

VOXEL_DTYPE = np.dtype("<f4")


class Axis(enum.IntEnum):
    X = 0
    Y = 1
    Z = 2

    @property
    def numpy_axis(self) -> int:
        # arrays are (nz, ny, nx)
        return 2 - int(self)

    @classmethod
    def parse(cls, text) -> "Axis":
        if isinstance(text, Axis):
            return text
        if isinstance(text, int):
            return cls(text)
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown axis: {text!r}") from None


class InvalidPartitionError(ValueError):
    """Requested more slabs than there are slices along the axis."""


class InvalidViewError(ValueError):
    """View direction unusable (zero vector)."""


@dataclass(frozen=True)
class SlabAssignment:
    """Contiguous slice range [lo, hi) along `axis` owned by one worker."""

    axis: Axis
    worker_index: int
    lo: int
    hi: int

    @property
    def count(self) -> int:
        return self.hi - self.lo


def decompose(dims: tuple[int, int, int], axis: Axis, parts: int) -> list[SlabAssignment]:
    """Split [0, dims[axis]) into `parts` contiguous slabs.

    Sizes differ by at most one; the first (extent mod parts) slabs are one
    slice thicker.
    """
    axis = Axis.parse(axis)
    extent = dims[int(axis)]
    if parts < 1 or parts > extent:
        raise InvalidPartitionError(f"cannot split {extent} slices into {parts} slabs")
    base, rem = divmod(extent, parts)
    assignments = []
    lo = 0
    for w in range(parts):
        hi = lo + base + (1 if w < rem else 0)
        assignments.append(SlabAssignment(axis=axis, worker_index=w, lo=lo, hi=hi))
        lo = hi
    return assignments


def choose_axis(view_direction) -> Axis:
    """Best slab axis for a view: the largest-magnitude component.

    Ties break X before Y before Z.
    """
    v = np.asarray(view_direction, dtype=float)
    if v.shape != (3,) or not np.any(v != 0.0):
        raise InvalidViewError(f"view direction must be a non-zero 3-vector, got {view_direction!r}")
    return Axis(int(np.argmax(np.abs(v))))


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear scalar -> premultiplied RGBA lookup.

    Breakpoint scalars must be strictly increasing; lookups outside the
    range clamp to the end breakpoints.
    """

    scalars: tuple[float, ...]
    colors: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        if len(self.scalars) != len(self.colors) or len(self.scalars) < 1:
            raise ValueError("need matching, non-empty scalars and colors")
        if any(b <= a for a, b in zip(self.scalars, self.scalars[1:])):
            raise ValueError("breakpoint scalars must be strictly increasing")
        for col in self.colors:
            if len(col) != 4 or any(not (0.0 <= c <= 1.0) for c in col):
                raise ValueError(f"color components must lie in [0,1]: {col}")

    @classmethod
    def from_breakpoints(cls, breakpoints) -> "TransferFunction":
        pts = sorted(breakpoints, key=lambda p: p[0])
        return cls(tuple(p[0] for p in pts), tuple(tuple(p[1]) for p in pts))


def default_transfer_function() -> TransferFunction:
    """Gray ramp: scalar 0 transparent black, scalar 1 opaque white."""
    return TransferFunction((0.0, 1.0), ((0.0, 0.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0)))


def classify(tf: TransferFunction, scalars) -> np.ndarray:
    """Map scalars through the transfer function; returns (..., 4) float64."""
    s = np.asarray(scalars, dtype=np.float64)
    xs = np.asarray(tf.scalars, dtype=np.float64)
    cols = np.asarray(tf.colors, dtype=np.float64)
    out = np.empty(s.shape + (4,), dtype=np.float64)
    for c in range(4):
        out[..., c] = np.interp(s, xs, cols[:, c])
    return out


def normalize_scalars(values: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    """Map raw scalars onto [0,1] by the dataset's global range."""
    if vmax <= vmin:
        return np.zeros_like(values, dtype=np.float64)
    return (np.asarray(values, dtype=np.float64) - vmin) / (vmax - vmin)


@dataclass
class VolumeMeta:
    """Shape and scalar-range metadata for a time-varying volume."""

    dims: tuple[int, int, int]
    timesteps: int
    vmin: float = 0.0
    vmax: float = 1.0

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 1 or self.timesteps < 1:
            raise ValueError(f"bad volume shape: dims={self.dims} timesteps={self.timesteps}")
        self.dims = (int(nx), int(ny), int(nz))

    @property
    def voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def timestep_bytes(self) -> int:
        return self.voxels * VOXEL_DTYPE.itemsize

    @property
    def value_range(self) -> tuple[float, float]:
        return (self.vmin, self.vmax)


# -- sidecar descriptor (key=value text) -------------------------------------

_DESCRIPTOR_KEYS = ("nx", "ny", "nz", "timesteps")


def descriptor_text(meta: VolumeMeta, pattern: str | None = None) -> str:
    nx, ny, nz = meta.dims
    lines = [f"nx={nx}", f"ny={ny}", f"nz={nz}", f"timesteps={meta.timesteps}"]
    if pattern:
        lines.append(f"pattern={pattern}")
    lines.append(f"vmin={meta.vmin!r}")
    lines.append(f"vmax={meta.vmax!r}")
    return "\n".join(lines) + "\n"


def parse_descriptor(text: str) -> tuple[VolumeMeta, str | None]:
    values: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"descriptor line is not key=value: {line!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    missing = [k for k in _DESCRIPTOR_KEYS if k not in values]
    if missing:
        raise ValueError(f"descriptor missing keys: {missing}")
    meta = VolumeMeta(
        dims=(int(values["nx"]), int(values["ny"]), int(values["nz"])),
        timesteps=int(values["timesteps"]),
        vmin=float(values.get("vmin", 0.0)),
        vmax=float(values.get("vmax", 1.0)),
    )
    return meta, values.get("pattern")


def write_descriptor(path, meta: VolumeMeta, pattern: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(descriptor_text(meta, pattern))


def read_descriptor(path) -> tuple[VolumeMeta, str | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_descriptor(fh.read())


# -- raw timestep files -------------------------------------------------------


def write_timestep(path, values: np.ndarray) -> None:
    """Write one timestep as bare little-endian float32, x-fastest."""
    arr = np.ascontiguousarray(values, dtype=VOXEL_DTYPE)
    with open(path, "wb") as fh:
        fh.write(arr.tobytes())


def read_timestep(path, dims: tuple[int, int, int]) -> np.ndarray:
    nx, ny, nz = dims
    with open(path, "rb") as fh:
        data = fh.read()
    expect = nx * ny * nz * VOXEL_DTYPE.itemsize
    if len(data) != expect:
        raise ValueError(f"{path}: expected {expect} bytes for dims {dims}, found {len(data)}")
    return np.frombuffer(data, dtype=VOXEL_DTYPE).reshape(nz, ny, nx)


def timestep_array(values) -> np.ndarray:
    """Validate/normalize one timestep array to (nz, ny, nx) float32."""
    arr = np.asarray(values, dtype=VOXEL_DTYPE)
    if arr.ndim != 3:
        raise ValueError(f"timestep must be 3-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


# -- synthetic datasets -------------------------------------------------------


@dataclass
class SyntheticDataset:
    meta: VolumeMeta
    frames: list[np.ndarray] = field(repr=False, default_factory=list)

    def timestep(self, t: int) -> np.ndarray:
        return self.frames[t]


def _gaussian(dims, center, sigma) -> np.ndarray:
    nx, ny, nz = dims
    z, y, x = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    cx, cy, cz = center
    sx, sy, sz = sigma
    r2 = ((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2 + ((z - cz) / sz) ** 2
    return np.exp(-0.5 * r2).astype(VOXEL_DTYPE)


def synthesize(kind: str, dims: tuple[int, int, int], timesteps: int, value: float = 0.0) -> SyntheticDataset:
    """Deterministic test datasets: constant, gaussian-blob, moving-blob.

    The moving blob translates its center by a fixed per-timestep offset
    along x, crossing half the volume over the run.
    """
    nx, ny, nz = dims
    if min(nx, ny, nz) < 1 or timesteps < 1:
        raise ValueError(f"bad dims/timesteps: {dims}/{timesteps}")
    sigma = (max(nx / 6.0, 1.0), max(ny / 6.0, 1.0), max(nz / 6.0, 1.0))

    frames: list[np.ndarray] = []
    if kind == "constant":
        for _ in range(timesteps):
            frames.append(np.full((nz, ny, nx), value, dtype=VOXEL_DTYPE))
    elif kind == "gaussian-blob":
        frame = _gaussian(dims, (nx // 2, ny // 2, nz // 2), sigma)
        frames = [frame.copy() for _ in range(timesteps)]
    elif kind == "moving-blob":
        offset = max(1, nx // (2 * timesteps))
        for t in range(timesteps):
            center = (nx // 4 + t * offset, ny // 2, nz // 2)
            frames.append(_gaussian(dims, center, sigma))
    else:
        raise ValueError(f"unknown synthetic kind: {kind!r}")

    vmin = min(float(f.min()) for f in frames)
    vmax = max(float(f.max()) for f in frames)
    meta = VolumeMeta(dims=dims, timesteps=timesteps, vmin=vmin, vmax=vmax)
    return SyntheticDataset(meta=meta, frames=frames)


def moving_blob_offset(nx: int, timesteps: int) -> int:
    """Per-timestep x translation used by the moving-blob synthesizer."""
    return max(1, nx // (2 * timesteps))


# -- slab geometry within the x-fastest file layout ---------------------------


def slab_byte_runs(dims: tuple[int, int, int], assignment: SlabAssignment) -> list[tuple[int, int]]:
    """Contiguous (offset, length) byte runs of a slab within one timestep.

    Axis X slabs touch one short run per (y, z) row; axis Y slabs one run
    per z plane; axis Z slabs are a single run.
    """
    nx, ny, nz = dims
    item = VOXEL_DTYPE.itemsize
    lo, hi = assignment.lo, assignment.hi
    axis = assignment.axis
    if not (0 <= lo < hi <= dims[int(axis)]):
        raise ValueError(f"assignment {assignment} outside dims {dims}")
    runs: list[tuple[int, int]] = []
    if axis == Axis.X:
        length = (hi - lo) * item
        for z in range(nz):
            for y in range(ny):
                runs.append((((z * ny + y) * nx + lo) * item, length))
    elif axis == Axis.Y:
        length = (hi - lo) * nx * item
        for z in range(nz):
            runs.append(((z * ny + lo) * nx * item, length))
    else:
        runs.append((lo * ny * nx * item, (hi - lo) * ny * nx * item))
    return runs


def slab_from_run_bytes(dims: tuple[int, int, int], assignment: SlabAssignment, chunks: list[bytes]) -> np.ndarray:
    """Reassemble `slab_byte_runs` payloads into the slab voxel array."""
    nx, ny, nz = dims
    w = assignment.count
    data = b"".join(chunks)
    arr = np.frombuffer(data, dtype=VOXEL_DTYPE)
    axis = assignment.axis
    if axis == Axis.X:
        return arr.reshape(nz, ny, w)
    if axis == Axis.Y:
        return arr.reshape(nz, w, nx)
    return arr.reshape(w, ny, nx)


def slice_slab(volume: np.ndarray, assignment: SlabAssignment) -> np.ndarray:
    """Slab sub-array of an in-memory (nz, ny, nx) timestep."""
    lo, hi = assignment.lo, assignment.hi
    if assignment.axis == Axis.X:
        return volume[:, :, lo:hi]
    if assignment.axis == Axis.Y:
        return volume[:, lo:hi, :]
    return volume[lo:hi, :, :]


def slab_center_quad(dims: tuple[int, int, int], assignment: SlabAssignment) -> np.ndarray:
    """Center-plane quad of a slab in centered model coordinates.

    Returns a (4, 3) array ordered (u=0,v=0), (u=W,v=0), (u=W,v=H),
    (u=0,v=H) where (u, v) are the texture axes of the slab's rendering.
    """
    nx, ny, nz = dims
    c = (assignment.lo + assignment.hi) / 2.0 - dims[int(assignment.axis)] / 2.0
    hx, hy, hz = nx / 2.0, ny / 2.0, nz / 2.0
    if assignment.axis == Axis.X:
        corners = [(c, -hy, -hz), (c, hy, -hz), (c, hy, hz), (c, -hy, hz)]
    elif assignment.axis == Axis.Y:
        # Y-slab textures run u = -x (see render_slab), so u=0 sits at +x.
        corners = [(hx, c, -hz), (-hx, c, -hz), (-hx, c, hz), (hx, c, hz)]
    else:
        corners = [(-hx, -hy, c), (hx, -hy, c), (hx, hy, c), (-hx, hy, c)]
    return np.array(corners, dtype=np.float64)


def texture_dims(dims: tuple[int, int, int], axis: Axis) -> tuple[int, int]:
    """(width, height) of the texture a slab along `axis` renders to."""
    nx, ny, nz = dims
    axis = Axis.parse(axis)
    if axis == Axis.X:
        return ny, nz
    if axis == Axis.Y:
        return nx, nz
    return nx, ny
