import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corridor.volume import (
    Axis,
    InvalidPartitionError,
    InvalidViewError,
    SlabAssignment,
    TransferFunction,
    choose_axis,
    classify,
    decompose,
    default_transfer_function,
    descriptor_text,
    moving_blob_offset,
    parse_descriptor,
    read_timestep,
    slab_byte_runs,
    slab_from_run_bytes,
    slice_slab,
    synthesize,
    write_timestep,
)


class TestDecompose:
    def test_even_division(self):
        ranges = [(a.lo, a.hi) for a in decompose((640, 256, 256), Axis.X, 4)]
        assert ranges == [(0, 160), (160, 320), (320, 480), (480, 640)]

    def test_remainder_first(self):
        ranges = [(a.lo, a.hi) for a in decompose((7, 4, 4), Axis.X, 3)]
        assert ranges == [(0, 3), (3, 5), (5, 7)]

    def test_too_many_parts(self):
        with pytest.raises(InvalidPartitionError):
            decompose((4, 4, 4), Axis.X, 5)

    @given(extent=st.integers(1, 64), parts=st.integers(1, 64))
    @settings(max_examples=200)
    def test_partition_property(self, extent, parts):
        if parts > extent:
            with pytest.raises(InvalidPartitionError):
                decompose((extent, 8, 8), Axis.X, parts)
            return
        slabs = decompose((extent, 8, 8), Axis.X, parts)
        assert slabs[0].lo == 0 and slabs[-1].hi == extent
        for a, b in zip(slabs, slabs[1:]):
            assert a.hi == b.lo
        sizes = [s.count for s in slabs]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(sizes, reverse=True) == sizes  # thick slabs come first

    def test_other_axes(self):
        for axis, dim in [(Axis.Y, 5), (Axis.Z, 9)]:
            slabs = decompose((3, 5, 9), axis, 2)
            assert slabs[-1].hi == dim


class TestChooseAxis:
    def test_axis_aligned(self):
        assert choose_axis((1, 0, 0)) == Axis.X

    def test_dominant_component(self):
        assert choose_axis((0.6, 0.7, 0.2)) == Axis.Y

    def test_tie_breaks_toward_x(self):
        assert choose_axis((0.7071, 0.7071, 0)) == Axis.X
        assert choose_axis((0, 0.5, 0.5)) == Axis.Y

    def test_zero_vector_rejected(self):
        with pytest.raises(InvalidViewError):
            choose_axis((0, 0, 0))

    @given(
        v=st.tuples(*[st.floats(-1, 1, allow_nan=False) for _ in range(3)]).filter(
            lambda t: any(abs(c) > 1e-6 for c in t)
        ),
        k=st.floats(1e-3, 1e3, allow_nan=False),
    )
    @settings(max_examples=200)
    def test_scale_invariance(self, v, k):
        scaled = tuple(c * k for c in v)
        assert choose_axis(v) == choose_axis(scaled)


class TestSynthesize:
    def test_constant_zero(self):
        ds = synthesize("constant", (8, 8, 8), 1, value=0.0)
        assert np.all(ds.timestep(0) == 0.0)

    def test_gaussian_max_at_center_voxel(self):
        ds = synthesize("gaussian-blob", (8, 8, 8), 1)
        idx = np.unravel_index(np.argmax(ds.timestep(0)), (8, 8, 8))
        assert idx == (4, 4, 4)  # (z, y, x) of the center voxel

    def test_moving_blob_fixed_offset(self):
        dims, steps = (16, 16, 16), 3
        ds = synthesize("moving-blob", dims, steps)
        offset = moving_blob_offset(dims[0], steps)
        centers = [np.unravel_index(np.argmax(ds.timestep(t)), ds.timestep(t).shape) for t in range(steps)]
        xs = [c[2] for c in centers]
        assert [b - a for a, b in zip(xs, xs[1:])] == [offset, offset]
        assert all(c[0] == 8 and c[1] == 8 for c in centers)

    def test_deterministic(self):
        a = synthesize("moving-blob", (8, 8, 8), 2)
        b = synthesize("moving-blob", (8, 8, 8), 2)
        for t in range(2):
            assert np.array_equal(a.timestep(t), b.timestep(t))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            synthesize("perlin", (8, 8, 8), 1)


class TestClassify:
    def test_midpoint(self):
        tf = default_transfer_function()
        assert np.allclose(classify(tf, 0.5), [0.5, 0.5, 0.5, 0.5])

    def test_clamps_below_range(self):
        tf = default_transfer_function()
        assert np.allclose(classify(tf, -1.0), [0, 0, 0, 0])
        assert np.allclose(classify(tf, 2.0), [1, 1, 1, 1])

    def test_exact_breakpoint(self):
        tf = TransferFunction.from_breakpoints(
            [(0.0, (0, 0, 0, 0)), (0.25, (0.8, 0.1, 0.2, 0.6)), (1.0, (1, 1, 1, 1))]
        )
        assert np.allclose(classify(tf, 0.25), [0.8, 0.1, 0.2, 0.6])

    def test_monotone_alpha_for_monotone_breakpoints(self):
        tf = TransferFunction.from_breakpoints(
            [(0.0, (0, 0, 0, 0)), (0.3, (0.2, 0.2, 0.2, 0.4)), (1.0, (1, 1, 1, 1))]
        )
        xs = np.linspace(-0.5, 1.5, 101)
        alphas = classify(tf, xs)[..., 3]
        assert np.all(np.diff(alphas) >= -1e-12)

    def test_decreasing_breakpoints_rejected(self):
        with pytest.raises(ValueError):
            TransferFunction((0.5, 0.5), ((0, 0, 0, 0), (1, 1, 1, 1)))


class TestDescriptor:
    def test_round_trip(self):
        from corridor.volume import VolumeMeta

        meta = VolumeMeta(dims=(64, 32, 16), timesteps=7, vmin=-1.5, vmax=3.25)
        parsed, pattern = parse_descriptor(descriptor_text(meta, "f_{t:04d}.f32"))
        assert parsed.dims == meta.dims
        assert parsed.timesteps == meta.timesteps
        assert parsed.vmin == meta.vmin and parsed.vmax == meta.vmax
        assert pattern == "f_{t:04d}.f32"

    def test_missing_keys(self):
        with pytest.raises(ValueError):
            parse_descriptor("nx=4\nny=4\n")

    def test_timestep_file_round_trip(self, tmp_path):
        ds = synthesize("gaussian-blob", (6, 5, 4), 1)
        path = tmp_path / "t0.f32"
        write_timestep(path, ds.timestep(0))
        back = read_timestep(path, (6, 5, 4))
        assert np.array_equal(back, ds.timestep(0))
        assert path.stat().st_size == 6 * 5 * 4 * 4


class TestSlabRuns:
    @pytest.mark.parametrize("axis,parts", [(Axis.X, 3), (Axis.Y, 2), (Axis.Z, 4)])
    def test_runs_reassemble_to_slice(self, axis, parts):
        dims = (6, 5, 8)
        ds = synthesize("moving-blob", dims, 1)
        frame = ds.timestep(0)
        raw = frame.tobytes()
        for assignment in decompose(dims, axis, parts):
            runs = slab_byte_runs(dims, assignment)
            chunks = [raw[off : off + ln] for off, ln in runs]
            rebuilt = slab_from_run_bytes(dims, assignment, chunks)
            assert np.array_equal(rebuilt, slice_slab(frame, assignment))

    def test_x_axis_run_count(self):
        dims = (8, 4, 3)
        runs = slab_byte_runs(dims, SlabAssignment(Axis.X, 0, 2, 5))
        assert len(runs) == 4 * 3  # one per (y, z) row
        assert all(ln == 3 * 4 for _off, ln in runs)

    def test_z_axis_single_run(self):
        runs = slab_byte_runs((8, 4, 6), SlabAssignment(Axis.Z, 0, 1, 4))
        assert runs == [(1 * 4 * 8 * 4, 3 * 4 * 8 * 4)]
