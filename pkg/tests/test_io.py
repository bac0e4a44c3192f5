import struct

import numpy as np
import pytest

import gridstyle as gs
from helpers import synth_photo


def random_grid(rng, gw=5, gh=4, gd=3):
    cells = (rng.standard_normal((gh, gw, gd, 3, 4)) * 0.3).astype(np.float32)
    return gs.AffineBilateralGrid(cells)


class TestGridFileRoundTrip:
    def test_fixed_guidance_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        grid = random_grid(rng)
        path = tmp_path / "g.abgf"
        gs.write_grid_file(path, grid, gs.FixedLuma())
        loaded, curve = gs.read_grid_file(path)
        assert isinstance(curve, gs.FixedLuma)
        assert loaded.cells.dtype == np.float32
        assert np.array_equal(loaded.cells, grid.cells)

    def test_lut_guidance_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        grid = random_grid(rng)
        knots = np.array([0.0, 0.2, 0.55, 1.0], dtype=np.float32)
        path = tmp_path / "g.abgf"
        gs.write_grid_file(path, grid, gs.PiecewiseLinearLUT(knots))
        loaded, curve = gs.read_grid_file(path)
        assert isinstance(curve, gs.PiecewiseLinearLUT)
        assert np.array_equal(
            np.asarray(curve.knots, dtype=np.float32), knots)
        assert np.array_equal(loaded.cells, grid.cells)

    def test_float64_grid_quantizes_once(self, tmp_path):
        # writing a float64 grid stores float32; a second round trip
        # changes nothing
        rng = np.random.default_rng(2)
        cells = rng.standard_normal((2, 2, 2, 3, 4))
        grid = gs.AffineBilateralGrid(cells)
        p1, p2 = tmp_path / "a.abgf", tmp_path / "b.abgf"
        gs.write_grid_file(p1, grid, gs.FixedLuma())
        once, _ = gs.read_grid_file(p1)
        gs.write_grid_file(p2, once, gs.FixedLuma())
        twice, _ = gs.read_grid_file(p2)
        assert np.array_equal(once.cells, twice.cells)

    def test_sliced_output_identical_after_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        grid = random_grid(rng)
        img = synth_photo(24, 31, seed=3)
        path = tmp_path / "g.abgf"
        gs.write_grid_file(path, grid, gs.FixedLuma())
        loaded, curve = gs.read_grid_file(path)
        a = gs.slice_apply(grid, img)
        b = gs.slice_apply(loaded, img, curve)
        assert np.array_equal(a, b)


def valid_grid_bytes(gw=3, gh=2, gd=4):
    # built by hand from the documented layout, independent of the writer
    header = b"ABGF" + struct.pack("<6I", 1, gw, gh, gd, 3, 4) + b"\x00"
    payload = np.zeros(gh * gw * gd * 12, np.float32).tobytes()
    return bytearray(header + payload)


def test_writer_emits_documented_layout(tmp_path):
    grid = gs.AffineBilateralGrid(np.zeros((2, 3, 4, 3, 4), np.float32))
    path = tmp_path / "g.abgf"
    gs.write_grid_file(path, grid, gs.FixedLuma())
    assert path.read_bytes() == bytes(valid_grid_bytes())


class TestGridFileErrors:
    def corrupt(self, data, tmp_path):
        path = tmp_path / "bad.abgf"
        path.write_bytes(bytes(data))
        return path

    def test_bad_magic(self, tmp_path):
        data = valid_grid_bytes()
        data[0:4] = b"NOPE"
        with pytest.raises(gs.FileFormatError, match=r"byte 0"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_bad_version(self, tmp_path):
        data = valid_grid_bytes()
        struct.pack_into("<I", data, 4, 99)
        with pytest.raises(gs.FileFormatError, match=r"byte 4"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_zero_dimension(self, tmp_path):
        data = valid_grid_bytes()
        struct.pack_into("<I", data, 8, 0)  # gw
        with pytest.raises(gs.FileFormatError, match=r"byte \d+"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_wrong_matrix_shape(self, tmp_path):
        data = valid_grid_bytes()
        struct.pack_into("<I", data, 20, 5)  # rows field
        with pytest.raises(gs.FileFormatError, match=r"byte \d+"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_unknown_guidance_tag(self, tmp_path):
        data = valid_grid_bytes()
        data[28] = 7
        with pytest.raises(gs.FileFormatError, match=r"byte 28"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_truncated_payload(self, tmp_path):
        data = valid_grid_bytes()
        with pytest.raises(gs.FileFormatError, match=r"byte \d+"):
            gs.read_grid_file(self.corrupt(data[:-5], tmp_path))

    def test_trailing_bytes(self, tmp_path):
        data = valid_grid_bytes() + b"\x00\x00"
        with pytest.raises(gs.FileFormatError, match=r"byte \d+"):
            gs.read_grid_file(self.corrupt(data, tmp_path))

    def test_error_message_has_offset(self, tmp_path):
        data = valid_grid_bytes()
        data[0:4] = b"ZZZZ"
        try:
            gs.read_grid_file(self.corrupt(data, tmp_path))
        except gs.FileFormatError as e:
            assert "byte" in str(e)
        else:
            pytest.fail("corrupt file accepted")


class TestFeatureMapFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        layers = [
            ("shallow", rng.random((8, 8, 3)).astype(np.float32)),
            ("deep", rng.random((4, 4, 16)).astype(np.float32)),
        ]
        path = tmp_path / "f.fmap"
        gs.write_fmap(path, layers)
        loaded = gs.read_fmap(path)
        assert [n for n, _ in loaded] == [n for n, _ in layers]
        for (_, a), (_, b) in zip(layers, loaded):
            assert np.array_equal(a, b)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.fmap"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(gs.FileFormatError, match=r"byte 0"):
            gs.read_fmap(path)


class TestImages:
    def test_png_8bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        img8 = rng.integers(0, 256, (16, 20, 3), dtype=np.uint8)
        ref = img8.astype(np.float64) / 255.0
        path = tmp_path / "x.png"
        gs.save_image(path, ref, depth=8)
        loaded, depth = gs.load_image(path)
        assert depth == 8
        assert np.array_equal(loaded, ref)

    def test_png_16bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        img16 = rng.integers(0, 65536, (12, 9, 3), dtype=np.uint16)
        ref = img16.astype(np.float64) / 65535.0
        path = tmp_path / "x.png"
        gs.save_image(path, ref, depth=16)
        loaded, depth = gs.load_image(path)
        assert depth == 16
        assert np.array_equal(loaded, ref)

    def test_grayscale_loads_as_three_channels(self, tmp_path):
        import cv2
        gray = np.full((10, 10), 100, np.uint8)
        path = tmp_path / "g.png"
        cv2.imwrite(str(path), gray)
        loaded, depth = gs.load_image(path)
        assert loaded.shape == (10, 10, 3)
        assert np.all(loaded[..., 0] == loaded[..., 1])

    def test_save_clamps_when_asked(self, tmp_path):
        img = np.array([[[1.5, -0.25, 0.5]]])
        path = tmp_path / "c.png"
        gs.save_image(path, img, depth=8, clamp=True)
        loaded, _ = gs.load_image(path)
        assert loaded[0, 0, 0] == 1.0
        assert loaded[0, 0, 1] == 0.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(gs.ImageIOError):
            gs.load_image(tmp_path / "nothing.png")


class TestDownsample:
    def test_long_edge_and_aspect(self):
        img = synth_photo(300, 400, seed=7)
        small = gs.downsample_to_edge(img, 100)
        assert small.shape == (75, 100, 3)

    def test_portrait(self):
        img = synth_photo(400, 300, seed=7)
        small = gs.downsample_to_edge(img, 100)
        assert small.shape == (100, 75, 3)

    def test_never_upsamples(self):
        img = synth_photo(40, 60, seed=8)
        same = gs.downsample_to_edge(img, 256)
        assert same.shape == img.shape

    def test_area_average_on_uniform_blocks(self):
        # 2x downsample of a 2x2-blocked image recovers the block values
        blocks = np.random.default_rng(9).random((8, 8, 3))
        img = np.repeat(np.repeat(blocks, 2, axis=0), 2, axis=1)
        small = gs.downsample_to_edge(img, 8)
        assert np.abs(small - blocks).max() < 1e-7
