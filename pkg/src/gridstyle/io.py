"""Serialization and image I/O.

Two little-endian binary formats:

GridFile ("ABGF"): version u32, gw/gh/gd u32, rows u32 (=3), cols u32
(=4), guidance tag u8 (0 fixed luma, 1 LUT: K u32 followed by K f32
knots), then gh*gw*gd*12 f32 coefficients ordered y-major, then x, then
z, each cell a row-major 3x4. That ordering is exactly the C layout of
a (gh, gw, gd, 3, 4) array, so reads and writes are single memoryview
copies and round-trips are bit-exact.

FMAP ("FMAP"): version u32, layer count u32, per layer a u32 name
length + UTF-8 name, H/W/C u32 and H*W*C f32 row-major (y, x, c).

Malformed files raise FileFormatError with the byte offset where
parsing stopped making sense.

Images are PNG, 8- or 16-bit, decoded to float64 in [0, 1]. Export
quantizes round-to-nearest; values outside [0, 1] are clipped at
quantization (the --clamp CLI flag clamps the float image itself).
"""

import os
import struct

import cv2
import numpy as np

from .grid import AffineBilateralGrid, FixedLuma, GridError, PiecewiseLinearLUT

GRID_MAGIC = b"ABGF"
FMAP_MAGIC = b"FMAP"
GRID_VERSION = 1
FMAP_VERSION = 1


class FileFormatError(ValueError):
    pass


class ImageIOError(ValueError):
    pass


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.off = 0
        self.what = what

    def fail(self, msg):
        raise FileFormatError(f"{self.what} corrupt at byte {self.off}: {msg}")

    def take(self, n, why):
        if self.off + n > len(self.data):
            self.fail(f"truncated while reading {why} "
                      f"({n} bytes needed, {len(self.data) - self.off} left)")
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def u32(self, why):
        return struct.unpack("<I", self.take(4, why))[0]

    def u8(self, why):
        return self.take(1, why)[0]


def write_grid_file(path, grid: AffineBilateralGrid, curve=None) -> None:
    if curve is None:
        curve = FixedLuma()
    cells = np.ascontiguousarray(grid.cells, np.float32)
    parts = [GRID_MAGIC,
             struct.pack("<6I", GRID_VERSION, grid.gw, grid.gh, grid.gd, 3, 4)]
    if isinstance(curve, FixedLuma):
        parts.append(b"\x00")
    elif isinstance(curve, PiecewiseLinearLUT):
        knots = np.ascontiguousarray(curve.knots, np.float32)
        parts.append(b"\x01")
        parts.append(struct.pack("<I", knots.shape[0]))
        parts.append(knots.tobytes())
    else:
        raise GridError(f"unknown guidance curve {type(curve).__name__}")
    parts.append(cells.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def read_grid_file(path):
    """Returns (grid, curve); cells are float32 exactly as stored."""
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data, "grid file")
    magic = r.take(4, "magic")
    if magic != GRID_MAGIC:
        r.off = 0
        r.fail(f"bad magic {magic!r}, expected {GRID_MAGIC!r}")
    version = r.u32("version")
    if version != GRID_VERSION:
        r.off -= 4
        r.fail(f"unsupported version {version}")
    gw = r.u32("gw")
    gh = r.u32("gh")
    gd = r.u32("gd")
    if min(gw, gh, gd) < 1:
        r.off -= 12
        r.fail(f"nonpositive grid dims {gw}x{gh}x{gd}")
    rows = r.u32("rows")
    cols = r.u32("cols")
    if (rows, cols) != (3, 4):
        r.off -= 8
        r.fail(f"unsupported cell shape {rows}x{cols}")
    tag = r.u8("guidance tag")
    if tag == 0:
        curve = FixedLuma()
    elif tag == 1:
        k = r.u32("knot count")
        if k < 2:
            r.off -= 4
            r.fail(f"LUT needs >= 2 knots, got {k}")
        knots = np.frombuffer(r.take(4 * k, "LUT knots"), "<f4")
        curve = PiecewiseLinearLUT(knots)
    else:
        r.off -= 1
        r.fail(f"unknown guidance tag {tag}")
    n = gh * gw * gd * 12
    payload = r.take(4 * n, "coefficients")
    if r.off != len(data):
        r.fail(f"{len(data) - r.off} trailing bytes")
    cells = np.frombuffer(payload, "<f4").reshape(gh, gw, gd, 3, 4)
    try:
        return AffineBilateralGrid(cells.copy()), curve
    except GridError as e:
        raise FileFormatError(f"grid file invalid: {e}") from e


def write_fmap(path, layers) -> None:
    """layers: list of (name, array (H, W, C)) pairs."""
    parts = [FMAP_MAGIC, struct.pack("<II", FMAP_VERSION, len(layers))]
    for name, arr in layers:
        arr = np.ascontiguousarray(arr, np.float32)
        if arr.ndim != 3:
            raise FileFormatError(f"layer {name!r} must be (H, W, C)")
        raw = name.encode("utf-8")
        h, w, c = arr.shape
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<III", h, w, c))
        parts.append(arr.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def read_fmap(path):
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data, "feature file")
    magic = r.take(4, "magic")
    if magic != FMAP_MAGIC:
        r.off = 0
        r.fail(f"bad magic {magic!r}, expected {FMAP_MAGIC!r}")
    version = r.u32("version")
    if version != FMAP_VERSION:
        r.off -= 4
        r.fail(f"unsupported version {version}")
    count = r.u32("layer count")
    layers = []
    for _ in range(count):
        nlen = r.u32("name length")
        try:
            name = r.take(nlen, "layer name").decode("utf-8")
        except UnicodeDecodeError:
            r.off -= nlen
            r.fail("layer name is not valid UTF-8")
        h = r.u32("layer height")
        w = r.u32("layer width")
        c = r.u32("layer channels")
        if min(h, w, c) < 1:
            r.off -= 12
            r.fail(f"bad layer dims {h}x{w}x{c}")
        arr = np.frombuffer(r.take(4 * h * w * c, f"layer {name!r} data"),
                            "<f4").reshape(h, w, c)
        layers.append((name, arr.copy()))
    if r.off != len(data):
        r.fail(f"{len(data) - r.off} trailing bytes")
    return layers


def load_image(path):
    """Returns (float64 (H, W, 3) in [0, 1], source bit depth 8 or 16).
    Grayscale is replicated to 3 channels; alpha is dropped."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read image {path}")
    if raw.dtype == np.uint8:
        depth, scale = 8, 255.0
    elif raw.dtype == np.uint16:
        depth, scale = 16, 65535.0
    else:
        raise ImageIOError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    elif raw.shape[2] == 4:
        raw = raw[:, :, :3]
    elif raw.shape[2] != 3:
        raise ImageIOError(f"unsupported channel count {raw.shape[2]} in {path}")
    img = raw[:, :, ::-1].astype(np.float64) / scale
    return img, depth


def save_image(path, img, clamp=False, depth=8) -> None:
    img = np.asarray(img, np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageIOError("image must be (H, W, 3)")
    if clamp:
        img = np.clip(img, 0.0, 1.0)
    scale = 255.0 if depth == 8 else 65535.0
    dtype = np.uint8 if depth == 8 else np.uint16
    q = np.clip(np.rint(img * scale), 0, scale).astype(dtype)
    if not cv2.imwrite(os.fspath(path), q[:, :, ::-1]):
        raise ImageIOError(f"cannot write image {path}")


def downsample_to_edge(img, edge: int):
    """Area-average so the long edge becomes `edge` (aspect preserved,
    never upsampled)."""
    h, w = img.shape[:2]
    long_side = max(h, w)
    if long_side <= edge:
        return img.copy()
    s = edge / long_side
    nw = max(1, round(w * s))
    nh = max(1, round(h * s))
    return cv2.resize(img, (nw, nh), interpolation=cv2.INTER_AREA)
