"""GridFile export, written against the renderer's documented format.

Little-endian: magic "ABGF", u32 version (1), u32 gw/gh/gd, u32 rows
(3), u32 cols (4), u8 guidance tag (0 = fixed Rec.601 luma), then
gh*gw*gd*12 float32 coefficients in C order of a (gh, gw, gd, 3, 4)
array. This trainer always exports tag 0; the learned-curve tag (1)
exists in the format but the network here does not learn a curve.

Deliberately independent of the renderer package: the bytes are the
interface. The reader below exists for round-trip tests only.
"""

import struct

import numpy as np

MAGIC = b"ABGF"
VERSION = 1


def write(path, cells: np.ndarray) -> None:
    cells = np.asarray(cells)
    if cells.ndim != 5 or cells.shape[3:] != (3, 4):
        raise ValueError(f"cells must be (gh, gw, gd, 3, 4), got {cells.shape}")
    gh, gw, gd = cells.shape[:3]
    payload = np.ascontiguousarray(cells, np.float32)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<6I", VERSION, gw, gh, gd, 3, 4))
        f.write(b"\x00")
        f.write(payload.tobytes())


def read(path):
    """Round-trip check helper. Returns (gh, gw, gd, 3, 4) float32."""
    data = open(path, "rb").read()
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    version, gw, gh, gd, rows, cols = struct.unpack_from("<6I", data, 4)
    if version != VERSION or (rows, cols) != (3, 4):
        raise ValueError("unsupported header")
    if data[28] != 0:
        raise ValueError("trainer only reads fixed-guidance grids")
    n = gh * gw * gd * 12
    cells = np.frombuffer(data, np.float32, count=n, offset=29)
    return cells.reshape(gh, gw, gd, 3, 4).copy()
