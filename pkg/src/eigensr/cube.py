"""Hyperspectral cube container and file I/O.

A cube holds ``bands x height x width`` real values in band-major order, so
``matrix_view`` is the ``L x N`` matrix with one row per band.  Values are
kept in float64 in memory and stored as little-endian float32 on disk.

Two on-disk formats are understood:

* ``.hsc``: 8-byte magic, 4-byte little-endian header length, UTF-8 JSON
  header, raw ``<f4`` payload.  This is the write format.
* NPY v1.0 with a 3-D ``<f4`` C-ordered array (read, and written by
  :func:`write_npy` for conversion).
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HSC_MAGIC = b"HSC\x00v1\x00\x00"
DTYPE_TAG = "f32le"
LAYOUT_TAG = "band-major"
NPY_MAGIC = b"\x93NUMPY"


class CubeFormatError(ValueError):
    """Raised for unreadable, truncated or unsupported cube files."""


@dataclass(frozen=True)
class CubeHeader:
    bands: int
    height: int
    width: int
    dtype: str = DTYPE_TAG
    layout: str = LAYOUT_TAG

    def __post_init__(self):
        if self.dtype != DTYPE_TAG:
            raise CubeFormatError(f"unsupported dtype tag {self.dtype!r}")
        if self.layout != LAYOUT_TAG:
            raise CubeFormatError(f"unsupported layout tag {self.layout!r}")
        for name in ("bands", "height", "width"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise CubeFormatError(f"header field {name} must be a positive integer, got {value!r}")

    @property
    def size(self) -> int:
        return self.bands * self.height * self.width

    def to_bytes(self) -> bytes:
        return json.dumps(
            {
                "bands": self.bands,
                "height": self.height,
                "width": self.width,
                "dtype": self.dtype,
                "layout": self.layout,
            },
            separators=(",", ":"),
        ).encode("utf-8")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CubeHeader":
        try:
            fields = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CubeFormatError(f"malformed header: {exc}") from None
        if not isinstance(fields, dict):
            raise CubeFormatError("malformed header: expected a JSON object")
        expected = {"bands", "height", "width", "dtype", "layout"}
        if set(fields) != expected:
            raise CubeFormatError(f"malformed header: expected keys {sorted(expected)}, got {sorted(fields)}")
        return cls(**fields)


def _first_nonfinite(data: np.ndarray):
    if np.isfinite(data).all():
        return None
    return tuple(int(i) for i in np.argwhere(~np.isfinite(data))[0])


class HsiCube:
    """Immutable ``(bands, height, width)`` hyperspectral cube.

    The array is copied to float64 on construction and marked read-only.
    With ``copy=False`` a float64 C-ordered input is adopted as is (and
    frozen), which saves a copy for freshly computed results.
    """

    __slots__ = ("_data",)

    def __init__(self, data, copy: bool = True):
        # copy=False adopts a float64 C-ordered array the caller owns
        arr = np.array(data, dtype=np.float64, order="C", copy=True if copy else None)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-D (bands, height, width) array, got shape {arr.shape}")
        if 0 in arr.shape:
            raise ValueError(f"cube dimensions must be >= 1, got shape {arr.shape}")
        bad = _first_nonfinite(arr)
        if bad is not None:
            band, row, col = bad
            raise ValueError(
                f"non-finite value at band {band}, pixel {row * arr.shape[2] + col} (row {row}, col {col})"
            )
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def bands(self) -> int:
        return self._data.shape[0]

    @property
    def height(self) -> int:
        return self._data.shape[1]

    @property
    def width(self) -> int:
        return self._data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    @property
    def pixels(self) -> int:
        return self.height * self.width

    @property
    def header(self) -> CubeHeader:
        return CubeHeader(self.bands, self.height, self.width)

    def __repr__(self):
        return f"HsiCube(bands={self.bands}, height={self.height}, width={self.width})"

    def __eq__(self, other):
        if not isinstance(other, HsiCube):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    __hash__ = None


def cube_from_matrix(Y, height: int, width: int, copy: bool = True) -> HsiCube:
    """Build a cube from an ``L x N`` band-major matrix with ``N = height * width``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError(f"expected a 2-D (bands, pixels) matrix, got shape {Y.shape}")
    if Y.shape[1] != height * width:
        raise ValueError(f"matrix has {Y.shape[1]} pixels but height*width = {height}*{width} = {height * width}")
    return HsiCube(Y.reshape(Y.shape[0], height, width), copy=copy)


def matrix_view(cube: HsiCube) -> np.ndarray:
    """Read-only ``L x N`` view of the cube data (no copy)."""
    return cube.data.reshape(cube.bands, cube.pixels)


def write_cube(cube: HsiCube, path) -> None:
    """Write ``cube`` as ``.hsc``; values are rounded to float32."""
    header = cube.header.to_bytes()
    payload = cube.data.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(HSC_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def _read_hsc(raw: bytes) -> HsiCube:
    if len(raw) < len(HSC_MAGIC) + 4:
        raise CubeFormatError("truncated .hsc file: missing header length")
    (hlen,) = struct.unpack_from("<I", raw, len(HSC_MAGIC))
    start = len(HSC_MAGIC) + 4
    if len(raw) < start + hlen:
        raise CubeFormatError("truncated .hsc file: header shorter than declared")
    header = CubeHeader.from_bytes(raw[start : start + hlen])
    payload = raw[start + hlen :]
    expected = header.size * 4
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "oversized"
        raise CubeFormatError(f"{kind} payload: expected {expected} bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").reshape(header.bands, header.height, header.width)
    return HsiCube(data)


def _read_npy(raw: bytes) -> HsiCube:
    # NPY v1.0: magic, major, minor, <u2 header length, ASCII dict literal
    if len(raw) < 10:
        raise CubeFormatError("truncated NPY file")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise CubeFormatError(f"unsupported NPY version {major}.{minor}; only 1.0 is read")
    (hlen,) = struct.unpack_from("<H", raw, 8)
    if len(raw) < 10 + hlen:
        raise CubeFormatError("truncated NPY header")
    try:
        # literal_eval only accepts Python literals, never arbitrary code
        header = ast.literal_eval(raw[10 : 10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise CubeFormatError(f"malformed NPY header: {exc}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise CubeFormatError("malformed NPY header dictionary")
    if header["descr"] != "<f4":
        raise CubeFormatError(f"unsupported dtype {header['descr']!r}; expected little-endian float32 '<f4'")
    if header["fortran_order"]:
        raise CubeFormatError("unsupported Fortran-ordered NPY array; expected C order")
    shape = tuple(header["shape"])
    if len(shape) != 3:
        raise CubeFormatError(f"expected 3-D array (bands, height, width), got {len(shape)}-D shape {shape}")
    payload = raw[10 + hlen :]
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise CubeFormatError(f"truncated payload: expected {expected} bytes, found {len(payload)}")
    return HsiCube(np.frombuffer(payload, dtype="<f4").reshape(shape))


def read_cube(path) -> HsiCube:
    """Read a ``.hsc`` or NPY v1.0 file; the format is detected from the magic bytes."""
    raw = Path(path).read_bytes()
    if raw.startswith(HSC_MAGIC):
        return _read_hsc(raw)
    if raw.startswith(NPY_MAGIC):
        return _read_npy(raw)
    raise CubeFormatError(f"unrecognized format: {path}")


def write_npy(cube: HsiCube, path) -> None:
    """Write ``cube`` as an NPY v1.0 ``<f4`` array of shape (bands, height, width)."""
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, cube.data.astype("<f4"), version=(1, 0), allow_pickle=False)
