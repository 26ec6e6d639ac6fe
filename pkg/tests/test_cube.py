import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eigensr.cube import (
    HSC_MAGIC,
    CubeFormatError,
    CubeHeader,
    HsiCube,
    cube_from_matrix,
    matrix_view,
    read_cube,
    write_cube,
    write_npy,
)


def test_cube_from_matrix_layout():
    cube = cube_from_matrix([[1, 2], [3, 4]], 1, 2)
    assert cube.shape == (2, 1, 2)
    assert cube.data.ravel().tolist() == [1, 2, 3, 4]


def test_single_value_cube():
    cube = cube_from_matrix([[5.0]], 1, 1)
    assert (cube.bands, cube.height, cube.width) == (1, 1, 1)


def test_nan_reports_band_and_pixel():
    Y = np.zeros((3, 6))
    Y[2, 4] = np.nan
    with pytest.raises(ValueError, match=r"band 2, pixel 4"):
        cube_from_matrix(Y, 2, 3)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="pixels"):
        cube_from_matrix(np.zeros((2, 5)), 2, 3)


def test_matrix_view_round_trip_and_aliasing():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((4, 36))
    cube = cube_from_matrix(Y, 6, 6)
    V = matrix_view(cube)
    assert np.array_equal(V, Y)
    assert np.shares_memory(V, cube.data)
    # exhaustive index check against the flat band-major layout
    flat = cube.data.ravel()
    N = cube.pixels
    for l in range(cube.bands):
        for n in range(N):
            assert V[l, n] == flat[l * N + n]


def test_one_band_view_is_a_row():
    cube = HsiCube(np.arange(6.0).reshape(1, 2, 3))
    assert matrix_view(cube).shape == (1, 6)


def test_cube_is_immutable():
    cube = HsiCube(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        cube.data[0, 0, 0] = 1.0


def test_adopting_constructor_freezes_without_copy():
    arr = np.zeros((2, 2, 2))
    cube = HsiCube(arr, copy=False)
    assert np.shares_memory(arr, cube.data)
    assert not cube.data.flags.writeable


@settings(max_examples=25, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=32)))
def test_hsc_round_trip_is_bit_exact(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("rt") / "c.hsc"
    write_cube(HsiCube(data), path)
    back = read_cube(path)
    assert back.data.astype(np.float32).tobytes() == data.tobytes()


def test_hsc_layout_on_disk(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.random((3, 8, 8)).astype(np.float32)
    write_cube(HsiCube(data), tmp_path / "c.hsc")
    raw = (tmp_path / "c.hsc").read_bytes()
    assert raw[:8] == HSC_MAGIC
    (hlen,) = struct.unpack_from("<I", raw, 8)
    header = json.loads(raw[12 : 12 + hlen])
    assert header == {"bands": 3, "height": 8, "width": 8, "dtype": "f32le", "layout": "band-major"}
    assert raw[12 + hlen :] == data.astype("<f4").tobytes()


def test_npy_read(tmp_path):
    rng = np.random.default_rng(2)
    data = rng.random((3, 8, 8)).astype(np.float32)
    np.save(tmp_path / "c.npy", data)
    cube = read_cube(tmp_path / "c.npy")
    assert cube.shape == (3, 8, 8)
    assert np.array_equal(cube.data, data.astype(np.float64))


def test_npy_write_matches_numpy(tmp_path):
    cube = HsiCube(np.random.default_rng(3).random((2, 3, 4)).astype(np.float32))
    write_npy(cube, tmp_path / "c.npy")
    assert np.array_equal(np.load(tmp_path / "c.npy"), cube.data.astype(np.float32))


def test_npy_rejects_2d(tmp_path):
    np.save(tmp_path / "flat.npy", np.zeros((8, 8), np.float32))
    with pytest.raises(CubeFormatError, match="expected 3-D array"):
        read_cube(tmp_path / "flat.npy")


@pytest.mark.parametrize("arr, msg", [
    (np.zeros((2, 2, 2), np.float64), "dtype"),
    (np.asfortranarray(np.zeros((2, 2, 2), np.float32)), "Fortran"),
])
def test_npy_rejects_unsupported(tmp_path, arr, msg):
    np.save(tmp_path / "x.npy", arr)
    with pytest.raises(CubeFormatError, match=msg):
        read_cube(tmp_path / "x.npy")


def test_unrecognized_format(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"garbage bytes")
    with pytest.raises(CubeFormatError, match="unrecognized format"):
        read_cube(tmp_path / "x.bin")


def test_truncated_and_oversized_payload(tmp_path):
    write_cube(HsiCube(np.ones((2, 4, 4))), tmp_path / "c.hsc")
    raw = (tmp_path / "c.hsc").read_bytes()
    (tmp_path / "t.hsc").write_bytes(raw[:-4])
    (tmp_path / "o.hsc").write_bytes(raw + b"\0\0\0\0")
    with pytest.raises(CubeFormatError, match="truncated payload"):
        read_cube(tmp_path / "t.hsc")
    with pytest.raises(CubeFormatError, match="oversized payload"):
        read_cube(tmp_path / "o.hsc")


def test_header_round_trip_and_tag_validation():
    h = CubeHeader(3, 4, 5)
    assert CubeHeader.from_bytes(h.to_bytes()) == h
    with pytest.raises(CubeFormatError, match="dtype"):
        CubeHeader(3, 4, 5, dtype="f64le")
    with pytest.raises(CubeFormatError, match="layout"):
        CubeHeader(3, 4, 5, layout="pixel-major")
    with pytest.raises(CubeFormatError, match="keys"):
        CubeHeader.from_bytes(b'{"bands":1,"height":1,"width":1}')


def test_values_not_clamped():
    cube = HsiCube(np.array([[[-3.0, 7.5]]]))
    assert cube.data.min() == -3.0 and cube.data.max() == 7.5
