import numpy as np
import pytest

from poemscene.geometry import ImageBuffer
from poemscene.imageio import (
    decode_png_bytes,
    encode_png_bytes,
    load_color_png,
    load_depth_png,
    save_color_png,
    save_depth_png,
)


def rand_color(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return ImageBuffer(rng.uniform(0, 1, (h, w, 3)).astype(np.float32))


@pytest.mark.parametrize("bits", [8, 16])
def test_color_round_trip_lossless_at_bit_depth(tmp_path, bits):
    img = rand_color(17, 23)
    path = tmp_path / "img.png"
    save_color_png(img, path, bits=bits)
    back = load_color_png(path)
    maxv = (1 << bits) - 1
    q_orig = np.rint(img.data.astype(np.float64) * maxv)
    q_back = np.rint(back.data.astype(np.float64) * maxv)
    assert np.array_equal(q_orig, q_back)
    # a second save/load cycle is bit-stable
    save_color_png(back, tmp_path / "img2.png", bits=bits)
    assert (tmp_path / "img2.png").read_bytes() == path.read_bytes()


def test_depth_round_trip_with_scale(tmp_path):
    rng = np.random.default_rng(1)
    depth = ImageBuffer(rng.uniform(0, 37.5, (12, 18, 1)).astype(np.float32))
    path = tmp_path / "depth.png"
    save_depth_png(depth, path)
    assert (tmp_path / "depth.png.scale.json").exists()
    back = load_depth_png(path)
    assert np.abs(back.data - depth.data).max() < 37.5 / 65535 + 1e-6


def test_wire_png_bytes_round_trip():
    img = rand_color(9, 11, seed=4)
    blob = encode_png_bytes(img)
    back = decode_png_bytes(blob)
    assert np.array_equal(
        np.rint(img.data.astype(np.float64) * 255), np.rint(back.data.astype(np.float64) * 255)
    )


def test_png_bytes_deterministic():
    img = rand_color(16, 16, seed=7)
    assert encode_png_bytes(img) == encode_png_bytes(img)
