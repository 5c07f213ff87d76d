"""PNG image I/O for color and depth rasters.

Color images round-trip through 8- or 16-bit PNG; depth maps are stored as
16-bit grayscale PNG together with a JSON sidecar recording the linear
scale, so `value_world = png_value / 65535 * scale`.  Both directions are
lossless at the stored bit depth: quantize(load(save(x))) == quantize(x).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import ImageBuffer, PanoImage

__all__ = [
    "save_color_png",
    "load_color_png",
    "save_depth_png",
    "load_depth_png",
    "save_pano",
    "load_pano",
    "encode_png_bytes",
    "decode_png_bytes",
]


def _quantize(data: np.ndarray, bits: int) -> np.ndarray:
    maxv = (1 << bits) - 1
    # quantization is defined in float64 so callers can reproduce it exactly
    q = np.rint(np.clip(data.astype(np.float64), 0.0, 1.0) * maxv)
    return q.astype(np.uint8 if bits == 8 else np.uint16)


def save_color_png(img: ImageBuffer, path, bits: int = 8) -> None:
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    if img.channels != 3:
        raise ValueError("color PNG requires a 3-channel buffer")
    arr = _quantize(img.data, bits)
    if bits == 8:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    else:
        # Pillow has no native 16-bit RGB; write the PNG stream directly
        import struct
        import zlib

        h, w = arr.shape[:2]
        raw = bytearray()
        be = arr.astype(">u2").tobytes()
        stride = w * 3 * 2
        for row in range(h):
            raw.append(0)
            raw += be[row * stride : (row + 1) * stride]

        def chunk(tag: bytes, payload: bytes) -> bytes:
            return (
                len(payload).to_bytes(4, "big")
                + tag
                + payload
                + zlib.crc32(tag + payload).to_bytes(4, "big")
            )

        ihdr = struct.pack(">IIBBBBB", w, h, 16, 2, 0, 0, 0)
        png = (
            b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(bytes(raw), 9))
            + chunk(b"IEND", b"")
        )
        Path(path).write_bytes(png)


def _png_header(path) -> tuple:
    head = Path(path).open("rb").read(33)
    if head[:8] != b"\x89PNG\r\n\x1a\n":
        return (0, 0)
    return head[24], head[25]  # bit depth, color type


def load_color_png(path) -> ImageBuffer:
    bits, ctype = _png_header(path)
    if bits == 16 and ctype == 2:
        return load_color_png16(path)
    with Image.open(path) as im:
        im.load()
        if im.mode == "RGB":
            arr = np.asarray(im, dtype=np.float32) / 255.0
        elif im.mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float32) / 65535.0
            arr = np.stack([arr] * 3, axis=-1)
        elif im.mode == "RGBA":
            arr = np.asarray(im, dtype=np.float32)[:, :, :3] / 255.0
        else:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim == 3 and arr.shape[2] == 6:  # 16-bit RGB loaded as raw plugin
        arr = arr[:, :, :3]
    return ImageBuffer(arr)


def _load_png16_rgb(path) -> np.ndarray:
    """Minimal 16-bit RGB PNG reader for files written by save_color_png."""
    import struct
    import zlib

    data = Path(path).read_bytes()
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ValueError("not a PNG file")
    pos = 8
    idat = b""
    w = h = bits = ctype = None
    while pos < len(data):
        ln = int.from_bytes(data[pos : pos + 4], "big")
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + ln]
        pos += 12 + ln
        if tag == b"IHDR":
            w, h, bits, ctype = struct.unpack(">IIBB", payload[:10])
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if bits != 16 or ctype != 2:
        raise ValueError("expected 16-bit RGB PNG")
    raw = zlib.decompress(idat)
    stride = w * 6
    rows = []
    prev = np.zeros(stride, dtype=np.uint8)
    for r in range(h):
        ftype = raw[r * (stride + 1)]
        row = np.frombuffer(raw[r * (stride + 1) + 1 : (r + 1) * (stride + 1)], dtype=np.uint8)
        if ftype == 0:
            rec = row
        elif ftype == 2:  # Up filter
            rec = (row.astype(np.int32) + prev).astype(np.uint8)
        else:
            raise ValueError(f"unsupported PNG filter {ftype}")
        rows.append(rec)
        prev = rec
    arr = np.concatenate(rows).reshape(h, w, 3, 2)
    vals = arr[..., 0].astype(np.uint16) << 8 | arr[..., 1].astype(np.uint16)
    return vals


def load_color_png16(path) -> ImageBuffer:
    vals = _load_png16_rgb(path)
    return ImageBuffer((vals.astype(np.float32) / 65535.0))


def save_depth_png(img: ImageBuffer, path) -> None:
    """16-bit grayscale PNG plus `<path>.scale.json` recording the range."""
    if img.channels != 1:
        raise ValueError("depth PNG requires a single-channel buffer")
    data = img.data[:, :, 0].astype(np.float64)
    scale = float(data.max())
    if scale <= 0:
        scale = 1.0
    q = np.rint(data / scale * 65535.0).astype(np.uint16)
    Image.fromarray(q, mode="I;16").save(path, format="PNG")
    Path(str(path) + ".scale.json").write_text(json.dumps({"scale": scale}) + "\n")


def load_depth_png(path) -> ImageBuffer:
    sidecar = Path(str(path) + ".scale.json")
    scale = 1.0
    if sidecar.exists():
        scale = float(json.loads(sidecar.read_text())["scale"])
    with Image.open(path) as im:
        im.load()
        arr = np.asarray(im, dtype=np.float64)
    return ImageBuffer((arr / 65535.0 * scale).astype(np.float32)[:, :, None])


def save_pano(pano: PanoImage, path, bits: int = 8) -> None:
    if pano.buffer.channels == 1:
        save_depth_png(pano.buffer, path)
    else:
        save_color_png(pano.buffer, path, bits=bits)


def load_pano(path, depth: bool = False) -> PanoImage:
    buf = load_depth_png(path) if depth else load_color_png(path)
    return PanoImage(buf)


def encode_png_bytes(img: ImageBuffer) -> bytes:
    """8-bit PNG bytes for wire transfer (color or grayscale)."""
    import io

    arr = _quantize(img.data, 8)
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    out = io.BytesIO()
    pil.save(out, format="PNG")
    return out.getvalue()


def decode_png_bytes(blob: bytes) -> ImageBuffer:
    import io

    with Image.open(io.BytesIO(blob)) as im:
        im.load()
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float32)[:, :, None] / 255.0
        elif im.mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float32)[:, :, None] / 65535.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return ImageBuffer(arr)


def encode_depth_png_bytes(img: ImageBuffer) -> tuple:
    """(16-bit grayscale PNG bytes, scale) for wire transfer of depth."""
    import io

    if img.channels != 1:
        raise ValueError("depth encoding requires a single-channel buffer")
    data = img.data[:, :, 0].astype(np.float64)
    scale = float(data.max())
    if scale <= 0:
        scale = 1.0
    q = np.rint(data / scale * 65535.0).astype(np.uint16)
    out = io.BytesIO()
    Image.fromarray(q, mode="I;16").save(out, format="PNG")
    return out.getvalue(), scale


def decode_depth_png_bytes(blob: bytes, scale: float) -> ImageBuffer:
    import io

    with Image.open(io.BytesIO(blob)) as im:
        im.load()
        arr = np.asarray(im, dtype=np.float64)
    return ImageBuffer((arr / 65535.0 * scale).astype(np.float32)[:, :, None])
