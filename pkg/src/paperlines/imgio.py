"""Reading and writing of PNG, JPEG and PGM/PPM images.

Intensities are normalized to [0, 1] on load by dividing by the maximum
representable value of the source bit depth. Physical scale is never stored
in image headers; it travels in report JSON.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnsupportedFormat
from .image import GrayImage, RgbImage

_PNM_MAGIC = re.compile(rb"^P[2356]\s")


def _read_pnm(raw: bytes) -> np.ndarray:
    """Parse P2/P3 (ascii) and P5/P6 (binary) netpbm data, normalized."""
    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(raw, pos)
        if m is None:
            raise UnsupportedFormat("truncated PNM header")
        pos = m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    magic = tokens[0]
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval <= 0 or maxval > 65535:
        raise UnsupportedFormat(f"unsupported PNM maxval {maxval}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        body = raw[pos + 1 : ]  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        values = np.frombuffer(body, dtype=dtype, count=count).astype(np.float64)
    else:
        values = np.array(raw[pos:].split()[:count], dtype=np.float64)
    if values.size != count:
        raise UnsupportedFormat("PNM payload shorter than header promises")
    values /= maxval
    if channels == 1:
        return values.reshape(height, width)
    return values.reshape(height, width, 3)


def read_image(path: str | Path) -> GrayImage | RgbImage:
    """Load PNG, JPEG or PGM/PPM; returns GrayImage or RgbImage."""
    raw = Path(path).read_bytes()
    if _PNM_MAGIC.match(raw):
        arr = _read_pnm(raw)
        return GrayImage(arr) if arr.ndim == 2 else RgbImage(arr)
    try:
        with Image.open(Path(path)) as im:
            if im.format not in ("PNG", "JPEG"):
                raise UnsupportedFormat(f"unsupported image format {im.format!r}")
            return _from_pil(im)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"cannot decode {path}") from exc


def decode_image(raw: bytes) -> GrayImage | RgbImage:
    """Decode in-memory image bytes (used by the upload endpoint)."""
    import io

    if _PNM_MAGIC.match(raw):
        arr = _read_pnm(raw)
        return GrayImage(arr) if arr.ndim == 2 else RgbImage(arr)
    try:
        with Image.open(io.BytesIO(raw)) as im:
            if im.format not in ("PNG", "JPEG"):
                raise UnsupportedFormat(f"unsupported image format {im.format!r}")
            return _from_pil(im)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat("cannot decode image bytes") from exc


def _from_pil(im: Image.Image) -> GrayImage | RgbImage:
    if im.mode in ("I", "I;16", "I;16B"):
        arr = np.asarray(im, dtype=np.float64) / 65535.0
        return GrayImage(np.clip(arr, 0.0, 1.0))
    if im.mode == "L":
        return GrayImage(np.asarray(im, dtype=np.float64) / 255.0)
    if im.mode in ("RGB", "RGBA", "P", "LA"):
        rgb = im.convert("RGB")
        return RgbImage(np.asarray(rgb, dtype=np.float64) / 255.0)
    raise UnsupportedFormat(f"unsupported pixel mode {im.mode!r}")


def write_pgm(img: GrayImage, path: str | Path, maxval: int = 255) -> None:
    """Write binary PGM (P5). maxval 255 or 65535."""
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    quant = np.round(img.data * maxval)
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode()
    if maxval == 255:
        body = quant.astype(np.uint8).tobytes()
    else:
        body = quant.astype(">u2").tobytes()
    Path(path).write_bytes(header + body)


def write_png(img: GrayImage | RgbImage, path: str | Path, bit_depth: int = 8) -> None:
    """Write PNG; grayscale supports 8 or 16 bit, colour is 8 bit."""
    if isinstance(img, RgbImage):
        arr = np.round(img.data * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")
        return
    if bit_depth == 16:
        arr = np.round(img.data * 65535.0).astype(np.uint16)
        Image.fromarray(arr).save(Path(path), format="PNG")
    elif bit_depth == 8:
        arr = np.round(img.data * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(Path(path), format="PNG")
    else:
        raise ValueError("bit_depth must be 8 or 16")


def write_field_png(field: np.ndarray, path: str | Path) -> tuple[float, float]:
    """Write an arbitrary real field as a normalized 16-bit PNG.

    Returns the (vmin, vmax) used so the caller can record the mapping.
    """
    field = np.asarray(field, dtype=np.float64)
    vmin, vmax = float(field.min()), float(field.max())
    span = vmax - vmin
    norm = np.zeros_like(field) if span == 0 else (field - vmin) / span
    write_png(GrayImage(norm), path, bit_depth=16)
    return vmin, vmax
