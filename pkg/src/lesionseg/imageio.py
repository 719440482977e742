"""File IO for images, masks and ROI descriptors.

Supported rasters: single-channel 8-bit and 16-bit PNG, and binary PGM (P5)
with maxval up to 65535. Intensities are rescaled to [0, 1] on load (8-bit
value v becomes v/255, 16-bit v/65535). Masks are 8-bit with 0 background
and 255 foreground; any nonzero input value counts as foreground.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError
from .model import BinaryMask, GrayImage, RegionOfInterest

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_pgm(data: bytes, path) -> tuple[np.ndarray, int]:
    # P5 header: magic, width, height, maxval as ASCII tokens, with optional
    # '#' comments, then a single whitespace byte before the raster.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(f"malformed PGM header in '{path}'")
        fields.append(int(token))
    pos += 1  # single whitespace separating header from raster
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions in '{path}'")
    if not 0 < maxval <= 65535:
        raise FormatError(f"unsupported PGM maxval {maxval} in '{path}'")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raster = data[pos : pos + width * height * dtype.itemsize]
    if len(raster) != width * height * dtype.itemsize:
        raise FormatError(f"truncated PGM raster in '{path}'")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.int64), maxval


def _read_png(path) -> tuple[np.ndarray, int]:
    with PILImage.open(path) as im:
        mode = im.mode
        if mode == "L":
            return np.asarray(im, dtype=np.int64), 255
        if mode in ("I;16", "I;16B", "I;16L"):
            return np.asarray(im, dtype=np.int64), 65535
        if mode == "I":
            arr = np.asarray(im, dtype=np.int64)
            if arr.min() < 0 or arr.max() > 65535:
                raise FormatError(f"unsupported bit depth in '{path}'")
            return arr, 65535
    raise FormatError(
        f"unsupported image mode '{mode}' in '{path}' "
        "(expected single-channel 8-bit or 16-bit grayscale)"
    )


def _load_raw(path) -> tuple[np.ndarray, int]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read image file '{path}': {exc}") from exc
    if data.startswith(b"P5"):
        return _read_pgm(data, path)
    if data.startswith(_PNG_MAGIC):
        try:
            return _read_png(path)
        except FormatError:
            raise
        except Exception as exc:
            raise FormatError(f"cannot decode PNG '{path}': {exc}") from exc
    raise FormatError(f"unsupported image format in '{path}' (expected PNG or PGM P5)")


def load_image(path) -> GrayImage:
    """Load a grayscale raster and rescale intensities to [0, 1]."""
    raw, maxval = _load_raw(path)
    return GrayImage(raw.astype(np.float64) / maxval)


def save_image(img: GrayImage, path, bit_depth: int = 8) -> None:
    """Write a grayscale raster, quantizing [0, 1] to the given bit depth."""
    if bit_depth not in (8, 16):
        raise FormatError(f"unsupported bit depth {bit_depth} (expected 8 or 16)")
    scale = 255 if bit_depth == 8 else 65535
    quantized = np.rint(img.pixels * scale).astype(np.uint16)
    _save_raw(quantized, path, scale)


def load_mask(path) -> BinaryMask:
    """Load a mask raster; any nonzero pixel is foreground."""
    raw, _ = _load_raw(path)
    return BinaryMask(raw > 0)


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as 8-bit, 0 background and 255 foreground."""
    _save_raw(np.where(mask.bits, 255, 0).astype(np.uint16), path, 255)


def _save_raw(values: np.ndarray, path, maxval: int) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{values.shape[1]} {values.shape[0]}\n{maxval}\n".encode()
        raster_dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        path.write_bytes(header + values.astype(raster_dtype).tobytes())
    elif suffix == ".png":
        if maxval > 255:
            im = PILImage.fromarray(values.astype("<u2"))  # mode I;16
        else:
            im = PILImage.fromarray(values.astype(np.uint8))  # mode L
        im.save(path)
    else:
        raise FormatError(f"unsupported output format '{suffix}' for '{path}'")


def load_roi(path) -> RegionOfInterest:
    """Read a ROI file: one JSON object with integer fields x, y, w, h."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read ROI file '{path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed ROI JSON in '{path}': {exc}") from exc
    if not isinstance(payload, dict) or set(payload) != {"x", "y", "w", "h"}:
        raise FormatError(f"ROI file '{path}' must hold exactly x, y, w, h")
    try:
        return RegionOfInterest(
            int(payload["x"]), int(payload["y"]), int(payload["w"]), int(payload["h"])
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid ROI in '{path}': {exc}") from exc
