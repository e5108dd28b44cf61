"""PNG (8/16-bit, via Pillow) and PFM (32-bit float) raster files."""
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from apps.core.exceptions import InvalidInputError, RasterFormatError


_PFM_HEADER = re.compile(rb'(P[Ff])\s+(\d+)\s+(\d+)\s+(\S+)\s')


def linear_to_srgb(values) -> np.ndarray:
    x = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1 / 2.4) - 0.055)


def srgb_to_linear(values) -> np.ndarray:
    x = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def quantize(values, bits: int = 8) -> np.ndarray:
    """Map [0, 1] to unsigned integers of the given depth, rounding to nearest."""
    top = (1 << bits) - 1
    scaled = np.rint(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * top)
    return scaled.astype(np.uint8 if bits == 8 else np.uint16)


def write_png(path, pixels) -> Path:
    """Write an (H, W) or (H, W, 3) uint8 array, or an (H, W) uint16 array."""
    path = Path(path)
    pixels = np.asarray(pixels)
    if pixels.dtype == np.uint16:
        if pixels.ndim != 2:
            raise InvalidInputError('16-bit PNG export supports single-channel images only.')
        image = Image.fromarray(pixels.astype('<u2'), mode='I;16')
    elif pixels.dtype == np.uint8 and pixels.ndim in (2, 3):
        image = Image.fromarray(pixels)
    else:
        raise InvalidInputError(f'Cannot write {pixels.dtype} array of shape {pixels.shape} as PNG.')
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        image.save(path, format='PNG')
    except OSError as exc:
        raise RasterFormatError(f'Could not write PNG: {exc}', path) from exc
    return path


def read_png(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as image:
            image.load()
            if image.mode in ('I;16', 'I;16B', 'I'):
                return np.asarray(image, dtype=np.int64).astype(np.uint16)
            if image.mode not in ('L', 'RGB'):
                image = image.convert('RGB')
            return np.asarray(image, dtype=np.uint8).copy()
    except FileNotFoundError as exc:
        raise RasterFormatError('File does not exist.', path) from exc
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise RasterFormatError(f'Not a readable PNG: {exc}', path, 0) from exc


def write_pfm(path, values) -> Path:
    """Little-endian PFM; rows are stored bottom to top as the format requires."""
    path = Path(path)
    data = np.asarray(values, dtype=np.float32)
    if data.ndim == 2:
        tag = b'Pf'
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = b'PF'
    else:
        raise InvalidInputError(f'Cannot write array of shape {data.shape} as PFM.')
    height, width = data.shape[:2]
    path.parent.mkdir(parents=True, exist_ok=True)
    header = tag + b'\n' + f'{width} {height}\n-1.0\n'.encode('ascii')
    with path.open('wb') as handle:
        handle.write(header)
        handle.write(np.ascontiguousarray(data[::-1]).astype('<f4').tobytes())
    return path


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise RasterFormatError('File does not exist.', path) from exc
    match = _PFM_HEADER.match(raw)
    if match is None:
        raise RasterFormatError('Malformed PFM header.', path, 0)
    tag, width, height, scale = match.groups()
    width, height = int(width), int(height)
    try:
        scale = float(scale)
    except ValueError as exc:
        raise RasterFormatError('PFM scale is not a number.', path, match.start(4)) from exc
    if scale == 0:
        raise RasterFormatError('PFM scale must be non-zero.', path, match.start(4))
    channels = 3 if tag == b'PF' else 1
    dtype = '<f4' if scale < 0 else '>f4'
    offset = match.end()
    expected = width * height * channels * 4
    if len(raw) - offset < expected:
        raise RasterFormatError(
            f'PFM data is truncated: expected {expected} bytes, found {len(raw) - offset}.', path, len(raw),
        )
    data = np.frombuffer(raw, dtype=dtype, count=width * height * channels, offset=offset)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return data.reshape(shape)[::-1].astype(np.float32)
