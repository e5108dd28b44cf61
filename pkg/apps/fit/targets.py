"""Target views on disk: views.json listing cameras and their images."""
import json
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidInputError, ParseError, RasterFormatError
from apps.projection.cameras import camera_from_dict
from apps.sceneio.rasters import read_pfm, read_png, srgb_to_linear, write_pfm

from .losses import as_rgb
from .optimizer import FitView


VIEWS_FILE = 'views.json'
TARGET_FORMATS = ('npy', 'pfm')


def load_target(path) -> np.ndarray:
    """Linear RGB target: PNG is decoded from sRGB, PFM and NPY are taken as is."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == '.png':
        pixels = read_png(path)
        if pixels.ndim != 3:
            raise RasterFormatError('Target PNG must be RGB.', path)
        return srgb_to_linear(pixels / 255.0)
    if suffix == '.pfm':
        return read_pfm(path).astype(np.float64)
    if suffix == '.npy':
        try:
            return np.load(path, allow_pickle=False).astype(np.float64)
        except (OSError, ValueError) as exc:
            raise RasterFormatError(f'Not a readable array: {exc}', path) from exc
    raise InvalidInputError(f'Unsupported target format {suffix or path.name!r}.')


def read_views(views_dir) -> list[FitView]:
    views_dir = Path(views_dir)
    path = views_dir / VIEWS_FILE
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as exc:
        raise ParseError('File does not exist.', path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    views = []
    for number, item in enumerate(data.get('views', [])):
        try:
            camera = camera_from_dict(item['camera'])
            image = item['image']
        except (KeyError, TypeError) as exc:
            raise ParseError(f'View {number} lacks {exc}.', path) from exc
        target = as_rgb(load_target(views_dir / image))
        if target.shape[:2] != (camera.height, camera.width):
            raise InvalidInputError(f'View {number}: image {image} does not match its {camera.width}x{camera.height} camera.')
        views.append(FitView(camera, target))
    if not views:
        raise InvalidInputError(f'{path} lists no views.')
    return views


def write_views(views, views_dir, fmt: str = 'npy') -> Path:
    """Write FitView objects or (camera, target) pairs as a views directory."""
    if fmt not in TARGET_FORMATS:
        raise InvalidInputError(f'Unknown target format {fmt!r}.')
    views_dir = Path(views_dir)
    views_dir.mkdir(parents=True, exist_ok=True)
    items = []
    for number, view in enumerate(views):
        camera, target = (view.camera, view.target) if isinstance(view, FitView) else view
        name = f'view_{number:03d}.{fmt}'
        if fmt == 'npy':
            np.save(views_dir / name, as_rgb(target), allow_pickle=False)
        else:
            write_pfm(views_dir / name, as_rgb(target))
        items.append({'camera': camera.as_dict(), 'image': name})
    path = views_dir / VIEWS_FILE
    path.write_text(json.dumps({'views': items}, indent=2) + '\n', encoding='utf-8')
    return path
