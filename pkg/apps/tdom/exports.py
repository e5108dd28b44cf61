import json
import logging
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidInputError, RasterFormatError
from apps.sceneio.rasters import linear_to_srgb, quantize, read_pfm, read_png, srgb_to_linear, write_pfm, write_png

from .products import GeoTransform, TdomProduct


logger = logging.getLogger(__name__)

COLOR_FILE = 'color.png'
DEPTH_FILE = 'depth.pfm'
DEPTH_NORMALIZED_FILE = 'depth_normalized.pfm'
DEPTH_PREVIEW_FILE = 'depth_preview.png'
COVERAGE_FILE = 'coverage.png'
HEIGHT_FILE = 'height.pfm'
METADATA_FILE = 'tdom.json'


def depth_preview(product: TdomProduct) -> np.ndarray:
    """16-bit min-max stretch of normalized depth over covered pixels; 0 elsewhere."""
    mask = product.coverage_mask()
    preview = np.zeros(product.depth_normalized.shape, dtype=np.uint16)
    if not np.any(mask):
        return preview
    values = product.depth_normalized[mask]
    low, high = float(values.min()), float(values.max())
    span = high - low
    if span > 0:
        preview[mask] = quantize((values - low) / span, bits=16)
    return preview


def _world_file_path(png_path: Path) -> Path:
    return png_path.with_suffix('.pgw')


def export_products(product: TdomProduct, out_dir, metadata: dict | None = None) -> dict[str, Path]:
    """Write every TDOM raster plus world files and a metadata sidecar."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f'Cannot create output directory {out_dir}: {exc}') from exc

    paths = {
        'color': write_png(out_dir / COLOR_FILE, quantize(linear_to_srgb(product.color))),
        'depth': write_pfm(out_dir / DEPTH_FILE, product.depth_raw),
        'depth_normalized': write_pfm(out_dir / DEPTH_NORMALIZED_FILE, product.depth_normalized),
        'depth_preview': write_png(out_dir / DEPTH_PREVIEW_FILE, depth_preview(product)),
        'coverage': write_png(out_dir / COVERAGE_FILE, quantize(product.coverage)),
        'height': write_pfm(out_dir / HEIGHT_FILE, product.height_map()),
    }
    world_file = product.geo_transform.world_file()
    for key in ('color', 'depth_preview', 'coverage'):
        sidecar = _world_file_path(paths[key])
        sidecar.write_text(world_file, encoding='ascii')
        paths[f'{key}_world_file'] = sidecar

    data = {
        'width': product.width,
        'height': product.height,
        'camera_height': product.camera_height,
        'world_file': world_file.split(),
        'files': {key: path.name for key, path in sorted(paths.items())},
    }
    data.update(metadata or {})
    paths['metadata'] = out_dir / METADATA_FILE
    paths['metadata'].write_text(json.dumps(data, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    logger.info('Exported TDOM products to %s.', out_dir)
    return paths


def read_products(tdom_dir) -> TdomProduct:
    """Load an exported TDOM directory; color comes back as linear RGB."""
    tdom_dir = Path(tdom_dir)
    if not (tdom_dir / METADATA_FILE).exists():
        raise RasterFormatError(f'No {METADATA_FILE} found; not a TDOM output directory.', tdom_dir)
    metadata = json.loads((tdom_dir / METADATA_FILE).read_text(encoding='utf-8'))
    geo = GeoTransform.parse_world_file((tdom_dir / 'color.pgw').read_text(encoding='ascii'))
    color = srgb_to_linear(read_png(tdom_dir / COLOR_FILE) / 255.0)
    coverage = read_png(tdom_dir / COVERAGE_FILE) / 255.0
    return TdomProduct(
        color=color,
        depth_raw=read_pfm(tdom_dir / DEPTH_FILE).astype(np.float64),
        depth_normalized=read_pfm(tdom_dir / DEPTH_NORMALIZED_FILE).astype(np.float64),
        coverage=coverage,
        geo_transform=geo,
        camera_height=float(metadata.get('camera_height', 0.0)),
    )
