import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from apps.core.conf import default_background, default_threads, get_setting
from apps.core.exceptions import InvalidInputError
from apps.core.splats import SplatScene
from apps.rasterizer.framebuffer import NORMALIZE_MIN_ALPHA, FrameBuffer
from apps.rasterizer.render import render

from .planning import TdomPlan


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeoTransform:
    """Pixel (col, row) to ground (x, y), world-file style: the origin is
    the center of the upper-left pixel."""

    pixel_width: float
    row_rotation: float
    col_rotation: float
    pixel_height: float
    origin_x: float
    origin_y: float

    def __post_init__(self):
        if self.determinant == 0:
            raise InvalidInputError('Geo transform is not invertible.')

    @classmethod
    def from_plan(cls, plan: TdomPlan) -> 'GeoTransform':
        grid = plan.camera.grid
        return cls(
            pixel_width=grid.step_x,
            row_rotation=0.0,
            col_rotation=0.0,
            pixel_height=-grid.step_y,
            origin_x=grid.left + 0.5 * grid.step_x,
            origin_y=grid.top - 0.5 * grid.step_y,
        )

    @property
    def determinant(self) -> float:
        return self.pixel_width * self.pixel_height - self.col_rotation * self.row_rotation

    def pixel_to_world(self, cols, rows) -> tuple[np.ndarray, np.ndarray]:
        cols = np.asarray(cols, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.float64)
        x = self.origin_x + self.pixel_width * cols + self.col_rotation * rows
        y = self.origin_y + self.row_rotation * cols + self.pixel_height * rows
        return x, y

    def world_to_pixel(self, xs, ys) -> tuple[np.ndarray, np.ndarray]:
        dx = np.asarray(xs, dtype=np.float64) - self.origin_x
        dy = np.asarray(ys, dtype=np.float64) - self.origin_y
        det = self.determinant
        cols = (self.pixel_height * dx - self.col_rotation * dy) / det
        rows = (self.pixel_width * dy - self.row_rotation * dx) / det
        return cols, rows

    def world_file(self) -> str:
        values = (
            self.pixel_width, self.row_rotation, self.col_rotation,
            self.pixel_height, self.origin_x, self.origin_y,
        )
        return ''.join(f'{value!r}\n' for value in values)

    @classmethod
    def parse_world_file(cls, text: str) -> 'GeoTransform':
        values = [float(line) for line in text.split()]
        if len(values) != 6:
            raise InvalidInputError(f'World file needs 6 values, found {len(values)}.')
        return cls(*values)


@dataclass(eq=False)
class TdomProduct:
    color: np.ndarray
    depth_raw: np.ndarray
    depth_normalized: np.ndarray
    coverage: np.ndarray
    geo_transform: GeoTransform
    camera_height: float = 0.0

    def __post_init__(self):
        shape = self.depth_raw.shape
        if self.color.shape[:2] != shape or self.depth_normalized.shape != shape or self.coverage.shape != shape:
            raise InvalidInputError('TDOM rasters must share their dimensions.')

    @property
    def width(self) -> int:
        return self.depth_raw.shape[1]

    @property
    def height(self) -> int:
        return self.depth_raw.shape[0]

    def coverage_mask(self, min_alpha: float = NORMALIZE_MIN_ALPHA) -> np.ndarray:
        return self.coverage > min_alpha

    def height_map(self, min_alpha: float = NORMALIZE_MIN_ALPHA) -> np.ndarray:
        """Surface height (world z) per pixel; NaN where nothing was rendered."""
        return np.where(self.coverage_mask(min_alpha), self.camera_height - self.depth_normalized, np.nan)


def render_tdom(
    scene: SplatScene,
    plan: TdomPlan,
    threads: int | None = None,
    tiles_in_flight: int | None = None,
    background=None,
) -> TdomProduct:
    """Render every plan tile through a cropped sub-camera and stitch them.

    Sub-cameras keep the full camera's pixel lattice, so the stitched rasters
    do not depend on the tile grid. At most `tiles_in_flight` tile buffers
    exist at once.
    """
    threads = threads or default_threads()
    if tiles_in_flight is None:
        tiles_in_flight = int(get_setting('ORTHOSPLAT_TILES_IN_FLIGHT', 2))
    tiles_in_flight = max(1, tiles_in_flight)
    background = tuple(float(c) for c in (background if background is not None else default_background()))
    width, height = plan.output_size
    frame = FrameBuffer.blank(width, height, background)

    def run(tile) -> FrameBuffer:
        return render(scene, plan.tile_camera(tile), threads=threads, background=background)

    tiles = list(plan.tiles)
    with ThreadPoolExecutor(max_workers=tiles_in_flight) as pool:
        for start in range(0, len(tiles), tiles_in_flight):
            batch = tiles[start:start + tiles_in_flight]
            for tile, part in zip(batch, pool.map(run, batch)):
                frame.place(part, tile[0], tile[1])
                logger.debug('Placed TDOM tile at (%d, %d), %dx%d px.', *tile)

    logger.info(
        'Rendered TDOM %dx%d px at %.4g m/px from %d splats in %d tiles.',
        width, height, plan.gsd, len(scene), len(tiles),
    )
    return TdomProduct(
        color=frame.color,
        depth_raw=frame.depth,
        depth_normalized=frame.depth_normalized(),
        coverage=frame.accum_alpha,
        geo_transform=GeoTransform.from_plan(plan),
        camera_height=plan.camera_height,
    )
