import math
from dataclasses import dataclass

import numpy as np

from apps.core.conf import get_setting
from apps.core.exceptions import InvalidInputError
from apps.core.splats import Bounds3D
from apps.projection.cameras import OrthoCamera, RigidTransform, ViewBox


# Looks down world -z; the mirrored z keeps world x/y as view x/y, so image
# rows run north to south.
NADIR_ROTATION = np.diag([1.0, 1.0, -1.0])


def split_sizes(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


@dataclass(frozen=True, eq=False)
class TdomPlan:
    """Nadir orthographic camera over the scene footprint and its tile grid."""

    camera: OrthoCamera
    gsd: float
    tile_grid: tuple[int, int]
    tiles: tuple[tuple[int, int, int, int], ...]

    @property
    def output_size(self) -> tuple[int, int]:
        return self.camera.width, self.camera.height

    @property
    def camera_height(self) -> float:
        """World z of the view plane (view depth 0)."""
        return float(self.camera.pose.translation[2])

    def tile_camera(self, tile) -> OrthoCamera:
        col0, row0, width, height = tile
        return self.camera.crop(col0, row0, width, height)

    def as_dict(self) -> dict:
        return {
            'gsd': self.gsd,
            'output_size': list(self.output_size),
            'tile_grid': list(self.tile_grid),
            'tiles': [list(tile) for tile in self.tiles],
            'camera': self.camera.as_dict(),
        }


def plan_tdom(
    scene_bounds: Bounds3D,
    gsd: float,
    tile_rows: int = 1,
    tile_cols: int = 1,
    z_margin_ratio: float | None = None,
) -> TdomPlan:
    """Size the output to ceil(footprint / gsd) pixels anchored at the
    north-west corner of the bounds, and cut it into whole-pixel tiles."""
    if not gsd > 0 or not math.isfinite(gsd):
        raise InvalidInputError(f'GSD must be positive, got {gsd}.')
    if tile_rows < 1 or tile_cols < 1:
        raise InvalidInputError(f'Tile grid must be at least 1x1, got {tile_rows}x{tile_cols}.')
    if z_margin_ratio is None:
        z_margin_ratio = float(get_setting('ORTHOSPLAT_Z_MARGIN_RATIO', 0.05))
    extent = scene_bounds.extent
    if extent[0] <= 0 or extent[1] <= 0:
        raise InvalidInputError('Scene bounds have an empty ground footprint.')

    width = max(1, math.ceil(extent[0] / gsd - 1e-9))
    height = max(1, math.ceil(extent[1] / gsd - 1e-9))
    if tile_cols > width or tile_rows > height:
        raise InvalidInputError(f'{tile_rows}x{tile_cols} tiles do not fit a {width}x{height} px output.')

    z_low, z_high = float(scene_bounds.minimum[2]), float(scene_bounds.maximum[2])
    margin = z_margin_ratio * (z_high - z_low)
    if margin <= 0:
        margin = gsd
    z_top = z_high + margin
    left = float(scene_bounds.minimum[0])
    top = float(scene_bounds.maximum[1])
    box = ViewBox(
        left=left,
        right=left + width * gsd,
        bottom=top - height * gsd,
        top=top,
        z_near=0.0,
        z_far=z_top - (z_low - margin),
    )
    pose = RigidTransform(NADIR_ROTATION, [0.0, 0.0, z_top])
    camera = OrthoCamera(pose, box, width, height)

    tiles = []
    row0 = 0
    for tile_height in split_sizes(height, tile_rows):
        col0 = 0
        for tile_width in split_sizes(width, tile_cols):
            tiles.append((col0, row0, tile_width, tile_height))
            col0 += tile_width
        row0 += tile_height
    return TdomPlan(camera=camera, gsd=float(gsd), tile_grid=(tile_rows, tile_cols), tiles=tuple(tiles))
