import math
from dataclasses import dataclass, field, replace

import numpy as np

from apps.core.exceptions import InvalidInputError
from apps.projection.cameras import PerspectiveCamera, RigidTransform


@dataclass(frozen=True)
class PinholeIntrinsics:
    """Pinhole intrinsics in pixels; rows grow downward from the principal point."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    model: str = 'PINHOLE'

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError('Camera image size must be at least 1x1.')
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError(f'Focal lengths must be positive, got {self.fx}, {self.fy}.')

    def project(self, view_points) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates of view-space points (y up) and an in-front mask."""
        points = np.asarray(view_points, dtype=np.float64).reshape(-1, 3)
        z = points[:, 2]
        in_front = z > 0
        safe_z = np.where(in_front, z, 1.0)
        cols = self.fx * points[:, 0] / safe_z + self.cx
        rows = self.cy - self.fy * points[:, 1] / safe_z
        return np.stack([cols, rows], axis=1), in_front

    def perspective_camera(self, pose: RigidTransform, z_near: float, z_far: float) -> PerspectiveCamera:
        return PerspectiveCamera.from_focal(pose, self.fx, self.fy, self.width, self.height, z_near, z_far)


@dataclass(frozen=True, eq=False)
class CameraRecord:
    id: int
    pose: RigidTransform
    intrinsics: PinholeIntrinsics
    image_path: str = ''

    @property
    def center(self) -> np.ndarray:
        return self.pose.center


@dataclass(frozen=True)
class Rect:
    """Ground-plane rectangle; a True flag in `unbounded` (west, east, south,
    north) makes that side reach to infinity for containment tests."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float
    unbounded: tuple[bool, bool, bool, bool] = (False, False, False, False)

    def __post_init__(self):
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y):
            raise InvalidInputError(f'Degenerate rectangle {self.as_list()}.')

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def as_list(self) -> list[float]:
        return [self.min_x, self.min_y, self.max_x, self.max_y]

    def contains(self, points) -> np.ndarray:
        """Half-open test: min edges inclusive, max edges exclusive."""
        points = np.asarray(points, dtype=np.float64)
        xy = points.reshape(-1, points.shape[-1])[:, :2]
        west, east, south, north = self.unbounded
        inside = np.ones(xy.shape[0], dtype=bool)
        if not west:
            inside &= xy[:, 0] >= self.min_x
        if not east:
            inside &= xy[:, 0] < self.max_x
        if not south:
            inside &= xy[:, 1] >= self.min_y
        if not north:
            inside &= xy[:, 1] < self.max_y
        return inside

    def grown(self, ratio: float) -> 'Rect':
        dx = ratio * self.width
        dy = ratio * self.height
        return replace(
            self,
            min_x=self.min_x - dx,
            min_y=self.min_y - dy,
            max_x=self.max_x + dx,
            max_y=self.max_y + dy,
        )

    def overlaps(self, other: 'Rect') -> bool:
        """Interiors intersect (shared edges do not count)."""
        return (
            min(self.max_x, other.max_x) > max(self.min_x, other.min_x)
            and min(self.max_y, other.max_y) > max(self.min_y, other.min_y)
        )

    def as_dict(self) -> dict:
        return {'min': [self.min_x, self.min_y], 'max': [self.max_x, self.max_y], 'unbounded': list(self.unbounded)}

    @classmethod
    def from_dict(cls, data: dict) -> 'Rect':
        return cls(data['min'][0], data['min'][1], data['max'][0], data['max'][1], tuple(data['unbounded']))

    @classmethod
    def from_points(cls, points) -> 'Rect':
        xy = np.asarray(points, dtype=np.float64)[:, :2]
        if xy.shape[0] == 0:
            raise InvalidInputError('Cannot bound an empty point set.')
        lo = xy.min(axis=0)
        hi = xy.max(axis=0)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


@dataclass(frozen=True)
class Cell:
    index: tuple[int, int]
    core_bounds: Rect
    expanded_bounds: Rect
    camera_ids: tuple[int, ...] = ()
    point_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), compare=False)
    selected_camera_ids: tuple[int, ...] = ()

    @property
    def label(self) -> str:
        return f'cell_{self.index[0]}_{self.index[1]}'


@dataclass(frozen=True)
class PartitionPlan:
    rows: int
    cols: int
    cells: tuple[Cell, ...]
    expansion_ratio: float
    visibility_threshold: float
    extent: Rect
    z_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidInputError('A partition needs at least one cell.')
        if self.expansion_ratio < 0 or not math.isfinite(self.expansion_ratio):
            raise InvalidInputError(f'Expansion ratio must be >= 0, got {self.expansion_ratio}.')
        if not 0.0 < self.visibility_threshold or not math.isfinite(self.visibility_threshold):
            raise InvalidInputError(f'Visibility threshold must be positive, got {self.visibility_threshold}.')
        if len(self.cells) != self.rows * self.cols:
            raise InvalidInputError('Cell count does not match the grid shape.')

    def cell(self, row: int, col: int) -> Cell:
        return self.cells[row * self.cols + col]

    def with_cells(self, cells) -> 'PartitionPlan':
        return replace(self, cells=tuple(cells))
