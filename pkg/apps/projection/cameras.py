import math
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidInputError


ORTHONORMAL_TOL = 1e-6


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x_view = rotation @ x_world + translation.

    The rotation block only has to be orthonormal; the nadir TDOM frame uses
    a z-mirror (determinant -1) so that image rows run north to south.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise InvalidInputError('Rigid transform must be finite.')
        error = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if error > ORTHONORMAL_TOL:
            raise InvalidInputError(f'Rotation block is not orthonormal (max deviation {error:.3g}).')
        object.__setattr__(self, 'rotation', _frozen(rotation))
        object.__setattr__(self, 'translation', _frozen(translation))

    @classmethod
    def identity(cls) -> 'RigidTransform':
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix) -> 'RigidTransform':
        matrix = np.asarray(matrix, dtype=np.float64).reshape(4, 4)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.rotation))

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def optical_axis(self) -> np.ndarray:
        """World direction of the view-space +z axis."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def apply_vectors(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def inverse(self) -> 'RigidTransform':
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: 'RigidTransform') -> 'RigidTransform':
        """self after other."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def as_dict(self) -> dict:
        return {'rotation': self.rotation.tolist(), 'translation': self.translation.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'RigidTransform':
        return cls(np.array(data['rotation']), np.array(data['translation']))


@dataclass(frozen=True)
class ViewBox:
    left: float
    right: float
    bottom: float
    top: float
    z_near: float
    z_far: float

    def __post_init__(self):
        values = (self.left, self.right, self.bottom, self.top, self.z_near, self.z_far)
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError('View box must be finite.')
        if not (self.left < self.right and self.bottom < self.top and self.z_near < self.z_far):
            raise InvalidInputError(f'Degenerate view box {values}.')

    def as_tuple(self) -> tuple[float, ...]:
        return (self.left, self.right, self.bottom, self.top, self.z_near, self.z_far)


@dataclass(frozen=True)
class PixelGrid:
    """Anchor of a pixel lattice; global column c has its center at
    left + (c + 0.5) * step_x, global row r at top - (r + 0.5) * step_y."""

    left: float
    top: float
    step_x: float
    step_y: float
    col_offset: int = 0
    row_offset: int = 0


@dataclass(frozen=True, eq=False)
class PerspectiveCamera:
    pose: RigidTransform
    z_near: float
    z_far: float
    fov_x: float
    fov_y: float
    width: int
    height: int

    is_orthographic = False

    def __post_init__(self):
        if not 0.0 < self.z_near < self.z_far:
            raise InvalidInputError(f'Need 0 < z_near < z_far, got {self.z_near}, {self.z_far}.')
        for name in ('fov_x', 'fov_y'):
            value = getattr(self, name)
            if not 0.0 < value < math.pi:
                raise InvalidInputError(f'{name} must lie in (0, pi), got {value}.')
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidInputError('Image size must be at least 1x1.')
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'height', int(self.height))

    @classmethod
    def from_focal(cls, pose, fx: float, fy: float, width: int, height: int, z_near: float, z_far: float):
        return cls(
            pose=pose,
            z_near=z_near,
            z_far=z_far,
            fov_x=2.0 * math.atan(width / (2.0 * fx)),
            fov_y=2.0 * math.atan(height / (2.0 * fy)),
            width=width,
            height=height,
        )

    @property
    def right(self) -> float:
        return self.z_near * math.tan(self.fov_x / 2.0)

    @property
    def left(self) -> float:
        return -self.right

    @property
    def top(self) -> float:
        return self.z_near * math.tan(self.fov_y / 2.0)

    @property
    def bottom(self) -> float:
        return -self.top

    @property
    def col_offset(self) -> int:
        return 0

    @property
    def row_offset(self) -> int:
        return 0

    def pixel_rays(self, cols: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """View-space ray origins and unit directions through pixel centers."""
        cols = np.asarray(cols, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.float64)
        x = self.left + (cols + 0.5) * ((self.right - self.left) / self.width)
        y = self.top - (rows + 0.5) * ((self.top - self.bottom) / self.height)
        dirs = np.stack([x, y, np.full_like(x, self.z_near)], axis=-1)
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        return np.zeros_like(dirs), dirs

    def project_view_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Continuous pixel coordinates (pixel i spans [i, i + 1)) and an in-front mask."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        z = points[:, 2]
        in_front = z > 0
        safe_z = np.where(in_front, z, 1.0)
        x_near = points[:, 0] * self.z_near / safe_z
        y_near = points[:, 1] * self.z_near / safe_z
        px = (x_near - self.left) / (self.right - self.left) * self.width
        py = (self.top - y_near) / (self.top - self.bottom) * self.height
        return np.stack([px, py], axis=1), in_front

    def view_direction_to(self, world_points: np.ndarray) -> np.ndarray:
        """Unit world directions from the optical center toward each point."""
        dirs = np.asarray(world_points, dtype=np.float64).reshape(-1, 3) - self.pose.center
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        return dirs / np.where(norms > 0, norms, 1.0)

    def as_dict(self) -> dict:
        return {
            'type': 'perspective',
            'pose': self.pose.as_dict(),
            'z_near': self.z_near,
            'z_far': self.z_far,
            'fov_x': self.fov_x,
            'fov_y': self.fov_y,
            'width': self.width,
            'height': self.height,
        }


@dataclass(frozen=True, eq=False)
class OrthoCamera:
    pose: RigidTransform
    box: ViewBox
    width: int
    height: int
    grid: PixelGrid | None = None

    is_orthographic = True

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidInputError('Image size must be at least 1x1.')
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'height', int(self.height))
        if self.grid is None:
            object.__setattr__(
                self,
                'grid',
                PixelGrid(
                    left=self.box.left,
                    top=self.box.top,
                    step_x=(self.box.right - self.box.left) / self.width,
                    step_y=(self.box.top - self.box.bottom) / self.height,
                ),
            )

    @property
    def gsd(self) -> float:
        return self.grid.step_x

    @property
    def z_near(self) -> float:
        return self.box.z_near

    @property
    def z_far(self) -> float:
        return self.box.z_far

    @property
    def col_offset(self) -> int:
        return self.grid.col_offset

    @property
    def row_offset(self) -> int:
        return self.grid.row_offset

    def crop(self, col0: int, row0: int, width: int, height: int) -> 'OrthoCamera':
        """Sub-camera over local pixels [col0, col0 + width) x [row0, row0 + height).

        The child keeps the parent's lattice, so every pixel's ray is computed
        from the same global index whatever the crop.
        """
        if col0 < 0 or row0 < 0 or width < 1 or height < 1:
            raise InvalidInputError('Crop window must be non-empty and non-negative.')
        if col0 + width > self.width or row0 + height > self.height:
            raise InvalidInputError('Crop window exceeds the camera image.')
        grid = self.grid
        gcol = grid.col_offset + col0
        grow = grid.row_offset + row0
        box = ViewBox(
            left=grid.left + gcol * grid.step_x,
            right=grid.left + (gcol + width) * grid.step_x,
            bottom=grid.top - (grow + height) * grid.step_y,
            top=grid.top - grow * grid.step_y,
            z_near=self.box.z_near,
            z_far=self.box.z_far,
        )
        return OrthoCamera(
            pose=self.pose,
            box=box,
            width=width,
            height=height,
            grid=PixelGrid(grid.left, grid.top, grid.step_x, grid.step_y, gcol, grow),
        )

    def pixel_rays(self, cols: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cols = np.asarray(cols, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.float64)
        x = self.grid.left + (cols + 0.5) * self.grid.step_x
        y = self.grid.top - (rows + 0.5) * self.grid.step_y
        origins = np.stack([x, y, np.zeros_like(x)], axis=-1)
        dirs = np.zeros_like(origins)
        dirs[..., 2] = 1.0
        return origins, dirs

    def project_view_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        px = (points[:, 0] - self.grid.left) / self.grid.step_x
        py = (self.grid.top - points[:, 1]) / self.grid.step_y
        return np.stack([px, py], axis=1), np.ones(points.shape[0], dtype=bool)

    def view_direction_to(self, world_points: np.ndarray) -> np.ndarray:
        count = np.asarray(world_points).reshape(-1, 3).shape[0]
        return np.tile(self.pose.optical_axis, (count, 1))

    def as_dict(self) -> dict:
        return {
            'type': 'ortho',
            'pose': self.pose.as_dict(),
            'box': list(self.box.as_tuple()),
            'width': self.width,
            'height': self.height,
        }


def camera_from_dict(data: dict):
    kind = data.get('type')
    pose = RigidTransform.from_dict(data['pose'])
    if kind == 'ortho':
        return OrthoCamera(pose=pose, box=ViewBox(*data['box']), width=data['width'], height=data['height'])
    if kind == 'perspective':
        return PerspectiveCamera(
            pose=pose,
            z_near=data['z_near'],
            z_far=data['z_far'],
            fov_x=data['fov_x'],
            fov_y=data['fov_y'],
            width=data['width'],
            height=data['height'],
        )
    raise InvalidInputError(f'Unknown camera type {kind!r}.')
