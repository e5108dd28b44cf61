import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from apps.core.exceptions import InvalidInputError
from apps.core.sh import rgb_to_sh, sh_rotation
from apps.core.splats import SplatScene, quaternion_from_matrix, rotation_matrices
from apps.partition.cells import CameraRecord
from apps.projection.cameras import RigidTransform

from .colmap import SparseModel


logger = logging.getLogger(__name__)

PROVENANCES = ('auto', 'user-supplied')
ORTHONORMAL_TOL = 1e-9

# Ground-plane spread ratios under which the principal axis is considered
# undefined: isotropic spread, or centers on one line.
ISOTROPIC_RATIO = 1e-6

INIT_OPACITY = 0.1
INIT_NEIGHBORS = 3
MIN_INIT_SCALE = 1e-3


@dataclass(frozen=True, eq=False)
class AlignmentTransform:
    """x_aligned = rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray
    provenance: str = 'auto'

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if self.provenance not in PROVENANCES:
            raise InvalidInputError(f'Unknown alignment provenance {self.provenance!r}.')
        error = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if error > ORTHONORMAL_TOL or np.linalg.det(rotation) <= 0:
            raise InvalidInputError(f'Alignment rotation must be a proper rotation (deviation {error:.3g}).')
        if not np.all(np.isfinite(translation)):
            raise InvalidInputError('Alignment translation must be finite.')
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls, provenance: str = 'auto') -> 'AlignmentTransform':
        return cls(np.eye(3), np.zeros(3), provenance)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def as_dict(self) -> dict:
        return {
            'rotation': self.rotation.tolist(),
            'translation': self.translation.tolist(),
            'provenance': self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict, provenance: str | None = None) -> 'AlignmentTransform':
        return cls(
            np.array(data['rotation']),
            np.array(data.get('translation', [0.0, 0.0, 0.0])),
            provenance or data.get('provenance', 'user-supplied'),
        )


def _rotation_onto_z(direction: np.ndarray) -> np.ndarray:
    """Smallest rotation taking the unit vector `direction` onto +z."""
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(direction, z)
    sin_angle = float(np.linalg.norm(axis))
    cos_angle = float(np.dot(direction, z))
    if sin_angle < 1e-15:
        return np.eye(3) if cos_angle > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / sin_angle
    skew = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + sin_angle * skew + (1 - cos_angle) * skew @ skew


def _yaw(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _orthonormalize(rotation: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rotation)
    return u @ vt


def auto_alignment(cameras) -> AlignmentTransform:
    """Up axis from the mean viewing direction (nadir capture), then the
    principal ground-plane axis of the camera centers onto x."""
    if len(cameras) < 3:
        raise InvalidInputError(f'Automatic alignment needs at least 3 cameras, got {len(cameras)}.')
    directions = np.array([camera.pose.optical_axis for camera in cameras])
    mean = directions.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-9:
        raise InvalidInputError('Camera viewing directions cancel out; supply an alignment override.')
    tilt = _rotation_onto_z(-mean / norm)

    ground = (np.array([camera.center for camera in cameras]) @ tilt.T)[:, :2]
    spread = np.cov(ground - ground.mean(axis=0), rowvar=False, bias=True)
    eigvals, eigvecs = np.linalg.eigh(spread)
    if eigvals[1] <= 0:
        degenerate = 'coincide'
    elif eigvals[0] <= ISOTROPIC_RATIO * eigvals[1]:
        degenerate = 'are collinear'
    elif (eigvals[1] - eigvals[0]) <= ISOTROPIC_RATIO * eigvals[1]:
        degenerate = 'have no dominant ground axis'
    else:
        degenerate = None
    if degenerate:
        logger.warning('Camera centers %s; aligning the up axis only.', degenerate)
        rotation = tilt
    else:
        axis = eigvecs[:, 1]
        if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
            axis = -axis
        rotation = _yaw(-np.arctan2(axis[1], axis[0])) @ tilt
    return AlignmentTransform(_orthonormalize(rotation), np.zeros(3), 'auto')


def align_camera(camera: CameraRecord, transform: AlignmentTransform) -> CameraRecord:
    rc, tc = camera.pose.rotation, camera.pose.translation
    rotation = rc @ transform.rotation.T
    pose = RigidTransform(rotation, tc - rotation @ transform.translation)
    return CameraRecord(camera.id, pose, camera.intrinsics, camera.image_path)


def apply_alignment(model: SparseModel, transform: AlignmentTransform) -> SparseModel:
    return model.replace(
        cameras=tuple(align_camera(camera, transform) for camera in model.cameras),
        points=transform.apply(model.points),
    )


def manhattan_align(model: SparseModel, override: AlignmentTransform | None = None) -> tuple[SparseModel, AlignmentTransform]:
    if override is not None:
        transform = override
        if transform.provenance != 'user-supplied':
            transform = AlignmentTransform(transform.rotation, transform.translation, 'user-supplied')
    else:
        transform = auto_alignment(model.cameras)
    logger.info('Manhattan alignment (%s): rotation %s.', transform.provenance, np.round(transform.rotation, 6).tolist())
    return apply_alignment(model, transform), transform


def align_scene(scene: SplatScene, transform: AlignmentTransform) -> SplatScene:
    """Rigidly moves a splat scene; view-dependent colour turns with it."""
    if len(scene) == 0:
        return scene
    rotations = transform.rotation @ rotation_matrices(scene.rotations)
    quats = np.array([quaternion_from_matrix(matrix) for matrix in rotations])
    sh = scene.sh_coeffs
    if scene.sh_degree > 0:
        sh = np.einsum('jk,nkc->njc', sh_rotation(scene.sh_degree, transform.rotation), sh)
        sh[:, 0, :] = scene.sh_coeffs[:, 0, :]
    return scene.replace(centers=transform.apply(scene.centers), rotations=quats, sh_coeffs=sh)


def points_to_scene(points, colors, sh_degree: int = 0, neighbors: int = INIT_NEIGHBORS, crs_note: str = '') -> SplatScene:
    """Initial splats from a sparse point cloud: horizontal disks sized by the
    mean distance to the nearest neighbors, low opacity, colour in the DC term."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    count = points.shape[0]
    if count == 0:
        return SplatScene.empty(sh_degree, crs_note=crs_note)
    if count > 1:
        k = min(neighbors, count - 1) + 1
        distances, _ = cKDTree(points).query(points, k=k)
        scale = np.asarray(distances, dtype=np.float64).reshape(count, k)[:, 1:].mean(axis=1)
    else:
        scale = np.ones(1)
    scale = np.maximum(scale, MIN_INIT_SCALE)

    rgb = np.asarray(colors, dtype=np.float64).reshape(count, 3) / 255.0
    sh = np.zeros((count, (sh_degree + 1) ** 2, 3))
    sh[:, 0, :] = rgb_to_sh(rgb)
    rotations = np.tile([1.0, 0.0, 0.0, 0.0], (count, 1))
    return SplatScene(
        centers=points,
        rotations=rotations,
        scales=np.stack([scale, scale], axis=1),
        opacities=np.full(count, INIT_OPACITY),
        sh_coeffs=sh,
        crs_note=crs_note,
    )
