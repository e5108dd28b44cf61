"""Projection matrices.

Both matrices honour the same endpoint contract: x = l -> -1, x = r -> +1,
y = b -> +1, y = t -> -1 (image rows grow downward), z = z_near -> -1 and
z = z_far -> +1 after the homogeneous divide.
"""
import numpy as np

from apps.core.exceptions import InvalidInputError

from .cameras import OrthoCamera, PerspectiveCamera


def perspective_matrix(cam: PerspectiveCamera) -> np.ndarray:
    n, f = cam.z_near, cam.z_far
    l, r, b, t = cam.left, cam.right, cam.bottom, cam.top
    return np.array([
        [2 * n / (r - l), 0.0, -(r + l) / (r - l), 0.0],
        [0.0, -2 * n / (t - b), (t + b) / (t - b), 0.0],
        [0.0, 0.0, (f + n) / (f - n), -2 * f * n / (f - n)],
        [0.0, 0.0, 1.0, 0.0],
    ])


def ortho_matrix(cam: OrthoCamera) -> np.ndarray:
    box = cam.box
    l, r, b, t, n, f = box.as_tuple()
    if r - l <= 0 or t - b <= 0 or f - n <= 0:
        raise InvalidInputError('Orthographic box has zero extent.')
    return np.array([
        [2 / (r - l), 0.0, 0.0, -(r + l) / (r - l)],
        [0.0, -2 / (t - b), 0.0, (t + b) / (t - b)],
        [0.0, 0.0, 2 / (f - n), -(f + n) / (f - n)],
        [0.0, 0.0, 0.0, 1.0],
    ])


def projection_matrix(cam) -> np.ndarray:
    return ortho_matrix(cam) if cam.is_orthographic else perspective_matrix(cam)


def to_ndc(matrix: np.ndarray, view_points: np.ndarray) -> np.ndarray:
    points = np.asarray(view_points, dtype=np.float64).reshape(-1, 3)
    homogeneous = np.concatenate([points, np.ones((points.shape[0], 1))], axis=1) @ matrix.T
    return homogeneous[:, :3] / homogeneous[:, 3:4]


def viewport(ndc_xy: np.ndarray, width: int, height: int) -> np.ndarray:
    """NDC x/y to continuous pixel coordinates; pixel (0, 0) is the corner at (l, t)."""
    ndc_xy = np.asarray(ndc_xy, dtype=np.float64).reshape(-1, 2)
    return np.stack([(ndc_xy[:, 0] + 1.0) * 0.5 * width, (ndc_xy[:, 1] + 1.0) * 0.5 * height], axis=1)
