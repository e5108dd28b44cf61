import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError
from .sh import coefficient_count, sh_degree_for_count


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def normalize_quaternion(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(4)
    norm = float(np.linalg.norm(q))
    if not math.isfinite(norm) or norm == 0.0:
        raise InvalidInputError('Quaternion has zero norm.')
    return q / norm


def rotation_matrix(q) -> np.ndarray:
    """Rotation for a (w, x, y, z) quaternion; columns are t_u, t_v, t_w."""
    w, x, y, z = normalize_quaternion(q)
    return np.array([
        [1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y],
        [2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x],
        [2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y],
    ])


def rotation_matrices(quats: np.ndarray) -> np.ndarray:
    """Batched `rotation_matrix` for an (N, 4) array of unit quaternions."""
    q = np.asarray(quats, dtype=np.float64).reshape(-1, 4)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    out = np.empty((q.shape[0], 3, 3))
    out[:, 0, 0] = 1 - 2 * y * y - 2 * z * z
    out[:, 0, 1] = 2 * x * y - 2 * w * z
    out[:, 0, 2] = 2 * x * z + 2 * w * y
    out[:, 1, 0] = 2 * x * y + 2 * w * z
    out[:, 1, 1] = 1 - 2 * x * x - 2 * z * z
    out[:, 1, 2] = 2 * y * z - 2 * w * x
    out[:, 2, 0] = 2 * x * z - 2 * w * y
    out[:, 2, 1] = 2 * y * z + 2 * w * x
    out[:, 2, 2] = 1 - 2 * x * x - 2 * y * y
    return out


def quaternion_from_matrix(matrix) -> np.ndarray:
    rxx, ryx, rzx, rxy, ryy, rzy, rxz, ryz, rzz = np.asarray(matrix, dtype=np.float64).flat
    k = np.array([
        [rxx - ryy - rzz, 0, 0, 0],
        [ryx + rxy, ryy - rxx - rzz, 0, 0],
        [rzx + rxz, rzy + ryz, rzz - rxx - ryy, 0],
        [ryz - rzy, rzx - rxz, rxy - ryx, rxx + ryy + rzz],
    ]) / 3.0
    eigvals, eigvecs = np.linalg.eigh(k)
    q = eigvecs[[3, 0, 1, 2], np.argmax(eigvals)]
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def gaussian_uv(u, v):
    """Standard 2D Gaussian in splat-local coordinates, peak 1 at the origin."""
    return np.exp(-0.5 * (np.square(u) + np.square(v)))


@dataclass(frozen=True)
class Bounds3D:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64).reshape(3).copy()
        hi = np.asarray(self.maximum, dtype=np.float64).reshape(3).copy()
        if np.any(hi < lo):
            raise InvalidInputError('Bounds maximum lies below minimum.')
        object.__setattr__(self, 'minimum', _frozen(lo))
        object.__setattr__(self, 'maximum', _frozen(hi))

    @classmethod
    def from_points(cls, points: np.ndarray) -> 'Bounds3D':
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.shape[0] == 0:
            return cls(np.zeros(3), np.zeros(3))
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def extent(self) -> np.ndarray:
        return self.maximum - self.minimum

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.extent <= 0))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.all((points >= self.minimum) & (points <= self.maximum), axis=1)

    def union(self, other: 'Bounds3D') -> 'Bounds3D':
        return Bounds3D(np.minimum(self.minimum, other.minimum), np.maximum(self.maximum, other.maximum))

    def as_dict(self) -> dict:
        return {'min': self.minimum.tolist(), 'max': self.maximum.tolist()}


@dataclass(frozen=True, eq=False)
class Splat2D:
    center: np.ndarray
    rotation: np.ndarray
    scales: np.ndarray
    opacity: float
    sh_coeffs: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3).copy()
        scales = np.asarray(self.scales, dtype=np.float64).reshape(2).copy()
        sh = np.asarray(self.sh_coeffs, dtype=np.float64).reshape(-1, 3).copy()
        if not np.all(np.isfinite(center)):
            raise InvalidInputError('Splat center must be finite.')
        if not np.all(scales > 0) or not np.all(np.isfinite(scales)):
            raise InvalidInputError(f'Splat scales must be strictly positive, got {scales.tolist()}.')
        opacity = float(self.opacity)
        if not 0.0 <= opacity <= 1.0:
            raise InvalidInputError(f'Splat opacity must lie in [0, 1], got {opacity}.')
        sh_degree_for_count(sh.shape[0])
        object.__setattr__(self, 'center', _frozen(center))
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4).copy()
        if not abs(float(np.linalg.norm(rotation)) - 1.0) <= 1e-12:
            rotation = normalize_quaternion(rotation)
        object.__setattr__(self, 'rotation', _frozen(rotation))
        object.__setattr__(self, 'scales', _frozen(scales))
        object.__setattr__(self, 'opacity', opacity)
        object.__setattr__(self, 'sh_coeffs', _frozen(sh))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return rotation_matrix(self.rotation)

    @property
    def tangent_u(self) -> np.ndarray:
        return self.rotation_matrix[:, 0]

    @property
    def tangent_v(self) -> np.ndarray:
        return self.rotation_matrix[:, 1]

    @property
    def normal(self) -> np.ndarray:
        r = self.rotation_matrix
        return np.cross(r[:, 0], r[:, 1])

    @property
    def sh_degree(self) -> int:
        return sh_degree_for_count(self.sh_coeffs.shape[0])


def splat_to_world(splat: Splat2D) -> np.ndarray:
    """Homogeneous H with H @ (u, v, 1, 1) = mu + s_u t_u u + s_v t_v v."""
    r = splat.rotation_matrix
    h = np.zeros((4, 4))
    h[:3, 0] = splat.scales[0] * r[:, 0]
    h[:3, 1] = splat.scales[1] * r[:, 1]
    h[:3, 3] = splat.center
    h[3, 3] = 1.0
    return h


class SplatScene:
    """Ordered splats stored field by field (structure of arrays)."""

    def __init__(
        self,
        centers,
        rotations,
        scales,
        opacities,
        sh_coeffs,
        bounds: Bounds3D | None = None,
        crs_note: str = '',
    ):
        centers = np.array(centers, dtype=np.float64).reshape(-1, 3)
        count = centers.shape[0]
        rotations = np.array(rotations, dtype=np.float64).reshape(count, 4)
        scales = np.array(scales, dtype=np.float64).reshape(count, 2)
        opacities = np.array(opacities, dtype=np.float64).reshape(count)
        sh = np.array(sh_coeffs, dtype=np.float64)
        if sh.ndim != 3:
            sh = sh.reshape(0, 1, 3) if count == 0 else sh.reshape(count, -1, 3)
        if sh.shape[0] != count or sh.shape[2] != 3:
            raise InvalidInputError(f'SH coefficients have shape {sh.shape}, expected ({count}, K, 3).')
        sh_degree_for_count(sh.shape[1])

        if count:
            for name, values in (('center', centers), ('scale', scales), ('opacity', opacities), ('sh', sh)):
                bad = np.flatnonzero(~np.all(np.isfinite(values.reshape(count, -1)), axis=1))
                if bad.size:
                    raise InvalidInputError(f'Splat {int(bad[0])} has a non-finite {name}.')
        norms = np.linalg.norm(rotations, axis=1)
        bad = np.flatnonzero(~(norms > 0) | ~np.isfinite(norms))
        if bad.size:
            raise InvalidInputError(f'Splat {int(bad[0])} has a zero quaternion.')
        # Rows already unit length are left untouched so that re-wrapping a
        # scene (subset, concatenate) never perturbs stored bits.
        off_unit = np.abs(norms - 1.0) > 1e-12
        if np.any(off_unit):
            rotations[off_unit] = rotations[off_unit] / norms[off_unit, None]
        bad = np.flatnonzero(~np.all(scales > 0, axis=1))
        if bad.size:
            raise InvalidInputError(f'Splat {int(bad[0])} has a non-positive scale.')
        bad = np.flatnonzero((opacities < 0) | (opacities > 1))
        if bad.size:
            raise InvalidInputError(f'Splat {int(bad[0])} has opacity outside [0, 1].')

        if bounds is None:
            bounds = Bounds3D.from_points(centers)
        elif count and not np.all(bounds.contains(centers)):
            raise InvalidInputError('Scene bounds do not contain every splat center.')

        self.centers = _frozen(centers)
        self.rotations = _frozen(rotations)
        self.scales = _frozen(scales)
        self.opacities = _frozen(opacities)
        self.sh_coeffs = _frozen(sh)
        self.bounds = bounds
        self.crs_note = crs_note

    @classmethod
    def empty(cls, sh_degree: int = 0, crs_note: str = '') -> 'SplatScene':
        k = coefficient_count(sh_degree)
        return cls(
            np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 2)), np.zeros(0), np.zeros((0, k, 3)),
            crs_note=crs_note,
        )

    @classmethod
    def from_splats(cls, splats: Sequence[Splat2D], crs_note: str = '') -> 'SplatScene':
        if not splats:
            return cls.empty(crs_note=crs_note)
        return cls(
            np.stack([s.center for s in splats]),
            np.stack([s.rotation for s in splats]),
            np.stack([s.scales for s in splats]),
            np.array([s.opacity for s in splats]),
            np.stack([s.sh_coeffs for s in splats]),
            crs_note=crs_note,
        )

    @classmethod
    def concatenate(cls, scenes: Iterable['SplatScene'], crs_note: str | None = None) -> 'SplatScene':
        scenes = list(scenes)
        if not scenes:
            return cls.empty(crs_note=crs_note or '')
        degrees = {scene.sh_degree for scene in scenes}
        if len(degrees) != 1:
            raise InvalidInputError(f'Cannot concatenate scenes of SH degrees {sorted(degrees)}.')
        return cls(
            np.concatenate([s.centers for s in scenes]),
            np.concatenate([s.rotations for s in scenes]),
            np.concatenate([s.scales for s in scenes]),
            np.concatenate([s.opacities for s in scenes]),
            np.concatenate([s.sh_coeffs for s in scenes]),
            crs_note=scenes[0].crs_note if crs_note is None else crs_note,
        )

    def __len__(self) -> int:
        return self.centers.shape[0]

    def __getitem__(self, index: int) -> Splat2D:
        return Splat2D(
            center=self.centers[index],
            rotation=self.rotations[index],
            scales=self.scales[index],
            opacity=float(self.opacities[index]),
            sh_coeffs=self.sh_coeffs[index],
        )

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    @property
    def sh_degree(self) -> int:
        return sh_degree_for_count(self.sh_coeffs.shape[1])

    def subset(self, indices) -> 'SplatScene':
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        return SplatScene(
            self.centers[indices],
            self.rotations[indices],
            self.scales[indices],
            self.opacities[indices],
            self.sh_coeffs[indices],
            crs_note=self.crs_note,
        )

    def replace(self, **fields) -> 'SplatScene':
        values = {
            'centers': self.centers,
            'rotations': self.rotations,
            'scales': self.scales,
            'opacities': self.opacities,
            'sh_coeffs': self.sh_coeffs,
        }
        values.update(fields)
        return SplatScene(crs_note=self.crs_note, **values)

    def footprint_bounds(self, sigmas: float = 3.0) -> Bounds3D:
        """Centers grown by `sigmas` times each splat's largest scale."""
        if len(self) == 0:
            return Bounds3D(np.zeros(3), np.zeros(3))
        reach = sigmas * self.scales.max(axis=1)[:, None]
        return Bounds3D((self.centers - reach).min(axis=0), (self.centers + reach).max(axis=0))

    def attribute_matrix(self) -> np.ndarray:
        """One row per splat with every attribute, used for exact comparisons."""
        return np.concatenate(
            [
                self.centers,
                self.rotations,
                self.scales,
                self.opacities[:, None],
                self.sh_coeffs.reshape(len(self), -1),
            ],
            axis=1,
        )
