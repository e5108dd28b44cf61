import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from apps.core.exceptions import InvalidInputError
from apps.core.splats import Splat2D, gaussian_uv

from .cameras import OrthoCamera, PerspectiveCamera, RigidTransform
from .matrices import projection_matrix, to_ndc, viewport


# A splat is edge-on when |t_w . direction| falls below this.
DEGENERATE_COS = 1e-6


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3).copy()
        direction = np.asarray(self.direction, dtype=np.float64).reshape(3).copy()
        norm = float(np.linalg.norm(direction))
        if norm == 0.0 or not math.isfinite(norm):
            raise InvalidInputError('Ray direction must be a non-zero finite vector.')
        if abs(norm - 1.0) > 1e-12:
            direction = direction / norm
        object.__setattr__(self, 'origin', origin)
        object.__setattr__(self, 'direction', direction)


@dataclass(frozen=True, eq=False)
class SplatIntersection:
    uv: np.ndarray
    view_depth: float
    gaussian_value: float
    degenerate: bool
    hit_point: np.ndarray


class ProjectedCenter(NamedTuple):
    x: float
    y: float
    in_view: bool


def _check_pixel(px, cam) -> tuple[int, int]:
    col, row = int(px[0]), int(px[1])
    if not (0 <= col < cam.width and 0 <= row < cam.height):
        raise InvalidInputError(f'Pixel {tuple(px)} outside a {cam.width}x{cam.height} image.')
    return col, row


def ortho_ray(px, cam: OrthoCamera) -> Ray:
    """Ray through the center of local pixel `px` = (col, row)."""
    col, row = _check_pixel(px, cam)
    origins, dirs = cam.pixel_rays(
        np.array([col + cam.col_offset]), np.array([row + cam.row_offset])
    )
    return Ray(origins[0], dirs[0])


def perspective_ray(px, cam: PerspectiveCamera) -> Ray:
    col, row = _check_pixel(px, cam)
    origins, dirs = cam.pixel_rays(np.array([col]), np.array([row]))
    return Ray(origins[0], dirs[0])


def intersect_planes(origins, dirs, centers, tangent_u, tangent_v, normals, scales):
    """Ray/plane hits for K splats against P rays, all in view space.

    Returns (u, v, hit_z, degenerate), each shaped (K, P). For edge-on
    splats the hit is replaced by the ray point closest to the center.
    """
    o = np.asarray(origins, dtype=np.float64).reshape(1, -1, 3)
    d = np.asarray(dirs, dtype=np.float64).reshape(1, -1, 3)
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 1, 3)
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 1, 3)
    tu = np.asarray(tangent_u, dtype=np.float64).reshape(-1, 1, 3)
    tv = np.asarray(tangent_v, dtype=np.float64).reshape(-1, 1, 3)
    scales = np.asarray(scales, dtype=np.float64).reshape(-1, 2)

    rel = c - o
    denom = np.sum(d * n, axis=-1)
    degenerate = np.abs(denom) < DEGENERATE_COS
    plane_tau = np.sum(rel * n, axis=-1) / np.where(degenerate, 1.0, denom)
    closest_tau = np.sum(rel * d, axis=-1)
    tau = np.where(degenerate, closest_tau, plane_tau)
    local = o + tau[..., None] * d - c
    u = np.sum(local * tu, axis=-1) / scales[:, 0:1]
    v = np.sum(local * tv, axis=-1) / scales[:, 1:2]
    hit_z = o[..., 2] + tau * d[..., 2]
    return u, v, hit_z, degenerate


def intersect_planes_axial(origin_x, origin_y, centers, tangent_u, tangent_v, normals, scales):
    """`intersect_planes` specialised to rays along +z starting on z = 0."""
    ox = np.asarray(origin_x, dtype=np.float64).reshape(1, -1)
    oy = np.asarray(origin_y, dtype=np.float64).reshape(1, -1)
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    tu = np.asarray(tangent_u, dtype=np.float64).reshape(-1, 3)
    tv = np.asarray(tangent_v, dtype=np.float64).reshape(-1, 3)
    scales = np.asarray(scales, dtype=np.float64).reshape(-1, 2)

    dx = ox - c[:, 0:1]
    dy = oy - c[:, 1:2]
    nz = n[:, 2:3]
    degenerate = np.broadcast_to(np.abs(nz) < DEGENERATE_COS, dx.shape)
    safe_nz = np.where(np.abs(nz) < DEGENERATE_COS, 1.0, nz)
    dz = np.where(degenerate, 0.0, -(n[:, 0:1] * dx + n[:, 1:2] * dy) / safe_nz)
    u = (dx * tu[:, 0:1] + dy * tu[:, 1:2] + dz * tu[:, 2:3]) / scales[:, 0:1]
    v = (dx * tv[:, 0:1] + dy * tv[:, 1:2] + dz * tv[:, 2:3]) / scales[:, 1:2]
    hit_z = c[:, 2:3] + dz
    return u, v, hit_z, degenerate


def splat_view_frame(splat: Splat2D, world_to_view: RigidTransform):
    r = splat.rotation_matrix
    center = world_to_view.apply(splat.center)
    tu = world_to_view.apply_vectors(r[:, 0])
    tv = world_to_view.apply_vectors(r[:, 1])
    return center, tu, tv, np.cross(tu, tv)


def ray_splat_intersect(
    ray: Ray,
    splat: Splat2D,
    world_to_view: RigidTransform,
    z_near: float = 0.0,
    z_far: float = math.inf,
) -> SplatIntersection | None:
    """Hit of `ray` (view space) with the splat plane, or None on a miss.

    The depth is the view-space z of the hit; a hit outside [z_near, z_far]
    is a miss.
    """
    center, tu, tv, normal = splat_view_frame(splat, world_to_view)
    u, v, hit_z, degenerate = intersect_planes(
        ray.origin, ray.direction, center, tu, tv, normal, splat.scales
    )
    u, v, hit_z, degenerate = float(u[0, 0]), float(v[0, 0]), float(hit_z[0, 0]), bool(degenerate[0, 0])
    if not (z_near <= hit_z <= z_far) or not math.isfinite(hit_z):
        return None
    local = splat.scales[0] * u * tu + splat.scales[1] * v * tv
    return SplatIntersection(
        uv=np.array([u, v]),
        view_depth=hit_z,
        gaussian_value=float(gaussian_uv(u, v)),
        degenerate=degenerate,
        hit_point=center + local,
    )


def project_center(splat: Splat2D, cam) -> ProjectedCenter:
    """Pixel coordinates of the splat center through M . W and the viewport."""
    view_center = cam.pose.apply(splat.center)
    ndc = to_ndc(projection_matrix(cam), view_center)[0]
    x, y = viewport(ndc[:2], cam.width, cam.height)[0]
    in_front = cam.is_orthographic or view_center[2] > 0
    in_view = bool(in_front and np.all(np.abs(ndc) <= 1.0))
    return ProjectedCenter(float(x), float(y), in_view)
