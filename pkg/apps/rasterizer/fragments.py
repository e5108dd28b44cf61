"""Vectorised fragment evaluation shared by the renderer and the fitter.

Every quantity is computed from global pixel indices, so a pixel's fragment
list (and therefore its composited value) does not depend on how the image
is cut into work tiles or TDOM tiles.
"""
from dataclasses import dataclass

import numpy as np

from apps.core.sh import eval_sh_raw
from apps.core.splats import SplatScene, rotation_matrices
from apps.projection.rays import intersect_planes, intersect_planes_axial

from .compositing import ALPHA_CLAMP, MIN_ALPHA, SCREEN_SIGMA, cull_radius, sort_splats


@dataclass(eq=False)
class PreparedScene:
    """Per-splat view-space data in composition order (ascending center z)."""

    camera: object
    order: np.ndarray
    centers: np.ndarray
    tangent_u: np.ndarray
    tangent_v: np.ndarray
    normals: np.ndarray
    scales: np.ndarray
    opacities: np.ndarray
    raw_colors: np.ndarray
    center_px: np.ndarray
    center_valid: np.ndarray
    # Inclusive global pixel window [col0, col1, row0, row1]; empty when col1 < col0.
    bbox: np.ndarray

    @property
    def colors(self) -> np.ndarray:
        return np.maximum(self.raw_colors, 0.0)

    def __len__(self) -> int:
        return self.order.shape[0]

    @classmethod
    def build(cls, scene: SplatScene, camera) -> 'PreparedScene':
        order = sort_splats(scene, camera)
        pose = camera.pose
        centers_world = scene.centers[order]
        rotations = rotation_matrices(scene.rotations[order])
        centers = pose.apply(centers_world)
        tangent_u = pose.apply_vectors(rotations[:, :, 0])
        tangent_v = pose.apply_vectors(rotations[:, :, 1])
        normals = np.cross(tangent_u, tangent_v)
        scales = scene.scales[order]
        opacities = scene.opacities[order]

        dirs = camera.view_direction_to(centers_world)
        raw_colors = eval_sh_raw(scene.sh_coeffs[order], dirs) if len(order) else np.zeros((0, 3))

        center_px, in_front = camera.project_view_points(centers)
        center_valid = in_front & (centers[:, 2] >= camera.z_near) & (centers[:, 2] <= camera.z_far)
        bbox = _pixel_bboxes(camera, centers, tangent_u, tangent_v, scales, opacities, center_px, center_valid)
        return cls(
            camera=camera,
            order=order,
            centers=centers,
            tangent_u=tangent_u,
            tangent_v=tangent_v,
            normals=normals,
            scales=scales,
            opacities=opacities,
            raw_colors=raw_colors.reshape(-1, 3),
            center_px=center_px,
            center_valid=center_valid,
            bbox=bbox,
        )


def _pixel_bboxes(camera, centers, tangent_u, tangent_v, scales, opacities, center_px, center_valid):
    count = centers.shape[0]
    radius = cull_radius(opacities)
    reach = radius[:, None] * np.sqrt(
        np.square(scales[:, 0:1] * tangent_u) + np.square(scales[:, 1:2] * tangent_v)
    )
    if camera.is_orthographic:
        half = reach[:, :2] / [camera.grid.step_x, camera.grid.step_y]
        lo = center_px - half
        hi = center_px + half
    elif count:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
        corners = centers[:, None, :] + signs[None, :, :] * reach[:, None, :]
        px, front = camera.project_view_points(corners.reshape(-1, 3))
        px = px.reshape(count, 8, 2)
        all_front = np.all(front.reshape(count, 8), axis=1)
        lo = np.where(all_front[:, None], px.min(axis=1), 0.0)
        hi = np.where(all_front[:, None], px.max(axis=1), [camera.width, camera.height])
    else:
        lo = hi = np.zeros((0, 2))

    screen_reach = SCREEN_SIGMA * radius[:, None]
    lo = np.where(center_valid[:, None], np.minimum(lo, center_px - screen_reach), lo)
    hi = np.where(center_valid[:, None], np.maximum(hi, center_px + screen_reach), hi)

    out_of_range = (centers[:, 2] + reach[:, 2] < camera.z_near) | (centers[:, 2] - reach[:, 2] > camera.z_far)
    dead = out_of_range | (opacities < MIN_ALPHA) | ~np.all(np.isfinite(lo) & np.isfinite(hi), axis=1)

    window_lo = np.array([camera.col_offset, camera.row_offset])
    window_hi = window_lo + [camera.width - 1, camera.height - 1]
    lo = np.clip(np.where(dead[:, None], 0.0, lo), window_lo - 2, window_hi + 2)
    hi = np.clip(np.where(dead[:, None], 0.0, hi), window_lo - 2, window_hi + 2)
    first = np.maximum(np.floor(lo).astype(np.int64) - 1, window_lo)
    last = np.minimum(np.floor(hi).astype(np.int64) + 1, window_hi)
    first = np.where(dead[:, None], 1, first)
    last = np.where(dead[:, None], 0, last)
    return np.stack([first[:, 0], last[:, 0], first[:, 1], last[:, 1]], axis=1)


@dataclass(eq=False)
class FragmentStack:
    """Fragments of `ranks` over a pixel block; arrays shaped (K, h, w)."""

    ranks: np.ndarray
    alpha: np.ndarray
    gaussian: np.ndarray
    depth: np.ndarray
    # True where opacity * gaussian was cut to the alpha clamp.
    clamped: np.ndarray


def evaluate_fragments(prepared: PreparedScene, ranks, cols, rows) -> FragmentStack:
    """Fragments of the splats at `ranks` for global pixel `cols` x `rows`."""
    camera = prepared.camera
    ranks = np.asarray(ranks, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    k, h, w = ranks.shape[0], rows.shape[0], cols.shape[0]
    grid_cols = np.broadcast_to(cols[None, :], (h, w)).reshape(-1)
    grid_rows = np.broadcast_to(rows[:, None], (h, w)).reshape(-1)

    centers = prepared.centers[ranks]
    tu = prepared.tangent_u[ranks]
    tv = prepared.tangent_v[ranks]
    normals = prepared.normals[ranks]
    scales = prepared.scales[ranks]
    origins, dirs = camera.pixel_rays(grid_cols, grid_rows)
    if camera.is_orthographic:
        u, v, hit_z, degenerate = intersect_planes_axial(
            origins[:, 0], origins[:, 1], centers, tu, tv, normals, scales
        )
    else:
        u, v, hit_z, degenerate = intersect_planes(origins, dirs, centers, tu, tv, normals, scales)

    hit_ok = ~degenerate & (hit_z >= camera.z_near) & (hit_z <= camera.z_far)
    ray_value = np.where(hit_ok, np.exp(-0.5 * (np.square(u) + np.square(v))), 0.0)

    center_px = prepared.center_px[ranks]
    dx = (grid_cols + 0.5)[None, :] - center_px[:, 0:1]
    dy = (grid_rows + 0.5)[None, :] - center_px[:, 1:2]
    screen_value = np.exp(-0.5 * (np.square(dx) + np.square(dy)) / (SCREEN_SIGMA * SCREEN_SIGMA))
    screen_value = np.where(prepared.center_valid[ranks][:, None], screen_value, 0.0)

    use_center = screen_value > ray_value
    gaussian = np.maximum(ray_value, screen_value)
    raw_alpha = prepared.opacities[ranks][:, None] * gaussian
    alpha = np.minimum(raw_alpha, ALPHA_CLAMP)

    bbox = prepared.bbox[ranks]
    inside = (
        (grid_cols[None, :] >= bbox[:, 0:1])
        & (grid_cols[None, :] <= bbox[:, 1:2])
        & (grid_rows[None, :] >= bbox[:, 2:3])
        & (grid_rows[None, :] <= bbox[:, 3:4])
    )
    live = inside & (alpha >= MIN_ALPHA)
    alpha = np.where(live, alpha, 0.0)
    depth = np.where(use_center, centers[:, 2:3], hit_z)
    depth = np.where(live, depth, 0.0)
    return FragmentStack(
        ranks=ranks,
        alpha=alpha.reshape(k, h, w),
        gaussian=np.where(live, gaussian, 0.0).reshape(k, h, w),
        depth=depth.reshape(k, h, w),
        clamped=(live & (raw_alpha > ALPHA_CLAMP)).reshape(k, h, w),
    )


@dataclass(eq=False)
class CompositeResult:
    color: np.ndarray
    depth: np.ndarray
    accum_alpha: np.ndarray
    # Transmittance in front of each fragment, (K, h, w).
    transmittance: np.ndarray
    final_transmittance: np.ndarray


def composite_stack(stack: FragmentStack, colors: np.ndarray, background) -> CompositeResult:
    """Sequential front-to-back blend of a fragment stack.

    The running products and sums accumulate along K in order, so results
    are independent of block shape.
    """
    k, h, w = stack.alpha.shape
    background = np.asarray(background, dtype=np.float64)
    if k == 0:
        color = np.empty((h, w, 3))
        color[...] = background
        ones = np.ones((h, w))
        return CompositeResult(color, np.zeros((h, w)), np.zeros((h, w)), np.zeros((0, h, w)), ones)
    inclusive = np.cumprod(1.0 - stack.alpha, axis=0)
    transmittance = np.concatenate([np.ones((1, h, w)), inclusive[:-1]], axis=0)
    weight = stack.alpha * transmittance
    final = inclusive[-1]
    color = np.cumsum(weight[..., None] * colors[:, None, None, :], axis=0)[-1] + final[..., None] * background
    depth = np.cumsum(weight * stack.depth, axis=0)[-1]
    return CompositeResult(color, depth, 1.0 - final, transmittance, final)
