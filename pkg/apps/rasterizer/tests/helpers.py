import numpy as np

from apps.core.sh import eval_sh, rgb_to_sh
from apps.core.splats import SplatScene
from apps.projection.rays import perspective_ray, ortho_ray, ray_splat_intersect
from apps.rasterizer.compositing import MIN_ALPHA, Fragment, composite_pixel, sort_splats, splat_weight


def random_scene(rng, count, low, high, scale_range=(0.05, 0.6), sh_degree=0, opacity_range=(0.2, 1.0)):
    quats = rng.normal(size=(count, 4))
    sh = np.zeros((count, (sh_degree + 1) ** 2, 3))
    sh[:, 0, :] = rgb_to_sh(rng.uniform(0, 1, (count, 3)))
    if sh_degree:
        sh[:, 1:, :] = rng.normal(size=(count, sh.shape[1] - 1, 3)) * 0.1
    return SplatScene(
        rng.uniform(low, high, (count, 3)),
        quats / np.linalg.norm(quats, axis=1, keepdims=True),
        rng.uniform(*scale_range, (count, 2)),
        rng.uniform(*opacity_range, count),
        sh,
    )


def flat_scene(centers, scales, colors, opacities, rotations=None):
    """Splats facing the view axis (identity rotation) with plain RGB colors."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    count = centers.shape[0]
    if rotations is None:
        rotations = np.tile([1.0, 0.0, 0.0, 0.0], (count, 1))
    sh = rgb_to_sh(np.asarray(colors, dtype=float).reshape(count, 1, 3))
    return SplatScene(centers, rotations, np.asarray(scales, dtype=float).reshape(count, 2), opacities, sh)


def reference_pixel(scene: SplatScene, camera, col: int, row: int, background):
    """Straight per-pixel evaluation of one local pixel through the scalar API."""
    ray = ortho_ray((col, row), camera) if camera.is_orthographic else perspective_ray((col, row), camera)
    gcol = col + camera.col_offset
    grow = row + camera.row_offset
    fragments = []
    for index in sort_splats(scene, camera):
        splat = scene[int(index)]
        view_center = camera.pose.apply(splat.center)
        center_px, in_front = camera.project_view_points(view_center)
        if in_front[0] and camera.z_near <= view_center[2] <= camera.z_far:
            offset = (gcol + 0.5 - center_px[0, 0], grow + 0.5 - center_px[0, 1])
        else:
            offset = (1e9, 1e9)
        hit = ray_splat_intersect(ray, splat, camera.pose, camera.z_near, camera.z_far)
        weight = splat_weight(hit, splat, offset)
        if weight.alpha < MIN_ALPHA:
            continue
        depth = view_center[2] if weight.use_center_depth else hit.view_depth
        direction = camera.view_direction_to(splat.center)[0]
        color = tuple(eval_sh(splat.sh_coeffs, direction))
        fragments.append(Fragment(int(index), weight.alpha, float(depth), color))
    return composite_pixel(fragments, background, check_order=False)
