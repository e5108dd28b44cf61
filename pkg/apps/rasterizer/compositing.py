import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from apps.core.conf import contract_checks_enabled
from apps.core.exceptions import ContractViolationError
from apps.core.splats import Splat2D, SplatScene
from apps.projection.rays import SplatIntersection


logger = logging.getLogger(__name__)

ALPHA_CLAMP = 0.999
MIN_ALPHA = 1.0 / 255.0
SCREEN_SIGMA = 0.70710678
TILE_SIZE = 16


@dataclass(frozen=True)
class Fragment:
    splat_index: int
    alpha: float
    depth: float
    color: tuple[float, float, float]


@dataclass(frozen=True)
class SplatWeight:
    alpha: float
    gaussian: float
    # True when the screen-space Gaussian won, so the fragment takes the center depth.
    use_center_depth: bool


def sort_splats(scene: SplatScene, camera) -> np.ndarray:
    """Splat indices by ascending view-space center z; ties keep scene order."""
    if len(scene) == 0:
        return np.zeros(0, dtype=np.int64)
    view_z = camera.pose.apply(scene.centers)[:, 2]
    return np.argsort(view_z, kind='stable')


def screen_gaussian(dx, dy):
    """Low-pass Gaussian around the projected center; offsets in pixels."""
    return np.exp(-0.5 * (np.square(dx) + np.square(dy)) / (SCREEN_SIGMA * SCREEN_SIGMA))


def cull_radius(opacity) -> np.ndarray:
    """Gaussian radius (in sigmas) beyond which opacity * G < 1/255."""
    opacity = np.asarray(opacity, dtype=np.float64)
    ratio = np.maximum(opacity / MIN_ALPHA, 1.0)
    return np.sqrt(2.0 * np.log(ratio))


def splat_weight(intersection: SplatIntersection | None, splat: Splat2D, screen_uv) -> SplatWeight:
    """Effective weight of one splat at one pixel.

    `screen_uv` is the pixel-center offset from the projected splat center, in
    pixels. An edge-on splat collapses to a line and only the screen-space
    Gaussian contributes.
    """
    ray_value = 0.0
    if intersection is not None and not intersection.degenerate:
        ray_value = float(intersection.gaussian_value)
    screen_value = float(screen_gaussian(screen_uv[0], screen_uv[1]))
    gaussian = max(ray_value, screen_value)
    alpha = min(splat.opacity * gaussian, ALPHA_CLAMP)
    return SplatWeight(max(alpha, 0.0), gaussian, screen_value > ray_value)


def splat_alpha(intersection: SplatIntersection | None, splat: Splat2D, screen_uv) -> float:
    return splat_weight(intersection, splat, screen_uv).alpha


def composite_pixel(
    fragments: Sequence[Fragment],
    background,
    check_order: bool | None = None,
) -> tuple[np.ndarray, float, float]:
    """Front-to-back alpha blending of depth-ordered fragments.

    Returns (rgb, D, accum_alpha) where D is the transmittance-weighted sum
    of fragment depths and the leftover transmittance shows the background.
    """
    if check_order is None:
        check_order = contract_checks_enabled()
    if check_order:
        for previous, current in zip(fragments, fragments[1:]):
            if current.depth < previous.depth:
                raise ContractViolationError(
                    f'Fragments out of depth order: {previous.depth} before {current.depth}.'
                )
    color = np.zeros(3)
    depth = 0.0
    transmittance = 1.0
    for fragment in fragments:
        weight = fragment.alpha * transmittance
        color = color + weight * np.asarray(fragment.color, dtype=np.float64)
        depth = depth + weight * fragment.depth
        transmittance = transmittance * (1.0 - fragment.alpha)
    color = color + transmittance * np.asarray(background, dtype=np.float64)
    if not math.isfinite(depth):
        logger.warning('Non-finite depth composited from %d fragments.', len(fragments))
    return color, depth, 1.0 - transmittance
