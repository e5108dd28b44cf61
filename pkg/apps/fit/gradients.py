"""Loss gradients: central finite differences through full renders, and
closed-form opacity and colour gradients from the fragment stacks."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from apps.core.conf import default_background
from apps.core.exceptions import InvalidInputError
from apps.core.sh import sh_basis
from apps.core.splats import SplatScene
from apps.rasterizer.compositing import TILE_SIZE
from apps.rasterizer.fragments import PreparedScene, composite_stack, evaluate_fragments
from apps.rasterizer.render import bin_splats, render, work_tiles
from apps.sceneio.ply import LOGIT_EPS

from .losses import as_rgb, photometric_loss
from .parameters import ParamSelector, SplatParameters


logger = logging.getLogger(__name__)

DEFAULT_EPS = {
    'position': 1e-4,
    'scale': 1e-3,
    'rotation': 1e-3,
    'opacity': 1e-3,
    'color': 1e-3,
}


@dataclass(frozen=True)
class FiniteDifference:
    value: float
    # True when the parameter sat on its domain boundary and only one side was sampled.
    one_sided: bool = False


@dataclass(eq=False)
class AnalyticGradients:
    loss: float
    # dL/d opacity-logit, (N,)
    opacity: np.ndarray
    # dL/d SH coefficient, (N, K, 3)
    color: np.ndarray


def _background(background):
    return tuple(float(c) for c in (background if background is not None else default_background()))


def render_loss(scene: SplatScene, camera, target, background=None, threads: int = 1) -> float:
    return photometric_loss(render(scene, camera, threads=threads, background=_background(background)), target)


def _at_boundary(params: SplatParameters, selector: ParamSelector) -> int:
    """-1 at the lower edge of the parameter's domain, +1 at the upper, 0 inside."""
    if selector.group != 'opacity':
        return 0
    opacity = 1.0 / (1.0 + np.exp(-params.get(selector)))
    if opacity <= LOGIT_EPS * (1 + 1e-6):
        return -1
    if opacity >= 1.0 - LOGIT_EPS * (1 + 1e-6):
        return 1
    return 0


def finite_diff_gradient(
    scene: SplatScene,
    camera,
    target,
    selector: ParamSelector,
    eps: float | None = None,
    background=None,
) -> FiniteDifference:
    """(L(theta + eps) - L(theta - eps)) / (2 eps) through full renders.

    Opacity is differentiated in logit space and scale in log space. A
    parameter on the edge of its domain gets a one-sided difference pointing
    inward instead, and the result is flagged.
    """
    eps = DEFAULT_EPS[selector.group] if eps is None else float(eps)
    if not eps > 0:
        raise InvalidInputError(f'Finite-difference step must be positive, got {eps}.')
    if not 0 <= selector.splat < len(scene):
        raise InvalidInputError(f'Splat index {selector.splat} out of range for {len(scene)} splats.')
    params = SplatParameters.from_scene(scene)
    width = params.group(selector.group).shape[1]
    if not 0 <= selector.component < width:
        raise InvalidInputError(f'Component {selector.component} out of range for group {selector.group}.')
    theta = params.get(selector)

    def loss_at(value: float) -> float:
        return render_loss(params.with_value(selector, value).to_scene(), camera, target, background)

    side = _at_boundary(params, selector)
    if side < 0:
        return FiniteDifference((loss_at(theta + eps) - render_loss(scene, camera, target, background)) / eps, True)
    if side > 0:
        return FiniteDifference((render_loss(scene, camera, target, background) - loss_at(theta - eps)) / eps, True)
    return FiniteDifference((loss_at(theta + eps) - loss_at(theta - eps)) / (2.0 * eps))


def finite_diff_group(params: SplatParameters, views, group: str, eps: float | None = None, background=None) -> np.ndarray:
    """Central differences of the mean view loss for every component of a group."""
    eps = DEFAULT_EPS[group] if eps is None else float(eps)
    values = params.group(group)
    grad = np.zeros(values.shape)
    for splat in range(values.shape[0]):
        for component in range(values.shape[1]):
            selector = ParamSelector(group, splat, component)
            theta = params.get(selector)
            plus = params.with_value(selector, theta + eps).to_scene()
            minus = params.with_value(selector, theta - eps).to_scene()
            total = 0.0
            for camera, target in views:
                total += render_loss(plus, camera, target, background) - render_loss(minus, camera, target, background)
            grad[splat, component] = total / (2.0 * eps * len(views))
    return grad.reshape(params.field_shape(group))


def _tile_gradients(prepared: PreparedScene, ranks, tile, target, background, scale):
    camera = prepared.camera
    col0, row0, width, height = tile
    cols = np.arange(width) + col0 + camera.col_offset
    rows = np.arange(height) + row0 + camera.row_offset
    stack = evaluate_fragments(prepared, ranks, cols, rows)
    colors = prepared.colors[ranks]
    result = composite_stack(stack, colors, background)

    diff = result.color - target[row0:row0 + height, col0:col0 + width]
    abs_sum = float(np.abs(diff).sum())
    if ranks.size == 0:
        return abs_sum, ranks, np.zeros(0), np.zeros((0, 3))
    g = np.sign(diff) * scale

    weight = stack.alpha * result.transmittance
    d_color = np.einsum('khw,hwc->kc', weight, g)

    weighted = weight[..., None] * colors[:, None, None, :]
    from_here = np.cumsum(weighted[::-1], axis=0)[::-1]
    behind = from_here - weighted + result.final_transmittance[None, :, :, None] * np.asarray(background)
    d_alpha_color = result.transmittance[..., None] * colors[:, None, None, :] - behind / (1.0 - stack.alpha)[..., None]
    d_alpha = np.einsum('khwc,hwc->khw', d_alpha_color, g)
    # alpha = opacity * G while neither culled nor clamped.
    active = (stack.alpha > 0) & ~stack.clamped
    d_opacity = np.where(active, d_alpha * stack.gaussian, 0.0).sum(axis=(1, 2))
    return abs_sum, ranks, d_opacity, d_color


def analytic_gradients(scene: SplatScene, camera, target, background=None, threads: int = 1) -> AnalyticGradients:
    """Loss plus dL/d(opacity logit) and dL/d(SH coefficients) for one view.

    Position, scale and rotation enter through the ray-splat intersection and
    have no closed form here; use `finite_diff_group` for them.
    """
    background = _background(background)
    target = as_rgb(target)
    if target.shape[:2] != (camera.height, camera.width):
        raise InvalidInputError(f'Target {target.shape[:2]} does not match camera {(camera.height, camera.width)}.')
    count = len(scene)
    k = scene.sh_coeffs.shape[1]
    scale = 1.0 / target.size
    if count == 0:
        loss = photometric_loss(render(scene, camera, threads=1, background=background), target)
        return AnalyticGradients(loss, np.zeros(0), np.zeros((0, k, 3)))

    prepared = PreparedScene.build(scene, camera)
    tiles = work_tiles(camera.width, camera.height)
    tiles_x = -(-camera.width // TILE_SIZE)
    tiles_y = -(-camera.height // TILE_SIZE)
    bins = bin_splats(prepared, tiles_x, tiles_y)

    def run(index: int):
        return _tile_gradients(prepared, bins[index], tiles[index], target, background, scale)

    if threads == 1:
        parts = [run(index) for index in range(len(tiles))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(tiles))))

    abs_sum = 0.0
    d_opacity = np.zeros(count)
    d_color = np.zeros((count, 3))
    for tile_abs, ranks, tile_opacity, tile_color in parts:
        abs_sum += tile_abs
        np.add.at(d_opacity, ranks, tile_opacity)
        np.add.at(d_color, ranks, tile_color)

    opacity = prepared.opacities
    d_logit = d_opacity * opacity * (1.0 - opacity)
    # The colour clamp at zero cuts the gradient of that channel.
    d_color = np.where(prepared.raw_colors > 0, d_color, 0.0)
    dirs = camera.view_direction_to(scene.centers[prepared.order])
    basis = sh_basis(scene.sh_degree, dirs)
    d_coeffs = basis[:, :, None] * d_color[:, None, :]

    order = prepared.order
    out_opacity = np.zeros(count)
    out_color = np.zeros((count, k, 3))
    out_opacity[order] = d_logit
    out_color[order] = d_coeffs
    return AnalyticGradients(abs_sum * scale, out_opacity, out_color)
