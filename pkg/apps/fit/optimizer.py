import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from apps.core.conf import default_background, default_threads, get_setting
from apps.core.exceptions import FitDivergedError, InvalidInputError
from apps.core.splats import SplatScene

from .gradients import analytic_gradients, finite_diff_group
from .losses import as_rgb
from .parameters import GROUPS, SplatParameters


logger = logging.getLogger(__name__)

GRADIENT_MODES = ('finite-difference', 'analytic-where-available')
ANALYTIC_GROUPS = ('opacity', 'color')

DEFAULT_LEARNING_RATES = {
    'position': 0.01,
    'scale': 0.005,
    'rotation': 0.005,
    'opacity': 0.05,
    'color': 0.05,
}


def _default_iterations() -> int:
    return int(get_setting('ORTHOSPLAT_FIT_ITERATIONS', 200))


@dataclass(frozen=True)
class FitConfig:
    iterations: int = field(default_factory=_default_iterations)
    learning_rates: dict = field(default_factory=lambda: dict(DEFAULT_LEARNING_RATES))
    # Groups left out keep their initial values.
    groups: tuple[str, ...] = ('opacity', 'color')
    loss: str = 'L1'
    gradient_mode: str = 'analytic-where-available'
    # Every learning rate decays exponentially to this fraction of its start value.
    lr_final_ratio: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise InvalidInputError(f'Fitting needs at least one iteration, got {self.iterations}.')
        if self.loss != 'L1':
            raise InvalidInputError(f'Unsupported loss {self.loss!r}; only L1 is available.')
        if self.gradient_mode not in GRADIENT_MODES:
            raise InvalidInputError(f'Unknown gradient mode {self.gradient_mode!r}.')
        unknown = set(self.groups) - set(GROUPS)
        if unknown:
            raise InvalidInputError(f'Unknown parameter groups: {", ".join(sorted(unknown))}.')
        rates = dict(DEFAULT_LEARNING_RATES)
        rates.update(self.learning_rates)
        for name, rate in rates.items():
            if name not in GROUPS:
                raise InvalidInputError(f'Learning rate given for unknown group {name!r}.')
            if not (rate > 0 and math.isfinite(rate)):
                raise InvalidInputError(f'Learning rate for {name} must be positive, got {rate}.')
        if not 0 < self.lr_final_ratio <= 1:
            raise InvalidInputError('lr_final_ratio must lie in (0, 1].')
        object.__setattr__(self, 'iterations', int(self.iterations))
        object.__setattr__(self, 'learning_rates', rates)
        object.__setattr__(self, 'groups', tuple(name for name in GROUPS if name in self.groups))

    def learning_rate(self, group: str, iteration: int) -> float:
        progress = iteration / max(self.iterations - 1, 1)
        return self.learning_rates[group] * self.lr_final_ratio ** progress

    def as_dict(self) -> dict:
        data = asdict(self)
        data['groups'] = list(self.groups)
        return data


@dataclass(eq=False)
class FitView:
    camera: object
    target: np.ndarray


@dataclass(eq=False)
class FitResult:
    scene: SplatScene
    losses: list[float]
    config: FitConfig


class Adam:
    """Per-group Adam moments over arrays of fixed shape."""

    def __init__(self, config: FitConfig):
        self.config = config
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.steps = 0

    def step(self, params: SplatParameters, grads: dict[str, np.ndarray], iteration: int):
        config = self.config
        self.steps += 1
        for name, grad in grads.items():
            m = self.m.get(name, np.zeros_like(grad))
            v = self.v.get(name, np.zeros_like(grad))
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - config.beta1 ** self.steps)
            v_hat = v / (1 - config.beta2 ** self.steps)
            update = config.learning_rate(name, iteration) * m_hat / (np.sqrt(v_hat) + config.adam_eps)
            target = params.group(name)
            target -= update.reshape(target.shape)
        if 'rotation' in grads:
            params.normalize_rotations()


def _view_gradients(scene: SplatScene, views: Sequence[FitView], background, threads: int):
    """Mean loss and mean analytic gradients over all views."""

    def run(view: FitView):
        return analytic_gradients(scene, view.camera, view.target, background)

    if threads == 1 or len(views) == 1:
        results = [run(view) for view in views]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(views))) as pool:
            results = list(pool.map(run, views))
    count = len(views)
    loss = sum(result.loss for result in results) / count
    opacity = sum(result.opacity for result in results) / count
    color = sum(result.color for result in results) / count
    return loss, opacity, color


def fit(
    scene_init: SplatScene,
    views: Sequence,
    config: FitConfig | None = None,
    background=None,
    threads: int | None = None,
) -> FitResult:
    """Gradient descent (Adam) on the mean L1 loss over `views`.

    `views` holds FitView objects or (camera, target) pairs. The splat count
    never changes. Scales and opacity are optimized in log and logit space
    and quaternions are re-normalized after every step.
    """
    config = config or FitConfig()
    views = [view if isinstance(view, FitView) else FitView(view[0], view[1]) for view in views]
    if not views:
        raise InvalidInputError('Fitting needs at least one target view.')
    for view in views:
        view.target = as_rgb(view.target)
        if view.target.shape[:2] != (view.camera.height, view.camera.width):
            raise InvalidInputError('Target image size does not match its camera.')
    background = tuple(float(c) for c in (background if background is not None else default_background()))
    threads = threads or default_threads()
    pairs = [(view.camera, view.target) for view in views]

    params = SplatParameters.from_scene(scene_init)
    scene = scene_init
    optimizer = Adam(config)
    losses = []
    for iteration in range(config.iterations):
        loss, d_opacity, d_color = _view_gradients(scene, views, background, threads)
        if not math.isfinite(loss):
            raise FitDivergedError(iteration)
        losses.append(loss)
        if loss == 0.0:
            # Zero is a valid L1 subgradient at an exact fit.
            continue

        grads = {}
        for group in config.groups:
            if group == 'opacity' and config.gradient_mode != 'finite-difference':
                grads[group] = d_opacity
            elif group == 'color' and config.gradient_mode != 'finite-difference':
                grads[group] = d_color
            else:
                grads[group] = finite_diff_group(params, pairs, group, background=background)
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise FitDivergedError(iteration)
        optimizer.step(params, grads, iteration)
        scene = params.to_scene()
        if iteration % 50 == 0:
            logger.info('Fit iteration %d: loss %.6g.', iteration, loss)

    logger.info('Fit finished after %d iterations: loss %.6g -> %.6g.', config.iterations, losses[0], losses[-1])
    return FitResult(scene, losses, config)


def write_loss_csv(losses: Sequence[float], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['iteration', 'loss'])
        for iteration, loss in enumerate(losses):
            writer.writerow([iteration, repr(float(loss))])
    return path
