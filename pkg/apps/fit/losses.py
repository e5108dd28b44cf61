import numpy as np

from apps.core.exceptions import InvalidInputError
from apps.rasterizer.framebuffer import FrameBuffer


def as_rgb(image) -> np.ndarray:
    if isinstance(image, FrameBuffer):
        return image.color
    rgb = np.asarray(image, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInputError(f'Expected an (H, W, 3) image, got shape {rgb.shape}.')
    return rgb


def photometric_loss(rendered, target) -> float:
    """Mean absolute difference over every pixel and RGB channel."""
    rendered = as_rgb(rendered)
    target = as_rgb(target)
    if rendered.shape != target.shape:
        raise InvalidInputError(f'Rendered image {rendered.shape[:2]} and target {target.shape[:2]} differ in size.')
    return float(np.mean(np.abs(rendered - target)))


def loss_gradient(rendered, target) -> np.ndarray:
    """dL/dC per pixel and channel; zero where the images agree."""
    rendered = as_rgb(rendered)
    target = as_rgb(target)
    return np.sign(rendered - target) / rendered.size
