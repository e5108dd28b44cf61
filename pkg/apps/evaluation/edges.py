import logging

import numpy as np
from scipy import ndimage

from apps.core.conf import get_setting
from apps.core.exceptions import InvalidInputError
from apps.sceneio.rasters import quantize


logger = logging.getLogger(__name__)

EDGE_COLOR = (0, 255, 0)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# (row, col) step along the gradient for each quantized direction.
_DIRECTION_STEPS = ((0, 1), (1, 1), (1, 0), (1, -1))


def normalize(values, mask=None) -> np.ndarray:
    """Min-max stretch to [0, 1] over `mask`; constant input and masked-out
    pixels map to 0."""
    values = np.asarray(values, dtype=np.float64)
    mask = np.ones(values.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    out = np.zeros(values.shape)
    if not np.any(mask):
        return out
    low = float(values[mask].min())
    span = float(values[mask].max()) - low
    if span > 0:
        out[mask] = (values[mask] - low) / span
    return out


def gradients(image: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude (value change across two pixels) and direction
    bin 0..3 of the blurred image."""
    blurred = ndimage.gaussian_filter(image, sigma, mode='nearest')
    gx = ndimage.sobel(blurred, axis=1, mode='nearest') / 4.0
    gy = ndimage.sobel(blurred, axis=0, mode='nearest') / 4.0
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = (np.floor((angle + 22.5) / 45.0).astype(np.int64)) % 4
    return magnitude, bins


def suppress_non_maxima(magnitude: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """Ridge pixels of the magnitude along the gradient direction.

    Ties between the two pixels straddling a step resolve to the one on the
    negative side, which keeps ridges one pixel wide.
    """
    padded = np.pad(magnitude, 1, mode='constant')
    height, width = magnitude.shape
    keep = np.zeros(magnitude.shape, dtype=bool)
    for direction, (dr, dc) in enumerate(_DIRECTION_STEPS):
        ahead = padded[1 + dr:1 + dr + height, 1 + dc:1 + dc + width]
        behind = padded[1 - dr:1 - dr + height, 1 - dc:1 - dc + width]
        ridge = (magnitude >= ahead) & (magnitude > behind)
        keep |= (bins == direction) & ridge
    return keep & (magnitude > 0)


def hysteresis(candidates: np.ndarray, magnitude: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = candidates & (magnitude > low)
    strong = weak & (magnitude > high)
    labels, count = ndimage.label(weak, structure=_EIGHT_CONNECTED)
    if count == 0:
        return np.zeros(candidates.shape, dtype=bool)
    keep = np.zeros(count + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def canny_edges(image, low=None, high=None, sigma=None, return_suppressed=False):
    """Gaussian blur, Sobel gradients, non-maximum suppression and 8-connected
    hysteresis. Thresholds apply to the gradient magnitude of the image as
    given, so depth is normally stretched to [0, 1] first."""
    low = float(get_setting('ORTHOSPLAT_CANNY_LOW', 0.1) if low is None else low)
    high = float(get_setting('ORTHOSPLAT_CANNY_HIGH', 0.3) if high is None else high)
    sigma = float(get_setting('ORTHOSPLAT_CANNY_SIGMA', 1.4) if sigma is None else sigma)
    if not 0 <= low < high:
        raise InvalidInputError(f'Canny thresholds need 0 <= low < high, got {low}, {high}.')
    if not sigma > 0:
        raise InvalidInputError(f'Canny sigma must be positive, got {sigma}.')
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise InvalidInputError(f'Edge detection needs a single-channel image, got shape {image.shape}.')

    magnitude, bins = gradients(image, sigma)
    thin = suppress_non_maxima(magnitude, bins)
    edges = hysteresis(thin, magnitude, low, high)
    logger.debug('Canny kept %d of %d ridge pixels.', int(edges.sum()), int(thin.sum()))
    if return_suppressed:
        return edges, thin & (magnitude > low)
    return edges


def depth_overlays(tdom_rgb, depth, mask=None, low=None, high=None, sigma=None):
    """Red composite (R replaced by height, taller is redder) and the TDOM
    with depth edges painted in EDGE_COLOR. Returns (composite, overlay, edges)."""
    rgb = np.asarray(tdom_rgb)
    depth = np.asarray(depth, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[:2] != depth.shape:
        raise InvalidInputError(f'TDOM {rgb.shape} and depth {depth.shape} do not match.')
    if rgb.dtype != np.uint8:
        raise InvalidInputError('Overlays expect an 8-bit TDOM.')
    height = normalize(-depth, mask)

    composite = rgb.copy()
    composite[..., 0] = quantize(height)

    edges = canny_edges(height, low, high, sigma)
    overlay = rgb.copy()
    overlay[edges] = EDGE_COLOR
    return composite, overlay, edges
