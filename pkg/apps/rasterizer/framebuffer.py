from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidInputError


# Below this accumulated opacity a pixel has no normalized depth.
NORMALIZE_MIN_ALPHA = 0.01


@dataclass(eq=False)
class FrameBuffer:
    """Rendered color (linear RGB), raw depth D and accumulated opacity."""

    width: int
    height: int
    color: np.ndarray
    depth: np.ndarray
    accum_alpha: np.ndarray
    background: tuple[float, float, float]

    @classmethod
    def blank(cls, width: int, height: int, background) -> 'FrameBuffer':
        bg = tuple(float(c) for c in background)
        color = np.empty((height, width, 3))
        color[...] = bg
        return cls(width, height, color, np.zeros((height, width)), np.zeros((height, width)), bg)

    def place(self, other: 'FrameBuffer', col0: int, row0: int):
        """Copy `other` into this buffer with its top-left pixel at (col0, row0)."""
        if col0 + other.width > self.width or row0 + other.height > self.height:
            raise InvalidInputError('Placed buffer does not fit inside the frame.')
        rows = slice(row0, row0 + other.height)
        cols = slice(col0, col0 + other.width)
        self.color[rows, cols] = other.color
        self.depth[rows, cols] = other.depth
        self.accum_alpha[rows, cols] = other.accum_alpha

    def depth_normalized(self, min_alpha: float = NORMALIZE_MIN_ALPHA) -> np.ndarray:
        """D / accum_alpha where accum_alpha > min_alpha, 0 elsewhere."""
        covered = self.accum_alpha > min_alpha
        return np.where(covered, self.depth / np.where(covered, self.accum_alpha, 1.0), 0.0)

    def coverage_mask(self, min_alpha: float = NORMALIZE_MIN_ALPHA) -> np.ndarray:
        return self.accum_alpha > min_alpha
