"""Splat attributes in the unconstrained space the optimizer works in."""
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidInputError
from apps.core.splats import SplatScene
from apps.sceneio.ply import logit, sigmoid


GROUPS = ('position', 'scale', 'rotation', 'opacity', 'color')

# Field holding each group, and how many values one splat carries in it.
_FIELDS = {
    'position': 'centers',
    'scale': 'log_scales',
    'rotation': 'rotations',
    'opacity': 'opacity_logits',
    'color': 'sh_coeffs',
}


@dataclass(frozen=True)
class ParamSelector:
    """One scalar parameter: group, splat index and flat component index."""

    group: str
    splat: int
    component: int = 0

    def __post_init__(self):
        if self.group not in GROUPS:
            raise InvalidInputError(f'Unknown parameter group {self.group!r}; expected one of {", ".join(GROUPS)}.')


@dataclass(eq=False)
class SplatParameters:
    centers: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    crs_note: str = ''

    @classmethod
    def from_scene(cls, scene: SplatScene) -> 'SplatParameters':
        return cls(
            centers=scene.centers.copy(),
            log_scales=np.log(scene.scales),
            rotations=scene.rotations.copy(),
            opacity_logits=logit(scene.opacities),
            sh_coeffs=scene.sh_coeffs.copy(),
            crs_note=scene.crs_note,
        )

    def to_scene(self) -> SplatScene:
        return SplatScene(
            centers=self.centers,
            rotations=self.rotations,
            scales=np.exp(self.log_scales),
            opacities=sigmoid(self.opacity_logits),
            sh_coeffs=self.sh_coeffs,
            crs_note=self.crs_note,
        )

    def copy(self) -> 'SplatParameters':
        return SplatParameters(
            self.centers.copy(),
            self.log_scales.copy(),
            self.rotations.copy(),
            self.opacity_logits.copy(),
            self.sh_coeffs.copy(),
            self.crs_note,
        )

    def group(self, name: str) -> np.ndarray:
        """Writable (N, per_splat) view of one group."""
        array = getattr(self, _FIELDS[name])
        return array.reshape(array.shape[0], -1)

    def field_shape(self, name: str) -> tuple[int, ...]:
        return getattr(self, _FIELDS[name]).shape

    def get(self, selector: ParamSelector) -> float:
        return float(self.group(selector.group)[selector.splat, selector.component])

    def with_value(self, selector: ParamSelector, value: float) -> 'SplatParameters':
        out = self.copy()
        out.group(selector.group)[selector.splat, selector.component] = value
        return out

    def normalize_rotations(self):
        norms = np.linalg.norm(self.rotations, axis=1, keepdims=True)
        self.rotations = self.rotations / norms

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.group(name).reshape(-1) for name in GROUPS])
