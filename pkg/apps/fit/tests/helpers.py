import numpy as np

from apps.core.sh import rgb_to_sh
from apps.core.splats import SplatScene
from apps.projection.cameras import OrthoCamera, RigidTransform, ViewBox


def top_camera(size=16, gsd=1.0, depth=10.0):
    """Orthographic camera over [0, size*gsd]^2 looking along +z."""
    extent = size * gsd
    return OrthoCamera(RigidTransform.identity(), ViewBox(0.0, extent, 0.0, extent, 0.0, depth), size, size)


def facing_scene(rng, count, extent=16.0, scale_range=(2.0, 3.0), opacity_range=(0.5, 0.8), sh_degree=0, margin=3.0):
    """Splats facing the camera (normal along z), spun in-plane, colours inside (0.15, 0.85)."""
    angles = rng.uniform(0, np.pi, count)
    rotations = np.column_stack([np.cos(angles), np.zeros(count), np.zeros(count), np.sin(angles)])
    sh = np.zeros((count, (sh_degree + 1) ** 2, 3))
    sh[:, 0, :] = rgb_to_sh(rng.uniform(0.15, 0.85, (count, 3)))
    if sh_degree:
        sh[:, 1:, :] = rng.uniform(-0.05, 0.05, (count, sh.shape[1] - 1, 3))
    centers = np.column_stack([
        rng.uniform(margin, extent - margin, count),
        rng.uniform(margin, extent - margin, count),
        rng.uniform(1.0, 9.0, count),
    ])
    return SplatScene(centers, rotations, rng.uniform(*scale_range, (count, 2)), rng.uniform(*opacity_range, count), sh)
