import numpy as np

from apps.partition.cells import CameraRecord, PinholeIntrinsics
from apps.projection.cameras import RigidTransform


NADIR = np.diag([1.0, 1.0, -1.0])


def nadir_camera(camera_id, x, y, height=100.0, focal=500.0, width=640, image_height=480, rotation=None):
    """Camera at (x, y, height) looking straight down, image rows running south."""
    rotation = NADIR if rotation is None else rotation @ NADIR
    center = np.array([x, y, height], dtype=float)
    pose = RigidTransform(rotation, -rotation @ center)
    intrinsics = PinholeIntrinsics(width, image_height, focal, focal, width / 2, image_height / 2)
    return CameraRecord(camera_id, pose, intrinsics)


def survey_grid(cols, rows, spacing=10.0, height=100.0, **kwargs):
    cameras = []
    for j in range(rows):
        for i in range(cols):
            cameras.append(nadir_camera(len(cameras), i * spacing, j * spacing, height, **kwargs))
    return cameras
