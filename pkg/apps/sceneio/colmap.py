"""COLMAP sparse models in the text format (cameras.txt, images.txt, points3D.txt)."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidInputError, ParseError
from apps.core.splats import quaternion_from_matrix, rotation_matrix
from apps.partition.cells import CameraRecord, PinholeIntrinsics
from apps.projection.cameras import RigidTransform


logger = logging.getLogger(__name__)

CAMERAS_FILE = 'cameras.txt'
IMAGES_FILE = 'images.txt'
POINTS_FILE = 'points3D.txt'

SUPPORTED_MODELS = ('SIMPLE_PINHOLE', 'PINHOLE')

# COLMAP cameras look along +z with y pointing down the image; view space
# here keeps y up, so poses pass through this flip in both directions.
Y_FLIP = np.diag([1.0, -1.0, 1.0])


@dataclass(frozen=True, eq=False)
class SparseModel:
    cameras: tuple[CameraRecord, ...]
    points: np.ndarray
    colors: np.ndarray
    errors: np.ndarray | None = None
    point_ids: np.ndarray | None = None
    track_elements: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        count = points.shape[0]
        colors = np.asarray(self.colors, dtype=np.uint8).reshape(count, 3)
        errors = np.zeros(count) if self.errors is None else np.asarray(self.errors, dtype=np.float64).reshape(count)
        point_ids = (
            np.arange(1, count + 1, dtype=np.int64) if self.point_ids is None
            else np.asarray(self.point_ids, dtype=np.int64).reshape(count)
        )
        elements = tuple(np.asarray(e, dtype=np.int64).reshape(-1, 2) for e in self.track_elements)
        if not elements:
            elements = tuple(np.zeros((0, 2), dtype=np.int64) for _ in range(count))
        if len(elements) != count:
            raise InvalidInputError(f'{len(elements)} tracks given for {count} points.')
        known = {camera.id for camera in self.cameras}
        for index, track in enumerate(elements):
            unknown = set(track[:, 0].tolist()) - known
            if unknown:
                raise InvalidInputError(f'Point {int(point_ids[index])} is tracked by unknown image {min(unknown)}.')
        object.__setattr__(self, 'cameras', tuple(self.cameras))
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'colors', colors)
        object.__setattr__(self, 'errors', errors)
        object.__setattr__(self, 'point_ids', point_ids)
        object.__setattr__(self, 'track_elements', elements)

    @property
    def tracks(self) -> list[tuple[int, ...]]:
        """Image ids observing each point, sorted and without repeats."""
        return [tuple(sorted(set(track[:, 0].tolist()))) for track in self.track_elements]

    def camera(self, camera_id: int) -> CameraRecord:
        for camera in self.cameras:
            if camera.id == camera_id:
                return camera
        raise InvalidInputError(f'No camera with id {camera_id}.')

    def replace(self, **fields) -> 'SparseModel':
        values = {
            'cameras': self.cameras,
            'points': self.points,
            'colors': self.colors,
            'errors': self.errors,
            'point_ids': self.point_ids,
            'track_elements': self.track_elements,
        }
        values.update(fields)
        return SparseModel(**values)


def _data_lines(path: Path):
    """(line_number, text) for every line, comments dropped, blanks kept."""
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ParseError('File does not exist.', path) from exc
    for number, line in enumerate(text.splitlines(), start=1):
        if line.startswith('#'):
            continue
        yield number, line.strip()


def pose_from_colmap(qvec, tvec) -> RigidTransform:
    rotation = Y_FLIP @ rotation_matrix(qvec)
    return RigidTransform(rotation, Y_FLIP @ np.asarray(tvec, dtype=np.float64))


def pose_to_colmap(pose: RigidTransform) -> tuple[np.ndarray, np.ndarray]:
    rotation = Y_FLIP @ pose.rotation
    if np.linalg.det(rotation) < 0:
        raise InvalidInputError('Pose has no COLMAP equivalent (mirrored camera frame).')
    return quaternion_from_matrix(rotation), Y_FLIP @ pose.translation


def read_cameras_text(path) -> dict[int, PinholeIntrinsics]:
    path = Path(path)
    intrinsics = {}
    for number, line in _data_lines(path):
        if not line:
            continue
        elems = line.split()
        try:
            camera_id, model = int(elems[0]), elems[1]
            width, height = int(elems[2]), int(elems[3])
            params = [float(value) for value in elems[4:]]
        except (IndexError, ValueError) as exc:
            raise ParseError(f'Malformed camera line: {exc}', path, number) from exc
        if model not in SUPPORTED_MODELS:
            raise ParseError(f'Unsupported camera model {model}; expected one of {", ".join(SUPPORTED_MODELS)}.', path, number)
        expected = 3 if model == 'SIMPLE_PINHOLE' else 4
        if len(params) != expected:
            raise ParseError(f'{model} takes {expected} parameters, got {len(params)}.', path, number)
        if model == 'SIMPLE_PINHOLE':
            f, cx, cy = params
            fx = fy = f
        else:
            fx, fy, cx, cy = params
        try:
            intrinsics[camera_id] = PinholeIntrinsics(width, height, fx, fy, cx, cy, model=model)
        except InvalidInputError as exc:
            raise ParseError(str(exc), path, number) from exc
    return intrinsics


def read_images_text(path, intrinsics: dict[int, PinholeIntrinsics]) -> list[CameraRecord]:
    path = Path(path)
    cameras = []
    expecting_points = False
    for number, line in _data_lines(path):
        if expecting_points:
            # Keypoints are not used; the line only has to be consumed, even when empty.
            expecting_points = False
            continue
        if not line:
            continue
        elems = line.split()
        try:
            image_id = int(elems[0])
            qvec = [float(value) for value in elems[1:5]]
            tvec = [float(value) for value in elems[5:8]]
            camera_id = int(elems[8])
            name = elems[9]
        except (IndexError, ValueError) as exc:
            raise ParseError(f'Malformed image line: {exc}', path, number) from exc
        if camera_id not in intrinsics:
            raise ParseError(f'Image {image_id} references unknown camera {camera_id}.', path, number)
        try:
            pose = pose_from_colmap(qvec, tvec)
        except InvalidInputError as exc:
            raise ParseError(str(exc), path, number) from exc
        cameras.append(CameraRecord(image_id, pose, intrinsics[camera_id], image_path=name))
        expecting_points = True
    return cameras


def read_points_text(path, image_ids) -> dict:
    path = Path(path)
    image_ids = set(image_ids)
    point_ids, points, colors, errors, tracks = [], [], [], [], []
    for number, line in _data_lines(path):
        if not line:
            continue
        elems = line.split()
        try:
            point_ids.append(int(elems[0]))
            points.append([float(value) for value in elems[1:4]])
            colors.append([int(value) for value in elems[4:7]])
            errors.append(float(elems[7]))
            track = np.array([int(value) for value in elems[8:]], dtype=np.int64)
        except (IndexError, ValueError) as exc:
            raise ParseError(f'Malformed point line: {exc}', path, number) from exc
        if len(points[-1]) != 3 or len(colors[-1]) != 3 or track.size % 2:
            raise ParseError('Point line has the wrong number of fields.', path, number)
        track = track.reshape(-1, 2)
        unknown = set(track[:, 0].tolist()) - image_ids
        if unknown:
            raise ParseError(f'Track references unknown image {min(unknown)}.', path, number)
        tracks.append(track)
    return {
        'points': np.array(points, dtype=np.float64).reshape(-1, 3),
        'colors': np.array(colors, dtype=np.uint8).reshape(-1, 3),
        'errors': np.array(errors, dtype=np.float64),
        'point_ids': np.array(point_ids, dtype=np.int64),
        'track_elements': tuple(tracks),
    }


def read_colmap_sparse(model_dir) -> SparseModel:
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise ParseError('Sparse model directory does not exist.', model_dir)
    intrinsics = read_cameras_text(model_dir / CAMERAS_FILE)
    cameras = read_images_text(model_dir / IMAGES_FILE, intrinsics)
    points = read_points_text(model_dir / POINTS_FILE, [camera.id for camera in cameras])
    model = SparseModel(cameras=tuple(cameras), **points)
    logger.info('Read %d images and %d points from %s.', len(model.cameras), len(model.points), model_dir)
    return model


def _camera_line(camera: CameraRecord) -> str:
    k = camera.intrinsics
    if k.model == 'SIMPLE_PINHOLE' and k.fx == k.fy:
        params = [k.fx, k.cx, k.cy]
    else:
        params = [k.fx, k.fy, k.cx, k.cy]
    model = 'SIMPLE_PINHOLE' if len(params) == 3 else 'PINHOLE'
    return ' '.join([str(camera.id), model, str(k.width), str(k.height), *map(repr, params)])


def write_colmap_sparse(model: SparseModel, model_dir) -> Path:
    """Writes one COLMAP camera per image (camera id = image id) and empty
    keypoint lines; track (image id, keypoint index) pairs are kept."""
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    camera_lines = ['# Camera list with one line of data per camera:']
    image_lines = ['# Image list with two lines of data per image:']
    for camera in model.cameras:
        camera_lines.append(_camera_line(camera))
        qvec, tvec = pose_to_colmap(camera.pose)
        values = [*map(float, qvec), *map(float, tvec)]
        image_lines.append(' '.join([str(camera.id), *map(repr, values), str(camera.id), camera.image_path or f'{camera.id}.png']))
        image_lines.append('')
    point_lines = ['# 3D point list with one line of data per point:']
    for index, point_id in enumerate(model.point_ids):
        fields = [str(int(point_id)), *map(repr, model.points[index].tolist()), *map(str, model.colors[index].tolist())]
        fields.append(repr(float(model.errors[index])))
        fields.extend(str(value) for value in model.track_elements[index].reshape(-1).tolist())
        point_lines.append(' '.join(fields))

    try:
        (model_dir / CAMERAS_FILE).write_text('\n'.join(camera_lines) + '\n')
        (model_dir / IMAGES_FILE).write_text('\n'.join(image_lines) + '\n')
        (model_dir / POINTS_FILE).write_text('\n'.join(point_lines) + '\n')
    except OSError as exc:
        raise InvalidInputError(f'Could not write sparse model to {model_dir}: {exc}') from exc
    return model_dir
