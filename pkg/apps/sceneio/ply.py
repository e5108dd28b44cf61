"""Splat scenes as binary little-endian PLY in the common 2DGS vertex layout."""
import logging
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from apps.core.exceptions import InvalidInputError, ParseError, SchemaError
from apps.core.sh import sh_degree_for_count
from apps.core.splats import SplatScene


logger = logging.getLogger(__name__)

REQUIRED_PROPERTIES = (
    'x', 'y', 'z',
    'f_dc_0', 'f_dc_1', 'f_dc_2',
    'opacity',
    'scale_0', 'scale_1',
    'rot_0', 'rot_1', 'rot_2', 'rot_3',
)

# Opacities are clipped this far from 0 and 1 before taking the logit.
LOGIT_EPS = 1e-7

CRS_COMMENT = 'crs: '


def sigmoid(values):
    return 1.0 / (1.0 + np.exp(-np.asarray(values, dtype=np.float64)))


def logit(values):
    p = np.clip(np.asarray(values, dtype=np.float64), LOGIT_EPS, 1.0 - LOGIT_EPS)
    return np.log(p / (1.0 - p))


def _numbered(names, prefix):
    return sorted((name for name in names if name.startswith(prefix)), key=lambda name: int(name[len(prefix):]))


def read_splat_ply(path) -> SplatScene:
    path = Path(path)
    try:
        plydata = PlyData.read(str(path))
    except FileNotFoundError as exc:
        raise ParseError('File does not exist.', path) from exc
    except (PlyParseError, ValueError) as exc:
        raise ParseError(f'Not a readable PLY file: {exc}', path) from exc
    try:
        vertex = plydata['vertex']
    except KeyError:
        raise SchemaError(f'{path}: no vertex element.', 'vertex') from None

    names = [prop.name for prop in vertex.properties]
    for name in REQUIRED_PROPERTIES:
        if name not in names:
            raise SchemaError(f'{path}: missing vertex property {name!r}.', name)

    def column(name):
        return np.asarray(vertex[name], dtype=np.float64)

    count = vertex.count
    rest_names = _numbered(names, 'f_rest_')
    if len(rest_names) % 3:
        raise SchemaError(f'{path}: {len(rest_names)} f_rest properties is not a multiple of 3.', 'f_rest_0')
    per_channel = len(rest_names) // 3
    sh_degree_for_count(per_channel + 1)

    raw = {name: column(name) for name in REQUIRED_PROPERTIES}
    rest = np.stack([column(name) for name in rest_names], axis=1) if rest_names else np.zeros((count, 0))
    for name, values in [*raw.items(), ('f_rest', rest)]:
        finite = np.isfinite(values) if values.ndim == 1 else np.all(np.isfinite(values), axis=1)
        bad = np.flatnonzero(~finite)
        if bad.size:
            raise InvalidInputError(f'{path}: record {int(bad[0])} has a non-finite {name}.')

    sh = np.zeros((count, per_channel + 1, 3))
    sh[:, 0, :] = np.stack([raw['f_dc_0'], raw['f_dc_1'], raw['f_dc_2']], axis=1)
    if per_channel:
        # Stored channel-major: all red coefficients, then green, then blue.
        sh[:, 1:, :] = rest.reshape(count, 3, per_channel).transpose(0, 2, 1)

    crs_note = ''
    for comment in plydata.comments:
        if comment.startswith(CRS_COMMENT):
            crs_note = comment[len(CRS_COMMENT):]

    rotations = np.stack([raw[f'rot_{i}'] for i in range(4)], axis=1)
    try:
        scene = SplatScene(
            centers=np.stack([raw['x'], raw['y'], raw['z']], axis=1),
            rotations=rotations,
            scales=np.exp(np.stack([raw['scale_0'], raw['scale_1']], axis=1)),
            opacities=sigmoid(raw['opacity']),
            sh_coeffs=sh,
            crs_note=crs_note,
        )
    except InvalidInputError as exc:
        raise InvalidInputError(f'{path}: {exc}') from exc
    logger.info('Read %d splats (SH degree %d) from %s.', len(scene), scene.sh_degree, path)
    return scene


def write_splat_ply(scene: SplatScene, path) -> Path:
    path = Path(path)
    count = len(scene)
    per_channel = scene.sh_coeffs.shape[1] - 1
    names = ['x', 'y', 'z', 'nx', 'ny', 'nz', 'f_dc_0', 'f_dc_1', 'f_dc_2']
    names += [f'f_rest_{i}' for i in range(3 * per_channel)]
    names += ['opacity', 'scale_0', 'scale_1', 'rot_0', 'rot_1', 'rot_2', 'rot_3']

    columns = [
        scene.centers,
        np.zeros((count, 3)),
        scene.sh_coeffs[:, 0, :],
        scene.sh_coeffs[:, 1:, :].transpose(0, 2, 1).reshape(count, 3 * per_channel),
        logit(scene.opacities)[:, None],
        np.log(scene.scales),
        scene.rotations,
    ]
    values = np.concatenate(columns, axis=1)
    elements = np.empty(count, dtype=[(name, 'f4') for name in names])
    for index, name in enumerate(names):
        elements[name] = values[:, index]

    comments = [CRS_COMMENT + scene.crs_note] if scene.crs_note else []
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        PlyData([PlyElement.describe(elements, 'vertex')], text=False, byte_order='<', comments=comments).write(str(path))
    except OSError as exc:
        raise InvalidInputError(f'Could not write {path}: {exc}') from exc
    return path
