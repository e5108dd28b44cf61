"""Camera-balanced cells, expanded point selection and visibility-based
camera selection."""
import logging
from dataclasses import replace
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from apps.core.conf import get_setting
from apps.core.exceptions import InvalidInputError

from .cells import CameraRecord, Cell, PartitionPlan, Rect


logger = logging.getLogger(__name__)

# Box corners closer to the camera than this are clipped away before projection.
VISIBILITY_NEAR = 1e-3

_BOX_EDGES = [(a, b) for a in range(8) for b in range(a + 1, 8) if bin(a ^ b).count('1') == 1]


def _split_sizes(count: int, parts: int) -> list[int]:
    base, extra = divmod(count, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def _boundaries(sorted_values: np.ndarray, sizes: list[int], low: float, high: float) -> list[float]:
    edges = [low]
    start = 0
    for size in sizes[:-1]:
        start += size
        mid = 0.5 * (sorted_values[start - 1] + sorted_values[start])
        edges.append(float(min(max(mid, edges[-1]), high)))
    edges.append(high)
    return edges


def partition_cameras(cameras: Sequence[CameraRecord], m: int, n: int, extent: Rect | None = None) -> list[Cell]:
    """Split the ground plane into m columns by camera x, then each column
    into n rows by camera y, so every cell holds the same number of cameras
    up to one. Cells come back row-major, row 0 southernmost."""
    if m < 1 or n < 1:
        raise InvalidInputError(f'Grid must be at least 1x1, got {m}x{n}.')
    if len(cameras) < m * n:
        raise InvalidInputError(f'{len(cameras)} cameras cannot fill {m * n} cells.')
    ids = np.array([camera.id for camera in cameras])
    centers = np.array([camera.center for camera in cameras]).reshape(-1, 3)
    if extent is None:
        extent = Rect.from_points(centers)

    by_x = np.lexsort((ids, centers[:, 1], centers[:, 0]))
    col_sizes = _split_sizes(len(cameras), m)
    x_edges = _boundaries(centers[by_x, 0], col_sizes, extent.min_x, extent.max_x)

    grid: dict[tuple[int, int], Cell] = {}
    start = 0
    for col, size in enumerate(col_sizes):
        members = by_x[start:start + size]
        start += size
        by_y = members[np.lexsort((ids[members], centers[members, 0], centers[members, 1]))]
        row_sizes = _split_sizes(size, n)
        y_edges = _boundaries(centers[by_y, 1], row_sizes, extent.min_y, extent.max_y)
        row_start = 0
        for row, row_size in enumerate(row_sizes):
            chosen = by_y[row_start:row_start + row_size]
            row_start += row_size
            core = Rect(
                x_edges[col], y_edges[row], x_edges[col + 1], y_edges[row + 1],
                unbounded=(col == 0, col == m - 1, row == 0, row == n - 1),
            )
            grid[(row, col)] = Cell(
                index=(row, col),
                core_bounds=core,
                expanded_bounds=core,
                camera_ids=tuple(sorted(int(i) for i in ids[chosen])),
            )
    return [grid[(row, col)] for row in range(n) for col in range(m)]


def select_points(cell: Cell, points, expansion_ratio: float) -> np.ndarray:
    """Indices of points whose ground projection falls in the expanded cell."""
    if expansion_ratio < 0:
        raise InvalidInputError(f'Expansion ratio must be >= 0, got {expansion_ratio}.')
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return np.flatnonzero(cell.core_bounds.grown(expansion_ratio).contains(points))


def box_corners(bounds: Rect, z_range: tuple[float, float]) -> np.ndarray:
    xs = (bounds.min_x, bounds.max_x)
    ys = (bounds.min_y, bounds.max_y)
    zs = (float(z_range[0]), float(z_range[1]))
    return np.array([[xs[(i >> 2) & 1], ys[(i >> 1) & 1], zs[i & 1]] for i in range(8)])


def _clip_polygon(polygon: list[tuple[float, float]], axis: int, limit: float, keep_below: bool):
    def inside(p):
        return p[axis] <= limit if keep_below else p[axis] >= limit

    output = []
    for i, current in enumerate(polygon):
        previous = polygon[i - 1]
        if inside(current):
            if not inside(previous):
                output.append(_cross(previous, current, axis, limit))
            output.append(current)
        elif inside(previous):
            output.append(_cross(previous, current, axis, limit))
    return output


def _cross(a, b, axis, limit):
    t = (limit - a[axis]) / (b[axis] - a[axis])
    point = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    point[axis] = limit
    return tuple(point)


def polygon_area(polygon) -> float:
    if len(polygon) < 3:
        return 0.0
    pts = np.asarray(polygon, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def visibility(cell: Cell, camera: CameraRecord, z_range: tuple[float, float]) -> float:
    """Share of the camera image covered by the projected cell box
    (expanded bounds x z_range), clipped to the image."""
    view = camera.pose.apply(box_corners(cell.expanded_bounds, z_range))
    front = view[:, 2] >= VISIBILITY_NEAR
    if not np.any(front):
        return 0.0
    kept = [view[i] for i in range(8) if front[i]]
    for a, b in _BOX_EDGES:
        if front[a] != front[b]:
            t = (VISIBILITY_NEAR - view[a, 2]) / (view[b, 2] - view[a, 2])
            kept.append(view[a] + t * (view[b] - view[a]))
    intrinsics = camera.intrinsics
    projected, _ = intrinsics.project(np.array(kept))
    if projected.shape[0] < 3:
        return 0.0
    try:
        hull = ConvexHull(projected)
    except QhullError:
        return 0.0
    polygon = [tuple(projected[i]) for i in hull.vertices]
    for axis, limit, keep_below in ((0, 0.0, False), (0, intrinsics.width, True), (1, 0.0, False), (1, intrinsics.height, True)):
        polygon = _clip_polygon(polygon, axis, float(limit), keep_below)
        if not polygon:
            return 0.0
    ratio = polygon_area(polygon) / float(intrinsics.width * intrinsics.height)
    return min(max(ratio, 0.0), 1.0)


def passes_threshold(value: float, threshold: float) -> bool:
    """Strictly above the threshold; full coverage also passes a threshold of exactly 1."""
    return value > threshold or value >= 1.0 >= threshold


def covered_points(camera: CameraRecord, points, tracks=None) -> np.ndarray:
    """Points observed by the camera: track membership when tracks are known,
    otherwise frustum containment."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if tracks is not None:
        return np.array([i for i, track in enumerate(tracks) if camera.id in track], dtype=np.int64)
    px, in_front = camera.intrinsics.project(camera.pose.apply(points))
    inside = (
        in_front
        & (px[:, 0] >= 0) & (px[:, 0] < camera.intrinsics.width)
        & (px[:, 1] >= 0) & (px[:, 1] < camera.intrinsics.height)
    )
    return np.flatnonzero(inside)


def select_cameras(
    plan: PartitionPlan,
    cameras: Sequence[CameraRecord],
    threshold: float | None = None,
    points=None,
    tracks=None,
) -> tuple[PartitionPlan, list[str]]:
    """Attach every camera whose visibility exceeds `threshold` to each cell
    and add the points it observes. Returns the updated plan and warnings."""
    if threshold is None:
        threshold = plan.visibility_threshold
    if not threshold > 0:
        raise InvalidInputError(f'Visibility threshold must be positive, got {threshold}.')
    points = np.zeros((0, 3)) if points is None else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    coverage_cache: dict[int, np.ndarray] = {}
    warnings = []
    cells = []
    for cell in plan.cells:
        selected = []
        extra = [cell.point_indices]
        for camera in cameras:
            if passes_threshold(visibility(cell, camera, plan.z_range), threshold):
                selected.append(int(camera.id))
                if camera.id not in coverage_cache:
                    coverage_cache[camera.id] = covered_points(camera, points, tracks)
                extra.append(coverage_cache[camera.id])
        if not selected:
            message = f'{cell.label} has no camera with visibility above {threshold:g}.'
            logger.warning(message)
            warnings.append(message)
        merged = np.unique(np.concatenate(extra).astype(np.int64))
        cells.append(replace(cell, selected_camera_ids=tuple(sorted(selected)), point_indices=merged))
    return replace(plan, cells=tuple(cells), visibility_threshold=float(threshold)), warnings


def build_plan(
    cameras: Sequence[CameraRecord],
    points,
    m: int,
    n: int,
    expansion_ratio: float | None = None,
    visibility_threshold: float | None = None,
    tracks=None,
) -> tuple[PartitionPlan, list[str]]:
    """Balanced split, expanded point selection and camera selection in turn."""
    if expansion_ratio is None:
        expansion_ratio = float(get_setting('ORTHOSPLAT_EXPANSION_RATIO', 0.2))
    if visibility_threshold is None:
        visibility_threshold = float(get_setting('ORTHOSPLAT_VISIBILITY_THRESHOLD', 0.25))
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    centers = np.array([camera.center for camera in cameras]).reshape(-1, 3)
    extent = Rect.from_points(np.concatenate([centers, points]))
    warnings = []
    if points.shape[0]:
        z_range = (float(points[:, 2].min()), float(points[:, 2].max()))
    else:
        z_range = (0.0, 0.0)
        warnings.append('No points available; cell boxes are flat at z = 0.')
        logger.warning(warnings[-1])

    cells = []
    for cell in partition_cameras(cameras, m, n, extent):
        expanded = cell.core_bounds.grown(expansion_ratio)
        cells.append(replace(
            cell,
            expanded_bounds=expanded,
            point_indices=select_points(cell, points, expansion_ratio),
        ))
    plan = PartitionPlan(
        rows=n,
        cols=m,
        cells=tuple(cells),
        expansion_ratio=float(expansion_ratio),
        visibility_threshold=float(visibility_threshold),
        extent=extent,
        z_range=z_range,
    )
    plan, selection_warnings = select_cameras(plan, cameras, visibility_threshold, points, tracks)
    return plan, warnings + selection_warnings
