import logging
from typing import Mapping

import numpy as np

from apps.core.exceptions import ContractViolationError, InvalidInputError
from apps.core.splats import SplatScene

from .cells import PartitionPlan


logger = logging.getLogger(__name__)

# Centers closer than this (meters) count as the same position when deduplicating.
DEDUP_TOLERANCE = 1e-9


def check_cores_disjoint(plan: PartitionPlan):
    cells = plan.cells
    for i, first in enumerate(cells):
        for second in cells[i + 1:]:
            if first.core_bounds.overlaps(second.core_bounds):
                raise ContractViolationError(f'Core bounds of {first.label} and {second.label} overlap.')


def split_scene(scene: SplatScene, plan: PartitionPlan) -> tuple[dict, dict]:
    """Per-cell scenes holding every splat centered in the cell's expanded
    bounds, and for each cell the index of those splats in `scene`."""
    sources = {
        cell.index: np.flatnonzero(cell.expanded_bounds.contains(scene.centers))
        for cell in plan.cells
    }
    return {index: scene.subset(indices) for index, indices in sources.items()}, sources


def _dedup_keys(scene: SplatScene) -> list[bytes]:
    quantized = np.round(scene.centers / DEDUP_TOLERANCE).astype(np.int64)
    attributes = scene.attribute_matrix()[:, 3:]
    return [quantized[i].tobytes() + attributes[i].tobytes() for i in range(len(scene))]


def _cross_cell_duplicates(merged: SplatScene, owners: np.ndarray) -> np.ndarray:
    """Rows repeating a splat already kept from another cell."""
    first_owner = {}
    keep = np.ones(len(merged), dtype=bool)
    for index, key in enumerate(_dedup_keys(merged)):
        owner = first_owner.setdefault(key, owners[index])
        if owner != owners[index]:
            keep[index] = False
    return keep


def merge_cells(
    cell_scenes: Mapping[tuple[int, int], SplatScene],
    plan: PartitionPlan,
    sources: Mapping[tuple[int, int], np.ndarray] | None = None,
) -> SplatScene:
    """Keep each cell's splats centered in its core bounds and concatenate.

    With `sources` (as returned by `split_scene`) the survivors come back in
    the order of the scene that was split, one per source index. Without
    them, cells are taken in plan order and a splat repeated by a later cell
    is dropped; repeats within one cell are kept. Either way the result does
    not depend on the iteration order of `cell_scenes`.
    """
    check_cores_disjoint(plan)
    known = {cell.index for cell in plan.cells}
    unknown = set(cell_scenes) - known
    if unknown:
        raise InvalidInputError(f'Scenes tagged with unknown cells: {sorted(unknown)}.')

    parts, owners, origins = [], [], []
    for position, cell in enumerate(plan.cells):
        scene = cell_scenes.get(cell.index)
        if scene is None or len(scene) == 0:
            continue
        inside = np.flatnonzero(cell.core_bounds.contains(scene.centers))
        parts.append(scene.subset(inside))
        owners.append(np.full(inside.size, position, dtype=np.int64))
        if sources is not None:
            cell_sources = np.asarray(sources.get(cell.index, ()), dtype=np.int64).reshape(-1)
            if cell_sources.size != len(scene):
                raise InvalidInputError(
                    f'Cell {cell.label} has {len(scene)} splats but {cell_sources.size} source indices.'
                )
            origins.append(cell_sources[inside])
    if not parts:
        degrees = {scene.sh_degree for scene in cell_scenes.values()}
        return SplatScene.empty(sh_degree=degrees.pop() if len(degrees) == 1 else 0)

    merged = SplatScene.concatenate(parts)
    if sources is not None:
        origin = np.concatenate(origins)
        order = np.argsort(origin, kind='stable')
        _, first = np.unique(origin[order], return_index=True)
        keep = order[first]
    else:
        keep = np.flatnonzero(_cross_cell_duplicates(merged, np.concatenate(owners)))
    dropped = len(merged) - keep.size
    if dropped:
        logger.info('Dropped %d duplicate splats while merging %d cells.', dropped, len(parts))
    return merged.subset(keep)
