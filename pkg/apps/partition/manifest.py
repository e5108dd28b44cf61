import json
from pathlib import Path

import numpy as np

from apps.core.exceptions import ParseError

from .cells import Cell, PartitionPlan, Rect


def plan_to_dict(plan: PartitionPlan, warnings=()) -> dict:
    return {
        'grid': {'rows': plan.rows, 'cols': plan.cols},
        'expansion_ratio': plan.expansion_ratio,
        'visibility_threshold': plan.visibility_threshold,
        'extent': plan.extent.as_dict(),
        'z_range': list(plan.z_range),
        'cells': [
            {
                'index': list(cell.index),
                'label': cell.label,
                'core_bounds': cell.core_bounds.as_dict(),
                'expanded_bounds': cell.expanded_bounds.as_dict(),
                'camera_ids': list(cell.camera_ids),
                'selected_camera_ids': list(cell.selected_camera_ids),
                'point_count': int(cell.point_indices.size),
            }
            for cell in plan.cells
        ],
        'warnings': list(warnings),
    }


def plan_from_dict(data: dict, point_indices: dict | None = None) -> PartitionPlan:
    point_indices = point_indices or {}
    cells = []
    for item in data['cells']:
        index = (int(item['index'][0]), int(item['index'][1]))
        cells.append(Cell(
            index=index,
            core_bounds=Rect.from_dict(item['core_bounds']),
            expanded_bounds=Rect.from_dict(item['expanded_bounds']),
            camera_ids=tuple(item['camera_ids']),
            point_indices=np.asarray(point_indices.get(index, []), dtype=np.int64),
            selected_camera_ids=tuple(item['selected_camera_ids']),
        ))
    return PartitionPlan(
        rows=int(data['grid']['rows']),
        cols=int(data['grid']['cols']),
        cells=tuple(cells),
        expansion_ratio=float(data['expansion_ratio']),
        visibility_threshold=float(data['visibility_threshold']),
        extent=Rect.from_dict(data['extent']),
        z_range=tuple(data['z_range']),
    )


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def write_plan(plan: PartitionPlan, out_dir, warnings=()) -> Path:
    """Write plan.json plus one listing per cell; returns the plan path."""
    out_dir = Path(out_dir)
    cells_dir = out_dir / 'cells'
    cells_dir.mkdir(parents=True, exist_ok=True)
    for cell in plan.cells:
        listing = {
            'index': list(cell.index),
            'camera_ids': list(cell.camera_ids),
            'selected_camera_ids': list(cell.selected_camera_ids),
            'point_indices': [int(i) for i in cell.point_indices],
        }
        (cells_dir / f'{cell.label}.json').write_text(dumps(listing), encoding='utf-8')
    path = out_dir / 'plan.json'
    path.write_text(dumps(plan_to_dict(plan, warnings)), encoding='utf-8')
    return path


def read_plan(path) -> PartitionPlan:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    point_indices = {}
    cells_dir = path.parent / 'cells'
    for item in data.get('cells', []):
        listing = cells_dir / f"{item['label']}.json"
        if listing.exists():
            point_indices[tuple(item['index'])] = json.loads(listing.read_text(encoding='utf-8'))['point_indices']
    return plan_from_dict(data, point_indices)
