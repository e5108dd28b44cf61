import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from apps.core.conf import default_background, default_threads
from apps.core.splats import SplatScene

from .compositing import TILE_SIZE
from .fragments import PreparedScene, composite_stack, evaluate_fragments
from .framebuffer import FrameBuffer


logger = logging.getLogger(__name__)


def work_tiles(width: int, height: int, tile_size: int = TILE_SIZE) -> list[tuple[int, int, int, int]]:
    """Local (col0, row0, w, h) work tiles in row-major order."""
    tiles = []
    for row0 in range(0, height, tile_size):
        for col0 in range(0, width, tile_size):
            tiles.append((col0, row0, min(tile_size, width - col0), min(tile_size, height - row0)))
    return tiles


def bin_splats(prepared: PreparedScene, tiles_x: int, tiles_y: int, tile_size: int = TILE_SIZE) -> list[np.ndarray]:
    """Ranks overlapping each work tile, kept in composition order."""
    camera = prepared.camera
    bbox = prepared.bbox
    alive = bbox[:, 1] >= bbox[:, 0]
    alive &= bbox[:, 3] >= bbox[:, 2]
    ranks = np.flatnonzero(alive)
    tile_count = tiles_x * tiles_y
    if ranks.size == 0:
        return [np.zeros(0, dtype=np.int64) for _ in range(tile_count)]

    tx0 = (bbox[ranks, 0] - camera.col_offset) // tile_size
    tx1 = (bbox[ranks, 1] - camera.col_offset) // tile_size
    ty0 = (bbox[ranks, 2] - camera.row_offset) // tile_size
    ty1 = (bbox[ranks, 3] - camera.row_offset) // tile_size
    span_x = tx1 - tx0 + 1
    span_y = ty1 - ty0 + 1
    counts = span_x * span_y

    owner = np.repeat(np.arange(ranks.size), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    tile_x = tx0[owner] + local % span_x[owner]
    tile_y = ty0[owner] + local // span_x[owner]
    tile_id = tile_y * tiles_x + tile_x
    by_tile = np.argsort(tile_id, kind='stable')
    sorted_ids = tile_id[by_tile]
    sorted_ranks = ranks[owner[by_tile]]
    bounds = np.searchsorted(sorted_ids, np.arange(tile_count + 1))
    return [sorted_ranks[bounds[i]:bounds[i + 1]] for i in range(tile_count)]


def render_tile(prepared: PreparedScene, ranks: np.ndarray, tile, background) -> FrameBuffer:
    camera = prepared.camera
    col0, row0, width, height = tile
    cols = np.arange(width) + col0 + camera.col_offset
    rows = np.arange(height) + row0 + camera.row_offset
    stack = evaluate_fragments(prepared, ranks, cols, rows)
    result = composite_stack(stack, prepared.colors[ranks], background)
    return FrameBuffer(width, height, result.color, result.depth, result.accum_alpha, tuple(background))


def render(scene: SplatScene, camera, threads: int | None = None, background=None) -> FrameBuffer:
    """Rasterize `scene` through `camera`.

    Work tiles are independent and each pixel blends its fragments in a
    fixed order, so the output does not depend on `threads`.
    """
    threads = threads or default_threads()
    background = tuple(float(c) for c in (background if background is not None else default_background()))
    frame = FrameBuffer.blank(camera.width, camera.height, background)
    if len(scene) == 0:
        return frame

    prepared = PreparedScene.build(scene, camera)
    tiles = work_tiles(camera.width, camera.height)
    tiles_x = -(-camera.width // TILE_SIZE)
    tiles_y = -(-camera.height // TILE_SIZE)
    bins = bin_splats(prepared, tiles_x, tiles_y)

    def run(index: int) -> FrameBuffer:
        return render_tile(prepared, bins[index], tiles[index], background)

    if threads == 1:
        parts = [run(index) for index in range(len(tiles))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(tiles))))
    for tile, part in zip(tiles, parts):
        frame.place(part, tile[0], tile[1])
    logger.debug(
        'Rendered %d splats into %dx%d px (%d work tiles, %d threads).',
        len(scene), camera.width, camera.height, len(tiles), threads,
    )
    return frame
