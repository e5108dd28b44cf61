from pathlib import Path

import numpy as np

from apps.core.conf import get_setting
from apps.evaluation.edges import depth_overlays
from apps.pipeline.base import PipelineCommand
from apps.sceneio.rasters import read_png, write_png
from apps.tdom.exports import COLOR_FILE, DEPTH_NORMALIZED_FILE, read_products


COMPOSITE_FILE = 'red_composite.png'
OVERLAY_FILE = 'edge_overlay.png'
EDGES_FILE = 'edges.png'


class Command(PipelineCommand):
    help = 'Canny edges of the TDOM depth drawn over the orthophoto, plus a red composite encoding height.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('tdom_dir', help='Output directory of the render command.')
        parser.add_argument('--out-dir', help='Overlay directory (default: <tdom_dir>/edges).')
        parser.add_argument(
            '--sigma',
            type=float,
            default=get_setting('ORTHOSPLAT_CANNY_SIGMA', 1.4),
            help='Gaussian smoothing before the gradient, in pixels (default: %(default)s).',
        )
        parser.add_argument(
            '--low',
            type=float,
            default=get_setting('ORTHOSPLAT_CANNY_LOW', 0.1),
            help='Hysteresis low threshold on normalized depth gradients (default: %(default)s).',
        )
        parser.add_argument(
            '--high',
            type=float,
            default=get_setting('ORTHOSPLAT_CANNY_HIGH', 0.3),
            help='Hysteresis high threshold on normalized depth gradients (default: %(default)s).',
        )

    def handle(self, *args, **options):
        tdom_dir = self.require_path(options['tdom_dir'], 'read-tdom', directory=True)
        out_dir = Path(options['out_dir']) if options['out_dir'] else tdom_dir / 'edges'
        self.start_run(options, {'sigma': options['sigma'], 'low': options['low'], 'high': options['high']})
        self.record_inputs(tdom_dir / COLOR_FILE, tdom_dir / DEPTH_NORMALIZED_FILE)

        with self.stage('read-tdom', tdom_dir):
            product = read_products(tdom_dir)
            rgb = read_png(tdom_dir / COLOR_FILE)
        with self.stage('edges'):
            composite, overlay, edges = depth_overlays(
                rgb,
                product.depth_normalized,
                mask=product.coverage_mask(),
                low=options['low'],
                high=options['high'],
                sigma=options['sigma'],
            )
        with self.stage('write-overlays', out_dir):
            outputs = [
                write_png(out_dir / COMPOSITE_FILE, composite),
                write_png(out_dir / OVERLAY_FILE, overlay),
                write_png(out_dir / EDGES_FILE, edges.astype(np.uint8) * 255),
            ]

        self.finish_run(out_dir, outputs)
        self.stdout.write(self.style.SUCCESS(f'{int(edges.sum())} edge pixels; overlays written to {out_dir}.'))
