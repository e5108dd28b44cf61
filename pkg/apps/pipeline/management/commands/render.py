from pathlib import Path

from apps.core.conf import default_background, get_setting
from apps.pipeline.base import PipelineCommand, parse_grid
from apps.sceneio.ply import read_splat_ply
from apps.tdom.exports import export_products
from apps.tdom.planning import plan_tdom
from apps.tdom.products import render_tdom


class Command(PipelineCommand):
    help = 'Render a splat PLY into a true digital orthophoto with depth, height and coverage rasters.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('ply_path', help='Splat scene in PLY format.')
        parser.add_argument('--out-dir', required=True, help='Output directory for the TDOM products.')
        parser.add_argument('--gsd', type=float, required=True, help='Ground sampling distance in meters per pixel.')
        parser.add_argument('--tiles', default='1x1', help='Tile grid as COLSxROWS (default: %(default)s).')
        parser.add_argument(
            '--tiles-in-flight',
            type=int,
            default=get_setting('ORTHOSPLAT_TILES_IN_FLIGHT', 2),
            help='Tile buffers held in memory at once (default: %(default)s).',
        )
        parser.add_argument(
            '--z-margin-ratio',
            type=float,
            default=get_setting('ORTHOSPLAT_Z_MARGIN_RATIO', 0.05),
            help='Extra view depth above and below the scene, as a fraction of its height (default: %(default)s).',
        )
        parser.add_argument(
            '--footprint-sigmas',
            type=float,
            default=3.0,
            help='Splat reach, in scales, used to size the orthophoto footprint (default: %(default)s).',
        )

    def handle(self, *args, **options):
        cols, rows = parse_grid(options['tiles'])
        self.start_run(options, {
            'gsd': options['gsd'],
            'tiles': [cols, rows],
            'tiles_in_flight': options['tiles_in_flight'],
            'z_margin_ratio': options['z_margin_ratio'],
            'footprint_sigmas': options['footprint_sigmas'],
            'background': list(default_background()),
        })
        ply_path = self.require_path(options['ply_path'], 'read-ply')
        out_dir = Path(options['out_dir'])
        self.record_inputs(ply_path)

        with self.stage('read-ply', ply_path):
            scene = read_splat_ply(ply_path)
        with self.stage('plan'):
            plan = plan_tdom(
                scene.footprint_bounds(options['footprint_sigmas']),
                options['gsd'],
                tile_rows=rows,
                tile_cols=cols,
                z_margin_ratio=options['z_margin_ratio'],
            )
        with self.stage('render'):
            product = render_tdom(
                scene,
                plan,
                threads=options['threads'],
                tiles_in_flight=options['tiles_in_flight'],
            )
        with self.stage('export', out_dir):
            paths = export_products(product, out_dir, metadata={'gsd': plan.gsd, 'crs_note': scene.crs_note})

        self.finish_run(out_dir, paths.values())
        width, height = plan.output_size
        self.stdout.write(self.style.SUCCESS(f'TDOM {width}x{height} px written to {out_dir}.'))
