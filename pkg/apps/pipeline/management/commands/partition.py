from pathlib import Path

from django.core.management.base import CommandError

from apps.core.conf import get_setting
from apps.partition.manifest import write_plan
from apps.partition.planning import build_plan
from apps.pipeline.base import PipelineCommand
from apps.sceneio.alignment import points_to_scene
from apps.sceneio.colmap import read_colmap_sparse
from apps.sceneio.ply import write_splat_ply


class Command(PipelineCommand):
    help = 'Split a COLMAP sparse model into an M x N grid of cells and select the cameras covering each cell.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('colmap_dir', help='Directory with cameras.txt, images.txt and points3D.txt.')
        parser.add_argument('--out-dir', required=True, help='Where plan.json, cells/ and manifest.json are written.')
        parser.add_argument('--cols', type=int, default=2, help='Cells along x (default: %(default)s).')
        parser.add_argument('--rows', type=int, default=2, help='Cells along y (default: %(default)s).')
        parser.add_argument(
            '--expansion-ratio',
            type=float,
            default=get_setting('ORTHOSPLAT_EXPANSION_RATIO', 0.2),
            help='Growth of each cell on every side, as a fraction of its size (default: %(default)s).',
        )
        parser.add_argument(
            '--visibility-threshold',
            type=float,
            default=get_setting('ORTHOSPLAT_VISIBILITY_THRESHOLD', 0.25),
            help='Minimum visible fraction of a cell for a camera to join it (default: %(default)s).',
        )
        self.add_alignment_arguments(parser)
        parser.add_argument(
            '--init-scenes',
            action='store_true',
            help='Also write one initial splat PLY per cell from its points (default: off).',
        )

    def handle(self, *args, **options):
        if options['cols'] < 1 or options['rows'] < 1:
            raise CommandError('--cols and --rows must be at least 1.')
        self.start_run(options, {
            'cols': options['cols'],
            'rows': options['rows'],
            'expansion_ratio': options['expansion_ratio'],
            'visibility_threshold': options['visibility_threshold'],
            'align': options['align'],
            'alignment': options['alignment'],
            'init_scenes': options['init_scenes'],
        })
        colmap_dir = self.require_path(options['colmap_dir'], 'read-colmap', directory=True)
        out_dir = Path(options['out_dir'])
        self.record_inputs(colmap_dir)

        with self.stage('read-colmap', colmap_dir):
            model = read_colmap_sparse(colmap_dir)
        model, outputs = self.align_model(model, options, out_dir)

        with self.stage('partition', colmap_dir):
            plan, warnings = build_plan(
                model.cameras,
                model.points,
                options['cols'],
                options['rows'],
                options['expansion_ratio'],
                options['visibility_threshold'],
                tracks=model.tracks,
            )
        self.manifest.warnings.extend(warnings)

        with self.stage('write-plan', out_dir):
            plan_path = write_plan(plan, out_dir, warnings)
            outputs.append(plan_path)
            outputs.extend(sorted((out_dir / 'cells').glob('*.json')))

        if options['init_scenes']:
            with self.stage('init-scenes', out_dir):
                for cell in plan.cells:
                    scene = points_to_scene(model.points[cell.point_indices], model.colors[cell.point_indices])
                    outputs.append(write_splat_ply(scene, out_dir / 'cells' / f'{cell.label}.ply'))

        self.finish_run(out_dir, outputs)
        for message in warnings:
            self.stderr.write(self.style.WARNING(message))
        self.stdout.write(self.style.SUCCESS(f'Partition plan with {len(plan.cells)} cells written to {plan_path}.'))
