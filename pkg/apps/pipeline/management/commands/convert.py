from pathlib import Path

from django.core.management.base import CommandError

from apps.pipeline.base import PipelineCommand
from apps.sceneio.alignment import INIT_NEIGHBORS, points_to_scene
from apps.sceneio.colmap import read_colmap_sparse, write_colmap_sparse
from apps.sceneio.ply import write_splat_ply


INIT_FILE = 'init.ply'
ALIGNED_DIR = 'aligned'


class Command(PipelineCommand):
    help = 'Turn the points of a COLMAP sparse model into an initial splat PLY.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('colmap_dir', help='Directory with cameras.txt, images.txt and points3D.txt.')
        parser.add_argument('--out-dir', required=True, help='Where init.ply and manifest.json are written.')
        parser.add_argument('--sh-degree', type=int, default=0, choices=(0, 1, 2, 3), help='SH degree of the splats (default: %(default)s).')
        parser.add_argument(
            '--neighbors',
            type=int,
            default=INIT_NEIGHBORS,
            help='Nearest neighbors averaged for the initial scale (default: %(default)s).',
        )
        parser.add_argument('--crs-note', default='', help='Free-text description of the coordinate frame (default: empty).')
        self.add_alignment_arguments(parser)

    def handle(self, *args, **options):
        if options['neighbors'] < 1:
            raise CommandError('--neighbors must be at least 1.')
        self.start_run(options, {
            'sh_degree': options['sh_degree'],
            'neighbors': options['neighbors'],
            'crs_note': options['crs_note'],
            'align': options['align'],
            'alignment': options['alignment'],
        })
        colmap_dir = self.require_path(options['colmap_dir'], 'read-colmap', directory=True)
        out_dir = Path(options['out_dir'])
        self.record_inputs(colmap_dir)

        with self.stage('read-colmap', colmap_dir):
            model = read_colmap_sparse(colmap_dir)
        model, outputs = self.align_model(model, options, out_dir)
        if outputs:
            with self.stage('write-colmap', out_dir / ALIGNED_DIR):
                aligned_dir = write_colmap_sparse(model, out_dir / ALIGNED_DIR)
                outputs.extend(sorted(aligned_dir.iterdir()))

        with self.stage('convert', colmap_dir):
            scene = points_to_scene(
                model.points,
                model.colors,
                sh_degree=options['sh_degree'],
                neighbors=options['neighbors'],
                crs_note=options['crs_note'],
            )
        with self.stage('write-ply', out_dir):
            outputs.append(write_splat_ply(scene, out_dir / INIT_FILE))

        self.finish_run(out_dir, outputs)
        self.stdout.write(self.style.SUCCESS(f'{len(scene)} splats written to {out_dir / INIT_FILE}.'))
