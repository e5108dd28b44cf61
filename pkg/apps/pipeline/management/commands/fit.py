from pathlib import Path

from django.core.management.base import CommandError

from apps.core.conf import default_background, get_setting
from apps.fit.optimizer import DEFAULT_LEARNING_RATES, GRADIENT_MODES, FitConfig, fit, write_loss_csv
from apps.fit.parameters import GROUPS
from apps.fit.targets import read_views
from apps.fit.tasks import enqueue_fit_job
from apps.pipeline.base import PipelineCommand
from apps.sceneio.ply import read_splat_ply, write_splat_ply


FITTED_FILE = 'fitted.ply'
LOSS_FILE = 'loss.csv'


def parse_learning_rates(items) -> dict[str, float]:
    rates = {}
    for item in items or ():
        name, _, value = item.partition('=')
        try:
            rates[name.strip()] = float(value)
        except ValueError as exc:
            raise CommandError(f'Learning rate must look like GROUP=VALUE, got {item!r}.') from exc
    return rates


class Command(PipelineCommand):
    help = 'Optimize splat parameters against target views with an L1 photometric loss.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('ply_init', help='Initial splat scene in PLY format.')
        parser.add_argument('views_dir', help='Directory with views.json and the target images it lists.')
        parser.add_argument('--out-dir', required=True, help='Where fitted.ply, loss.csv and manifest.json are written.')
        parser.add_argument(
            '--iterations',
            type=int,
            default=get_setting('ORTHOSPLAT_FIT_ITERATIONS', 200),
            help='Optimizer steps (default: %(default)s).',
        )
        parser.add_argument(
            '--groups',
            default='opacity,color',
            help=f'Comma-separated parameter groups to optimize, from {",".join(GROUPS)} (default: %(default)s).',
        )
        parser.add_argument(
            '--gradient-mode',
            choices=GRADIENT_MODES,
            default='analytic-where-available',
            help='Gradient source (default: %(default)s).',
        )
        parser.add_argument(
            '--lr',
            action='append',
            metavar='GROUP=VALUE',
            help='Override a starting learning rate; repeatable (defaults: '
            + ', '.join(f'{name}={rate:g}' for name, rate in DEFAULT_LEARNING_RATES.items()) + ').',
        )
        parser.add_argument(
            '--lr-final-ratio',
            type=float,
            default=0.01,
            help='Learning rates decay exponentially to this fraction (default: %(default)s).',
        )
        parser.add_argument('--queue', action='store_true', help='Enqueue the fit on the RQ queue instead of running it (default: off).')

    def handle(self, *args, **options):
        groups = tuple(name.strip() for name in options['groups'].split(',') if name.strip())
        if options['queue']:
            job_options = {
                key: options[key]
                for key in ('iterations', 'groups', 'gradient_mode', 'lr', 'lr_final_ratio', 'threads')
                if options.get(key) is not None
            }
            job = enqueue_fit_job(options['ply_init'], options['views_dir'], options['out_dir'], job_options)
            self.stdout.write(self.style.SUCCESS(f'Fit job submitted: {getattr(job, "id", job)}.'))
            return

        self.start_run(options, {'background': list(default_background())})
        with self.stage('configure'):
            config = FitConfig(
                iterations=options['iterations'],
                learning_rates=parse_learning_rates(options['lr']),
                groups=groups,
                gradient_mode=options['gradient_mode'],
                lr_final_ratio=options['lr_final_ratio'],
            )
        self.manifest.config.update(config.as_dict())
        ply_init = self.require_path(options['ply_init'], 'read-ply')
        views_dir = self.require_path(options['views_dir'], 'read-views', directory=True)
        out_dir = Path(options['out_dir'])
        self.record_inputs(ply_init, views_dir)

        with self.stage('read-ply', ply_init):
            scene = read_splat_ply(ply_init)
        with self.stage('read-views', views_dir):
            views = read_views(views_dir)
        with self.stage('fit'):
            result = fit(scene, views, config, threads=options['threads'])
        with self.stage('write', out_dir):
            outputs = [
                write_splat_ply(result.scene, out_dir / FITTED_FILE),
                write_loss_csv(result.losses, out_dir / LOSS_FILE),
            ]

        self.finish_run(out_dir, outputs)
        self.stdout.write(self.style.SUCCESS(
            f'Fit finished: loss {result.losses[0]:.6g} -> {result.losses[-1]:.6g}; outputs in {out_dir}.'
        ))
