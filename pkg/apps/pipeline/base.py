import json
import logging
from contextlib import contextmanager
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.core.conf import default_threads
from apps.core.exceptions import OrthoSplatError
from apps.sceneio.alignment import AlignmentTransform, manhattan_align
from orthosplat.timing import StageTimer

from .manifest import RunManifest, input_hashes


logger = logging.getLogger(__name__)

ALIGNMENT_FILE = 'alignment.json'


def parse_grid(value: str) -> tuple[int, int]:
    """'2x3' -> (2, 3), columns first."""
    try:
        cols, rows = (int(part) for part in value.lower().split('x'))
    except ValueError as exc:
        raise CommandError(f'Grid must look like COLSxROWS, got {value!r}.') from exc
    if cols < 1 or rows < 1:
        raise CommandError(f'Grid dimensions must be positive, got {value!r}.')
    return cols, rows


class PipelineCommand(BaseCommand):
    """Shared plumbing: --threads, stage timing with error context, and the
    run manifest written into the output directory."""

    def add_arguments(self, parser):
        parser.add_argument(
            '--threads',
            type=int,
            default=default_threads(),
            help='Worker threads for every stage; output does not depend on it (default: %(default)s).',
        )

    def start_run(self, options: dict, config: dict):
        if options['threads'] < 1:
            raise CommandError('--threads must be at least 1.')
        self.timer = StageTimer()
        self.manifest = RunManifest(command=self.command_name, config={**config, 'threads': options['threads']})

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    @contextmanager
    def stage(self, name: str, path=None):
        with self.timer.stage(name):
            try:
                yield
            except (OrthoSplatError, OSError) as exc:
                where = f' [{path}]' if path is not None else ''
                raise CommandError(f'{name} failed{where}: {exc}') from exc

    def require_path(self, path, stage: str, directory: bool = False) -> Path:
        path = Path(path)
        exists = path.is_dir() if directory else path.is_file()
        if not exists:
            kind = 'Directory' if directory else 'File'
            raise CommandError(f'{stage} failed [{path}]: {kind} does not exist.')
        return path

    def add_alignment_arguments(self, parser):
        parser.add_argument(
            '--align',
            choices=('none', 'auto'),
            default='none',
            help='Manhattan-align the model first (default: %(default)s).',
        )
        parser.add_argument(
            '--alignment',
            help='JSON file with a user-supplied rotation/translation; implies alignment.',
        )

    def align_model(self, model, options, out_dir) -> tuple:
        """Apply --align/--alignment. Returns the model and the files written."""
        override = None
        if options['alignment']:
            path = self.require_path(options['alignment'], 'align')
            self.record_inputs(path)
            try:
                override = AlignmentTransform.from_dict(json.loads(path.read_text(encoding='utf-8')))
            except (KeyError, ValueError) as exc:
                raise CommandError(f'align failed [{path}]: {exc}') from exc
        if override is None and options['align'] == 'none':
            return model, []
        with self.stage('align', out_dir):
            model, transform = manhattan_align(model, override)
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / ALIGNMENT_FILE
            path.write_text(json.dumps(transform.as_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return model, [path]

    def record_inputs(self, *paths):
        self.manifest.inputs.update(input_hashes(*paths))

    def finish_run(self, out_dir, outputs) -> Path:
        self.manifest.timings = dict(self.timer.timings)
        out_dir = Path(out_dir)
        self.manifest.outputs = sorted(Path(path).relative_to(out_dir).as_posix() for path in outputs)
        path = self.manifest.write(out_dir)
        logger.info('%s finished; manifest at %s.', self.command_name, path)
        return path
