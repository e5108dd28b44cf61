import json
import tempfile
from pathlib import Path

import numpy as np
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.pipeline.base import parse_grid
from apps.pipeline.manifest import MANIFEST_FILE, RunManifest, file_sha256, input_hashes
from orthosplat import __version__


class HashTests(SimpleTestCase):
    def test_known_digest(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'abc.txt'
            path.write_bytes(b'abc')
            self.assertEqual(
                file_sha256(path),
                'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad',
            )

    def test_directories_hash_every_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            (root / 'model').mkdir()
            (root / 'model' / 'a.txt').write_text('a')
            (root / 'model' / 'sub').mkdir()
            (root / 'model' / 'sub' / 'b.txt').write_text('b')
            hashes = input_hashes(root / 'model', root / 'missing.txt')
            self.assertEqual(sorted(Path(key).name for key in hashes), ['a.txt', 'b.txt'])


class RunManifestTests(SimpleTestCase):
    def test_write_and_read(self):
        manifest = RunManifest(
            command='render',
            config={'gsd': np.float64(0.5), 'tiles': (2, 2), 'out': Path('x/y')},
            inputs={'scene.ply': '0' * 64},
            timings={'render': 0.25},
            outputs=['color.png'],
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = manifest.write(tmp)
            self.assertEqual(path.name, MANIFEST_FILE)
            data = json.loads(path.read_text())
            self.assertEqual(data['config'], {'gsd': 0.5, 'tiles': [2, 2], 'out': 'x/y'})
            self.assertEqual(data['version'], __version__)
            loaded = RunManifest.read(tmp)
        self.assertEqual(loaded.command, 'render')
        self.assertEqual(loaded.timings, {'render': 0.25})
        self.assertEqual(loaded.warnings, [])


class ParseGridTests(SimpleTestCase):
    def test_columns_first(self):
        self.assertEqual(parse_grid('3x2'), (3, 2))
        self.assertEqual(parse_grid('1X1'), (1, 1))

    def test_rejects_malformed_grids(self):
        for value in ('3', '0x2', 'ax2', '2x2x2'):
            with self.assertRaises(CommandError):
                parse_grid(value)
