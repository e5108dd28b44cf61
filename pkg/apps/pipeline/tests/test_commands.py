import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.evaluation.geodesy import EARTH_RADIUS_M
from apps.fit.targets import write_views
from apps.fit.tests.helpers import facing_scene, top_camera
from apps.partition.tests.helpers import nadir_camera
from apps.rasterizer.render import render
from apps.rasterizer.tests.helpers import flat_scene
from apps.sceneio.colmap import SparseModel, read_colmap_sparse, write_colmap_sparse
from apps.sceneio.ply import read_splat_ply, write_splat_ply
from apps.sceneio.rasters import linear_to_srgb, quantize, read_pfm, read_png
from apps.tdom.exports import export_products
from apps.tdom.planning import plan_tdom
from apps.tdom.products import GeoTransform, TdomProduct


WHITE = (1.0, 1.0, 1.0)


def run(name, *args, **options):
    """call_command with captured output streams; returns (stdout, stderr)."""
    stdout, stderr = StringIO(), StringIO()
    call_command(name, *args, stdout=stdout, stderr=stderr, threads=options.pop('threads', 2), **options)
    return stdout.getvalue(), stderr.getvalue()


def eight_camera_model(directory: Path) -> Path:
    """4 x 2 nadir survey over 30 x 10 m with points on uneven ground."""
    cameras = [nadir_camera(1 + i + 4 * j, 10.0 * i, 10.0 * j) for j in range(2) for i in range(4)]
    rng = np.random.default_rng(90)
    points = np.column_stack([rng.uniform(-5, 35, 60), rng.uniform(-5, 15, 60), rng.uniform(0, 2, 60)])
    colors = rng.integers(0, 256, (60, 3))
    tracks = [np.array([[1 + (i % 8), i]]) for i in range(60)]
    model = SparseModel(tuple(cameras), points, colors, track_elements=tuple(tracks))
    return write_colmap_sparse(model, directory)


def blocks_scene():
    """Large flat splats covering a 10 x 10 m patch, one of them raised."""
    centers = [[2.5, 2.5, 0.0], [7.5, 2.5, 0.0], [2.5, 7.5, 0.0], [7.5, 7.5, 3.0], [5.0, 5.0, 1.0]]
    colors = [[0.8, 0.2, 0.2], [0.2, 0.8, 0.2], [0.2, 0.2, 0.8], [0.9, 0.9, 0.1], [0.5, 0.5, 0.5]]
    return flat_scene(centers, [[2.0, 2.0]] * 5, colors, [0.9, 0.9, 0.9, 0.9, 0.6])


class PartitionCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.colmap = eight_camera_model(self.root / 'sparse')

    def tearDown(self):
        self.tmp.cleanup()

    def test_two_by_two_grid(self):
        out = self.root / 'plan'
        stdout, _ = run('partition', str(self.colmap), out_dir=str(out), cols=2, rows=2)
        plan = json.loads((out / 'plan.json').read_text())
        self.assertEqual(len(plan['cells']), 4)
        self.assertEqual(sorted(len(cell['camera_ids']) for cell in plan['cells']), [2, 2, 2, 2])
        self.assertEqual(len(list((out / 'cells').glob('*.json'))), 4)
        self.assertIn('4 cells', stdout)

        manifest = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(manifest['command'], 'partition')
        self.assertEqual(manifest['config']['cols'], 2)
        self.assertEqual(manifest['config']['threads'], 2)
        self.assertEqual(len(manifest['inputs']), 3)
        self.assertIn('plan.json', manifest['outputs'])
        self.assertIn('partition', manifest['timings'])

    def test_rerun_is_byte_identical(self):
        first, second = self.root / 'a', self.root / 'b'
        run('partition', str(self.colmap), out_dir=str(first))
        run('partition', str(self.colmap), out_dir=str(second), threads=1)
        self.assertEqual((first / 'plan.json').read_bytes(), (second / 'plan.json').read_bytes())
        for listing in (first / 'cells').glob('*.json'):
            self.assertEqual(listing.read_bytes(), (second / 'cells' / listing.name).read_bytes())

    def test_unreachable_threshold_warns_about_empty_cells(self):
        out = self.root / 'plan'
        _, stderr = run('partition', str(self.colmap), out_dir=str(out), visibility_threshold=1.01)
        plan = json.loads((out / 'plan.json').read_text())
        self.assertTrue(all(cell['selected_camera_ids'] == [] for cell in plan['cells']))
        self.assertEqual(len(plan['warnings']), 4)
        self.assertIn('no camera', stderr)
        self.assertEqual(len(json.loads((out / 'manifest.json').read_text())['warnings']), 4)

    def test_init_scenes_and_alignment(self):
        out = self.root / 'plan'
        run('partition', str(self.colmap), out_dir=str(out), align='auto', init_scenes=True)
        alignment = json.loads((out / 'alignment.json').read_text())
        self.assertEqual(alignment['provenance'], 'auto')
        plies = sorted((out / 'cells').glob('*.ply'))
        self.assertEqual(len(plies), 4)
        for ply in plies:
            read_splat_ply(ply)

    def test_missing_model_names_the_path(self):
        missing = self.root / 'nowhere'
        with self.assertRaisesMessage(CommandError, str(missing)):
            run('partition', str(missing), out_dir=str(self.root / 'plan'))

    def test_parse_errors_carry_the_stage(self):
        (self.colmap / 'cameras.txt').write_text('1 OPENCV 640 480 500 500 320 240 0 0 0 0\n')
        with self.assertRaisesMessage(CommandError, 'read-colmap failed'):
            run('partition', str(self.colmap), out_dir=str(self.root / 'plan'))


class ConvertCommandTests(SimpleTestCase):
    def test_points_become_splats(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            colmap = eight_camera_model(root / 'sparse')
            run('convert', str(colmap), out_dir=str(root / 'init'), sh_degree=1, crs_note='local ENU')
            scene = read_splat_ply(root / 'init' / 'init.ply')
            model = read_colmap_sparse(colmap)
            self.assertEqual(len(scene), 60)
            self.assertEqual(scene.sh_degree, 1)
            self.assertEqual(scene.crs_note, 'local ENU')
            np.testing.assert_allclose(scene.centers, model.points, atol=1e-4)
            np.testing.assert_allclose(scene.opacities, 0.1, atol=1e-6)

    def test_aligned_model_is_written_back(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            colmap = eight_camera_model(root / 'sparse')
            rotation = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
            override = root / 'override.json'
            override.write_text(json.dumps({'rotation': rotation, 'translation': [1.0, 2.0, 3.0]}))
            run('convert', str(colmap), out_dir=str(root / 'init'), alignment=str(override))
            aligned = read_colmap_sparse(root / 'init' / 'aligned')
            original = read_colmap_sparse(colmap)
            expected = original.points @ np.array(rotation).T + [1.0, 2.0, 3.0]
            np.testing.assert_allclose(aligned.points, expected, atol=1e-9)
            manifest = json.loads((root / 'init' / 'manifest.json').read_text())
            self.assertIn('aligned/points3D.txt', manifest['outputs'])
            self.assertEqual(json.loads((root / 'init' / 'alignment.json').read_text())['provenance'], 'user-supplied')

    def test_invalid_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            colmap = eight_camera_model(root / 'sparse')
            override = root / 'override.json'
            override.write_text(json.dumps({'rotation': [[2, 0, 0], [0, 1, 0], [0, 0, 1]]}))
            with self.assertRaisesMessage(CommandError, 'align failed'):
                run('convert', str(colmap), out_dir=str(root / 'init'), alignment=str(override))


class RenderCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.ply = write_splat_ply(blocks_scene(), self.root / 'scene.ply')

    def tearDown(self):
        self.tmp.cleanup()

    def test_matches_a_direct_render(self):
        out = self.root / 'tdom'
        run('render', str(self.ply), out_dir=str(out), gsd=0.25)
        scene = read_splat_ply(self.ply)
        plan = plan_tdom(scene.footprint_bounds(3.0), 0.25)
        frame = render(scene, plan.camera, threads=1, background=WHITE)
        np.testing.assert_array_equal(read_png(out / 'color.png'), quantize(linear_to_srgb(frame.color)))
        np.testing.assert_array_equal(read_pfm(out / 'depth.pfm'), frame.depth.astype(np.float32))
        manifest = json.loads((out / 'manifest.json').read_text())
        self.assertIn('color.png', manifest['outputs'])
        self.assertIn('tdom.json', manifest['outputs'])

    def test_tile_grid_does_not_change_the_rasters(self):
        single, tiled = self.root / 'single', self.root / 'tiled'
        run('render', str(self.ply), out_dir=str(single), gsd=0.25, tiles='1x1')
        run('render', str(self.ply), out_dir=str(tiled), gsd=0.25, tiles='2x2', threads=3)
        for name in ('depth.pfm', 'depth_normalized.pfm', 'height.pfm', 'color.png', 'coverage.png'):
            self.assertEqual((single / name).read_bytes(), (tiled / name).read_bytes(), name)

    def test_missing_scene_names_the_path(self):
        missing = self.root / 'missing.ply'
        with self.assertRaisesMessage(CommandError, str(missing)):
            run('render', str(missing), out_dir=str(self.root / 'tdom'), gsd=0.25)

    def test_invalid_gsd(self):
        with self.assertRaisesMessage(CommandError, 'plan failed'):
            run('render', str(self.ply), out_dir=str(self.root / 'tdom'), gsd=0.0)


class EvalGcpCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        ply = write_splat_ply(blocks_scene(), self.root / 'scene.ply')
        self.tdom = self.root / 'tdom'
        run('render', str(ply), out_dir=str(self.tdom), gsd=0.05)

    def tearDown(self):
        self.tmp.cleanup()

    def write_gcps(self, ground_xy, extra_rows=()):
        geo = GeoTransform.parse_world_file((self.tdom / 'color.pgw').read_text())
        path = self.root / 'gcps.csv'
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['id', 'lat', 'lon', 'px', 'py'])
            for number, (x, y) in enumerate(ground_xy):
                col, row = geo.world_to_pixel(x, y)
                writer.writerow([
                    f'G{number + 1}',
                    repr(math.degrees(y / EARTH_RADIUS_M)),
                    repr(math.degrees(x / EARTH_RADIUS_M)),
                    repr(float(col)),
                    repr(float(row)),
                ])
            for row in extra_rows:
                writer.writerow(row)
        return path

    def test_synthetic_scene_errors_are_below_a_millimetre(self):
        gcps = self.write_gcps([(1.0, 1.0), (9.0, 1.5), (8.0, 9.0), (1.5, 8.5)])
        out = self.root / 'report'
        stdout, _ = run('eval_gcp', str(self.tdom), str(gcps), anchor_pair=['G1', 'G3'], out_dir=str(out))
        with (out / 'gcp_errors.csv').open(newline='') as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), 6)
        for row in rows:
            self.assertLess(float(row['abs_error_m']), 1e-3, row['pair'])
        anchor = [row for row in rows if row['pair'] == 'G1-G3']
        self.assertEqual(float(anchor[0]['abs_error_m']), 0.0)
        self.assertTrue((out / 'gcp_report.pdf').read_bytes().startswith(b'%PDF'))
        self.assertIn('Abs. error (m)', (out / 'gcp_errors.txt').read_text())
        self.assertIn('G1-G3', stdout)

    def test_report_defaults_next_to_the_tdom(self):
        gcps = self.write_gcps([(1.0, 1.0), (9.0, 1.5), (8.0, 9.0)])
        run('eval_gcp', str(self.tdom), str(gcps), anchor_pair=['G1', 'G2'], no_pdf=True)
        self.assertTrue((self.tdom / 'gcp' / 'gcp_errors.csv').exists())
        self.assertFalse((self.tdom / 'gcp' / 'gcp_report.pdf').exists())

    def test_malformed_row_reports_its_line(self):
        gcps = self.write_gcps([(1.0, 1.0), (9.0, 1.5)], extra_rows=[['G9', 'north', '0', '1', '1']])
        with self.assertRaisesMessage(CommandError, 'gcps.csv:4'):
            run('eval_gcp', str(self.tdom), str(gcps), anchor_pair=['G1', 'G2'])

    def test_unknown_anchor(self):
        gcps = self.write_gcps([(1.0, 1.0), (9.0, 1.5)])
        with self.assertRaisesMessage(CommandError, 'evaluate failed'):
            run('eval_gcp', str(self.tdom), str(gcps), anchor_pair=['G1', 'G7'])


def synthetic_tdom(directory: Path, depth: np.ndarray) -> Path:
    rng = np.random.default_rng(91)
    height, width = depth.shape
    color = rng.uniform(0, 1, (height, width, 3))
    product = TdomProduct(
        color=color,
        depth_raw=depth,
        depth_normalized=depth,
        coverage=np.ones(depth.shape),
        geo_transform=GeoTransform(1.0, 0.0, 0.0, -1.0, 0.5, height - 0.5),
        camera_height=20.0,
    )
    export_products(product, directory)
    return directory


class DepthEdgesCommandTests(SimpleTestCase):
    def test_plateau_gives_a_closed_edge_loop(self):
        depth = np.full((80, 80), 20.0)
        depth[20:60, 20:60] = 12.0
        with tempfile.TemporaryDirectory() as tmp:
            tdom = synthetic_tdom(Path(tmp) / 'tdom', depth)
            run('depth_edges', str(tdom))
            edges = read_png(tdom / 'edges' / 'edges.png') > 0
            rgb = read_png(tdom / 'color.png')
            composite = read_png(tdom / 'edges' / 'red_composite.png')
            overlay = read_png(tdom / 'edges' / 'edge_overlay.png')
        self.assertGreater(int(edges.sum()), 100)
        self.assertFalse(edges[40, 40])
        self.assertFalse(edges[5, 5])
        np.testing.assert_array_equal(composite[..., 1:], rgb[..., 1:])
        self.assertEqual(int(composite[40, 40, 0]), 255)
        self.assertEqual(int(composite[5, 5, 0]), 0)
        np.testing.assert_array_equal(overlay[edges], np.tile([0, 255, 0], (int(edges.sum()), 1)))
        np.testing.assert_array_equal(overlay[~edges], rgb[~edges])

    def test_constant_depth_leaves_the_tdom_alone(self):
        with tempfile.TemporaryDirectory() as tmp:
            tdom = synthetic_tdom(Path(tmp) / 'tdom', np.full((40, 50), 7.0))
            out = Path(tmp) / 'edges'
            stdout, _ = run('depth_edges', str(tdom), out_dir=str(out), sigma=2.0, low=0.05, high=0.2)
            np.testing.assert_array_equal(read_png(out / 'edge_overlay.png'), read_png(tdom / 'color.png'))
            self.assertEqual(int(read_png(out / 'edges.png').sum()), 0)
            manifest = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(manifest['config']['sigma'], 2.0)
        self.assertIn('0 edge pixels', stdout)

    def test_not_a_tdom_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaisesMessage(CommandError, 'read-tdom failed'):
                run('depth_edges', tmp)


class FitCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def fixture(self, seed):
        # Targets come from the scene as stored, so PLY rounding cannot break an exact fit.
        ply = write_splat_ply(facing_scene(np.random.default_rng(seed), 4), self.root / 'truth.ply')
        truth = read_splat_ply(ply)
        camera = top_camera()
        write_views([(camera, render(truth, camera, 1, WHITE).color)], self.root / 'views')
        return ply, truth

    def read_losses(self, out):
        with (out / 'loss.csv').open(newline='') as handle:
            return [float(row['loss']) for row in csv.DictReader(handle)]

    def test_exact_scene_is_a_fixed_point(self):
        ply, truth = self.fixture(92)
        out = self.root / 'fit'
        run('fit', str(ply), str(self.root / 'views'), out_dir=str(out), iterations=4, groups='position,opacity,color')
        self.assertEqual(self.read_losses(out), [0.0] * 4)
        fitted = read_splat_ply(out / 'fitted.ply')
        np.testing.assert_array_equal(fitted.centers, truth.centers)
        manifest = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(manifest['config']['groups'], ['position', 'opacity', 'color'])
        self.assertEqual(sorted(manifest['outputs']), ['fitted.ply', 'loss.csv'])

    def test_recovers_perturbed_colours(self):
        ply, truth = self.fixture(93)
        rng = np.random.default_rng(94)
        sh = truth.sh_coeffs.copy()
        sh[:, 0, :] += rng.choice([-0.5, 0.5], (4, 3))
        start = write_splat_ply(truth.replace(sh_coeffs=sh), self.root / 'start.ply')
        out = self.root / 'fit'
        run('fit', str(start), str(self.root / 'views'), out_dir=str(out), iterations=200, groups='color')
        losses = self.read_losses(out)
        self.assertEqual(len(losses), 200)
        self.assertLess(losses[-1], 0.05 * losses[0])
        read_splat_ply(out / 'fitted.ply')

    def test_learning_rate_overrides(self):
        ply, _ = self.fixture(95)
        out = self.root / 'fit'
        run('fit', str(ply), str(self.root / 'views'), out_dir=str(out), iterations=1, lr=['color=0.2'])
        manifest = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(manifest['config']['learning_rates']['color'], 0.2)
        with self.assertRaisesMessage(CommandError, 'configure failed'):
            run('fit', str(ply), str(self.root / 'views'), out_dir=str(out), lr=['density=0.2'])
        with self.assertRaisesMessage(CommandError, 'GROUP=VALUE'):
            run('fit', str(ply), str(self.root / 'views'), out_dir=str(out), lr=['color=fast'])

    def test_missing_views(self):
        ply, _ = self.fixture(96)
        missing = self.root / 'no-views'
        with self.assertRaisesMessage(CommandError, str(missing)):
            run('fit', str(ply), str(missing), out_dir=str(self.root / 'fit'))

    def test_queue_hands_the_job_over(self):
        ply, _ = self.fixture(97)
        job = mock.Mock(id='job-1')
        target = 'apps.pipeline.management.commands.fit.enqueue_fit_job'
        with mock.patch(target, return_value=job) as enqueue:
            stdout, _ = run('fit', str(ply), str(self.root / 'views'), out_dir=str(self.root / 'fit'), iterations=7, queue=True)
        self.assertIn('job-1', stdout)
        args = enqueue.call_args.args
        self.assertEqual(args[:3], (str(ply), str(self.root / 'views'), str(self.root / 'fit')))
        self.assertEqual(args[3]['iterations'], 7)
        self.assertNotIn('queue', args[3])
        self.assertFalse((self.root / 'fit').exists())
