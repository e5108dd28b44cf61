import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidInputError, ParseError
from apps.evaluation.geodesy import (
    EARTH_RADIUS_M,
    GcpRecord,
    format_error_table,
    gcp_errors,
    gcp_scale_align,
    haversine,
    read_gcp_csv,
    write_error_csv,
)
from orthosplat.report_pdf import build_gcp_report_pdf


def law_of_cosines(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dl = np.radians(lon2 - lon1)
    cos_angle = np.sin(p1) * np.sin(p2) + np.cos(p1) * np.cos(p2) * np.cos(dl)
    return EARTH_RADIUS_M * np.arccos(np.clip(cos_angle, -1.0, 1.0))


def equator_gcps(ground_xy, gsd, names=None):
    """GCPs around (0, 0) whose TDOM pixels are ground meters / gsd, north up."""
    names = names or [str(101 + i) for i in range(len(ground_xy))]
    records = []
    for name, (x, y) in zip(names, ground_xy):
        lat = math.degrees(y / EARTH_RADIUS_M)
        lon = math.degrees(x / EARTH_RADIUS_M)
        records.append(GcpRecord(name, lat, lon, 500 + x / gsd, 500 - y / gsd))
    return records


class HaversineTests(SimpleTestCase):
    def test_identical_points(self):
        self.assertEqual(haversine(45.0, 7.0, 45.0, 7.0), 0.0)

    def test_one_degree_along_the_equator(self):
        self.assertAlmostEqual(haversine(0, 0, 0, 1), EARTH_RADIUS_M * math.pi / 180, delta=1e-6)
        self.assertAlmostEqual(haversine(0, 0, 0, 1), 111194.93, delta=0.01)

    def test_random_pairs_match_law_of_cosines(self):
        rng = np.random.default_rng(20)
        lat1 = np.degrees(np.arcsin(rng.uniform(-1, 1, 1000)))
        lat2 = np.degrees(np.arcsin(rng.uniform(-1, 1, 1000)))
        lon1 = rng.uniform(-180, 180, 1000)
        lon2 = rng.uniform(-180, 180, 1000)
        ours = haversine(lat1, lon1, lat2, lon2)
        oracle = law_of_cosines(lat1, lon1, lat2, lon2)
        far = oracle > 1000
        self.assertGreater(far.sum(), 990)
        np.testing.assert_allclose(ours[far], oracle[far], rtol=1e-9)

    def test_metric_properties(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            a, b, c = (
                (float(rng.uniform(-89, 89)), float(rng.uniform(-179, 179))) for _ in range(3)
            )
            ab = haversine(*a, *b)
            self.assertEqual(ab, haversine(*b, *a))
            self.assertLessEqual(haversine(*a, *c), ab + haversine(*b, *c) + 1e-9)

    def test_out_of_range(self):
        with self.assertRaises(InvalidInputError):
            haversine(91, 0, 0, 0)
        with self.assertRaises(InvalidInputError):
            haversine(0, 0, 0, -181)


class GcpAlignmentTests(SimpleTestCase):
    def test_scale_is_meters_per_pixel(self):
        gcps = [
            GcpRecord('101', 0.0, 0.0, 0.0, 1000.0),
            GcpRecord('102', math.degrees(100 / EARTH_RADIUS_M), 0.0, 0.0, 0.0),
        ]
        self.assertAlmostEqual(gcp_scale_align(gcps, ('101', '102')), 0.1, places=12)
        report = gcp_errors(gcps, 0.1, anchor_pair=('101', '102'))
        self.assertEqual(report.pair_errors[0].absolute_error, 0.0)

    def test_anchor_error_is_exactly_zero(self):
        gcps = equator_gcps([(0, 0), (37.3, 12.9), (-55.1, 80.2), (10.0, -60.0)], 0.07)
        scale = gcp_scale_align(gcps, ('102', '104'))
        report = gcp_errors(gcps, scale, anchor_pair=('102', '104'))
        anchor = [item for item in report.pair_errors if item.pair_id == '102-104']
        self.assertEqual(len(report.pair_errors), 6)
        self.assertEqual(anchor[0].absolute_error, 0.0)

    def test_synthetic_tdom_recovers_the_gsd(self):
        rng = np.random.default_rng(22)
        gcps = equator_gcps(rng.uniform(-100, 100, (6, 2)), 0.05)
        scale = gcp_scale_align(gcps, ('101', '102'))
        self.assertAlmostEqual(scale / 0.05, 1.0, delta=1e-6)
        report = gcp_errors(gcps, scale, anchor_pair=('101', '102'))
        self.assertLess(report.max_error, 1e-6)

    def test_pixel_perturbation_is_bounded(self):
        rng = np.random.default_rng(23)
        gcps = equator_gcps(rng.uniform(-100, 100, (5, 2)), 0.1)
        base = gcp_errors(gcps, 0.1)
        moved = list(gcps)
        moved[2] = GcpRecord(gcps[2].id, gcps[2].lat, gcps[2].lon, gcps[2].px + 10, gcps[2].py)
        shifted = gcp_errors(moved, 0.1)
        for before, after in zip(base.pair_errors, shifted.pair_errors):
            self.assertLessEqual(abs(after.absolute_error - before.absolute_error), 1.0 + 1e-9)

    def test_errors_do_not_depend_on_pixel_units(self):
        rng = np.random.default_rng(24)
        gcps = equator_gcps(rng.uniform(-100, 100, (5, 2)), 0.1)
        scaled = [GcpRecord(g.id, g.lat, g.lon, g.px * 3.0, g.py * 3.0) for g in gcps]
        first = gcp_errors(gcps, 0.1037)
        second = gcp_errors(scaled, 0.1037 / 3.0)
        for a, b in zip(first.pair_errors, second.pair_errors):
            self.assertAlmostEqual(a.absolute_error, b.absolute_error, delta=1e-9)

    def test_invalid_requests(self):
        gcps = equator_gcps([(0, 0), (10, 10)], 0.1)
        with self.assertRaises(InvalidInputError):
            gcp_errors(gcps, 0.1, pairs=[('101', '999')])
        with self.assertRaises(InvalidInputError):
            gcp_errors(gcps[:1], 0.1)
        same_pixel = [gcps[0], GcpRecord('102', 0.001, 0.0, gcps[0].px, gcps[0].py)]
        with self.assertRaises(InvalidInputError):
            gcp_scale_align(same_pixel, ('101', '102'))
        with self.assertRaises(InvalidInputError):
            gcp_errors(gcps, 0.1, image_size=(100, 100))


class GcpFileTests(SimpleTestCase):
    def test_csv_round_trip_and_reports(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'gcps.csv'
            path.write_text('id,lat,lon,px,py\n101,0.0,0.0,500,500\n102,0.0009,0.0,500,0\n\n103,0.0,0.0009,1500,500\n')
            gcps = read_gcp_csv(path)
            self.assertEqual([g.id for g in gcps], ['101', '102', '103'])
            report = gcp_errors(gcps, gcp_scale_align(gcps, ('101', '102')), anchor_pair=('101', '102'))

            table = format_error_table(report)
            self.assertIn('101-102', table)
            self.assertIn('6371000', table)
            csv_path = write_error_csv(report, Path(tmp) / 'errors.csv')
            lines = csv_path.read_text().splitlines()
            self.assertEqual(lines[0], 'pair,true_m,measured_m,abs_error_m')
            self.assertEqual(len(lines), 4)
            self.assertTrue(lines[1].endswith(',0.0'))

            pdf = build_gcp_report_pdf(report, {'gsd': 0.1, 'tdom_dir': tmp})
            self.assertTrue(pdf.startswith(b'%PDF'))

    def test_malformed_row_reports_its_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'gcps.csv'
            path.write_text('id,lat,lon,px,py\n101,0,0,1,1\n102,north,0,2,2\n')
            with self.assertRaises(ParseError) as ctx:
                read_gcp_csv(path)
            self.assertEqual(ctx.exception.line_number, 3)

    def test_wrong_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'gcps.csv'
            path.write_text('name,lat,lon\n')
            with self.assertRaises(ParseError) as ctx:
                read_gcp_csv(path)
            self.assertEqual(ctx.exception.line_number, 1)
