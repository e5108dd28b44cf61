import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidInputError
from apps.core.splats import Splat2D
from apps.projection.cameras import (
    OrthoCamera,
    PerspectiveCamera,
    RigidTransform,
    ViewBox,
    camera_from_dict,
)
from apps.projection.matrices import ortho_matrix, perspective_matrix, to_ndc, viewport
from apps.projection.rays import (
    Ray,
    intersect_planes_axial,
    ortho_ray,
    perspective_ray,
    project_center,
    ray_splat_intersect,
)


def splat(center, rotation=(1, 0, 0, 0), scales=(1, 1), opacity=1.0):
    return Splat2D(np.array(center, float), np.array(rotation, float), np.array(scales, float), opacity, np.zeros((1, 3)))


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.linalg.det(q))


class PerspectiveMatrixTests(SimpleTestCase):
    def make_camera(self, fov=math.pi / 2, near=1.0, far=3.0):
        return PerspectiveCamera(RigidTransform.identity(), near, far, fov, fov, 64, 64)

    def test_ninety_degree_frustum(self):
        cam = self.make_camera()
        self.assertAlmostEqual(cam.right, 1.0, places=12)
        self.assertAlmostEqual(cam.top, 1.0, places=12)

    def test_near_and_far_endpoints(self):
        m = perspective_matrix(self.make_camera())
        ndc = to_ndc(m, [[0, 0, 1.0], [0, 0, 3.0]])
        self.assertAlmostEqual(ndc[0, 2], -1.0, places=12)
        self.assertAlmostEqual(ndc[1, 2], 1.0, places=12)

    def test_frustum_corners_map_to_cube_corners(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            near = rng.uniform(0.1, 5)
            cam = PerspectiveCamera(
                RigidTransform.identity(), near, near + rng.uniform(0.5, 100),
                rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0), 32, 24,
            )
            m = perspective_matrix(cam)
            for sx, sy, depth in itertools.product((-1, 1), (-1, 1), (cam.z_near, cam.z_far)):
                scale = depth / cam.z_near
                point = [sx * cam.right * scale, sy * cam.top * scale, depth]
                ndc = to_ndc(m, point)[0]
                expected = [sx, -sy, -1.0 if depth == cam.z_near else 1.0]
                np.testing.assert_allclose(ndc, expected, atol=1e-12)

    def test_in_frustum_points_stay_in_cube(self):
        rng = np.random.default_rng(1)
        cam = self.make_camera(fov=1.2, near=0.5, far=50.0)
        m = perspective_matrix(cam)
        z = rng.uniform(cam.z_near, cam.z_far, 100)
        x = rng.uniform(-1, 1, 100) * cam.right * z / cam.z_near
        y = rng.uniform(-1, 1, 100) * cam.top * z / cam.z_near
        ndc = to_ndc(m, np.stack([x, y, z], axis=1))
        self.assertTrue(np.all(np.abs(ndc) <= 1.0 + 1e-12))

    def test_rejects_wide_fov(self):
        with self.assertRaises(InvalidInputError):
            self.make_camera(fov=math.pi)


class OrthoMatrixTests(SimpleTestCase):
    def test_symmetric_box_is_pure_scale(self):
        cam = OrthoCamera(RigidTransform.identity(), ViewBox(-1, 1, -1, 1, 0, 2), 10, 10)
        m = ortho_matrix(cam)
        self.assertEqual(m[0, 3], 0.0)
        self.assertEqual(m[1, 3], 0.0)
        np.testing.assert_array_equal(m[3], [0, 0, 0, 1])

    def test_left_bottom_near_corner(self):
        cam = OrthoCamera(RigidTransform.identity(), ViewBox(-2, 3, -1, 4, 1, 9), 10, 10)
        np.testing.assert_allclose(to_ndc(ortho_matrix(cam), [-2, -1, 1])[0], [-1, 1, -1], atol=1e-12)

    def test_random_boxes_match_per_axis_map(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            lo = rng.uniform(-10, 10, 3)
            hi = lo + rng.uniform(0.5, 50, 3)
            box = ViewBox(lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])
            m = ortho_matrix(OrthoCamera(RigidTransform.identity(), box, 8, 8))
            point = rng.uniform(lo, hi)
            expected = [
                2 * (point[0] - lo[0]) / (hi[0] - lo[0]) - 1,
                1 - 2 * (point[1] - lo[1]) / (hi[1] - lo[1]),
                2 * (point[2] - lo[2]) / (hi[2] - lo[2]) - 1,
            ]
            np.testing.assert_allclose(to_ndc(m, point)[0], expected, atol=1e-12)
            for corner in itertools.product(*zip(lo, hi)):
                self.assertTrue(np.allclose(np.abs(to_ndc(m, corner)[0]), 1.0, atol=1e-12))

    def test_degenerate_box_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            ViewBox(0, 0, -1, 1, 0, 1)


class RayTests(SimpleTestCase):
    def setUp(self):
        self.cam = OrthoCamera(RigidTransform.identity(), ViewBox(-1, 1, -1, 1, 0, 10), 11, 11)

    def test_center_pixel_of_symmetric_box(self):
        ray = ortho_ray((5, 5), self.cam)
        np.testing.assert_allclose(ray.origin, [0, 0, 0], atol=1e-12)
        np.testing.assert_array_equal(ray.direction, [0, 0, 1])

    def test_first_pixel_is_half_a_step_from_the_corner(self):
        ray = ortho_ray((0, 0), self.cam)
        step = 2 / 11
        np.testing.assert_allclose(ray.origin, [-1 + step / 2, 1 - step / 2, 0], atol=1e-12)

    def test_out_of_bounds_pixel(self):
        with self.assertRaises(InvalidInputError):
            ortho_ray((11, 0), self.cam)

    def test_crop_reproduces_parent_rays(self):
        child = self.cam.crop(3, 4, 5, 6)
        np.testing.assert_array_equal(ortho_ray((1, 2), child).origin, ortho_ray((4, 6), self.cam).origin)

    def test_perspective_center_ray_is_axial(self):
        cam = PerspectiveCamera(RigidTransform.identity(), 1.0, 10.0, 1.0, 1.0, 9, 9)
        np.testing.assert_allclose(perspective_ray((4, 4), cam).direction, [0, 0, 1], atol=1e-12)

    def test_ray_direction_is_normalized(self):
        self.assertAlmostEqual(float(np.linalg.norm(Ray([0, 0, 0], [3, 4, 0]).direction)), 1.0, places=12)


class IntersectionTests(SimpleTestCase):
    def test_head_on_hit(self):
        hit = ray_splat_intersect(Ray([0, 0, 0], [0, 0, 1]), splat([0, 0, 5]), RigidTransform.identity())
        np.testing.assert_allclose(hit.uv, [0, 0])
        self.assertEqual(hit.gaussian_value, 1.0)
        self.assertEqual(hit.view_depth, 5.0)
        self.assertFalse(hit.degenerate)

    def test_edge_on_is_degenerate(self):
        half = math.sqrt(0.5)
        hit = ray_splat_intersect(Ray([0, 0, 0], [0, 0, 1]), splat([0, 0, 5], rotation=(half, half, 0, 0)), RigidTransform.identity())
        self.assertTrue(hit.degenerate)
        self.assertTrue(math.isfinite(hit.view_depth))

    def test_behind_near_plane_is_a_miss(self):
        result = ray_splat_intersect(Ray([0, 0, 0], [0, 0, 1]), splat([0, 0, 5]), RigidTransform.identity(), z_near=6.0)
        self.assertIsNone(result)

    def test_random_pairs_match_plane_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            q = rng.normal(size=4)
            s = splat(rng.normal(size=3) + [0, 0, 20], rotation=q, scales=rng.uniform(0.2, 3, 2))
            pose = RigidTransform(random_rotation(rng), rng.normal(size=3))
            ray = Ray(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.1 + [0, 0, 1])
            hit = ray_splat_intersect(ray, s, pose, -math.inf, math.inf)
            center = pose.apply(s.center)
            r = pose.rotation @ s.rotation_matrix
            normal = r[:, 2]
            denom = np.dot(ray.direction, normal)
            if abs(denom) < 0.05:
                continue
            tau = np.dot(center - ray.origin, normal) / denom
            point = ray.origin + tau * ray.direction
            expected_uv = [np.dot(point - center, r[:, 0]) / s.scales[0], np.dot(point - center, r[:, 1]) / s.scales[1]]
            np.testing.assert_allclose(hit.hit_point, point, atol=1e-10)
            np.testing.assert_allclose(hit.uv, expected_uv, atol=1e-9)
            self.assertAlmostEqual(hit.view_depth, point[2], delta=1e-10)

    def test_axial_fast_path_matches_generic(self):
        rng = np.random.default_rng(4)
        s = splat([0.2, -0.1, 4], rotation=(0.9, 0.2, -0.3, 0.1), scales=(0.7, 0.4))
        r = s.rotation_matrix
        xs, ys = rng.uniform(-1, 1, (2, 50))
        u, v, z, _ = intersect_planes_axial(xs, ys, s.center, r[:, 0], r[:, 1], r[:, 2], s.scales)
        for i in range(50):
            hit = ray_splat_intersect(Ray([xs[i], ys[i], 0], [0, 0, 1]), s, RigidTransform.identity(), -math.inf, math.inf)
            self.assertAlmostEqual(u[0, i], hit.uv[0], delta=1e-10)
            self.assertAlmostEqual(v[0, i], hit.uv[1], delta=1e-10)
            self.assertAlmostEqual(z[0, i], hit.view_depth, delta=1e-10)


class ProjectCenterTests(SimpleTestCase):
    def setUp(self):
        self.cam = OrthoCamera(RigidTransform.identity(), ViewBox(-2, 2, -1, 1, 0, 10), 40, 20)

    def test_volume_center_maps_to_image_center(self):
        result = project_center(splat([0, 0, 5]), self.cam)
        self.assertAlmostEqual(result.x, 20.0, places=9)
        self.assertAlmostEqual(result.y, 10.0, places=9)
        self.assertTrue(result.in_view)

    def test_left_top_maps_to_pixel_corner(self):
        result = project_center(splat([-2, 1, 5]), self.cam)
        self.assertAlmostEqual(result.x, 0.0, places=9)
        self.assertAlmostEqual(result.y, 0.0, places=9)

    def test_outside_volume_is_flagged(self):
        self.assertFalse(project_center(splat([0, 0, 11]), self.cam).in_view)

    def test_matches_matrix_composition_and_camera_projection(self):
        rng = np.random.default_rng(5)
        m = ortho_matrix(self.cam)
        for _ in range(100):
            center = rng.uniform([-2, -1, 0], [2, 1, 10])
            result = project_center(splat(center), self.cam)
            expected = viewport(to_ndc(m, center)[0, :2], 40, 20)[0]
            self.assertAlmostEqual(result.x, expected[0], delta=1e-9)
            self.assertAlmostEqual(result.y, expected[1], delta=1e-9)
            direct, _ = self.cam.project_view_points(center)
            self.assertAlmostEqual(result.x, direct[0, 0], delta=1e-9)

    def test_depth_shift_keeps_pixel_footprint(self):
        a = project_center(splat([0.3, 0.2, 2]), self.cam)
        b = project_center(splat([0.3, 0.2, 7]), self.cam)
        self.assertAlmostEqual(a.x, b.x, places=12)
        self.assertAlmostEqual(a.y, b.y, places=12)


class CameraSerializationTests(SimpleTestCase):
    def test_round_trip(self):
        pose = RigidTransform(np.diag([1.0, 1.0, -1.0]), [0, 0, 50])
        cam = OrthoCamera(pose, ViewBox(0, 10, 0, 5, 0, 60), 100, 50)
        back = camera_from_dict(cam.as_dict())
        self.assertEqual(back.box, cam.box)
        np.testing.assert_array_equal(back.pose.rotation, pose.rotation)
        self.assertAlmostEqual(back.gsd, 0.1)

    def test_rejects_non_orthonormal_pose(self):
        with self.assertRaises(InvalidInputError):
            RigidTransform(np.eye(3) * 2, np.zeros(3))
