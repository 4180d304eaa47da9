import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planeparallax.geometry import (
    BehindCameraError,
    CameraIntrinsics,
    DepthMap,
    GammaMap,
    PlaneModel,
    RigidMotion,
    as_image,
    backproject,
    depth_from_gamma,
    gamma_from_depth,
    point_plane_height,
    project,
)

K_UNIT = CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 10, 10)
K_100 = CameraIntrinsics(100.0, 100.0, 50.0, 40.0, 120, 100)
ROAD = PlaneModel()

intrinsics = st.builds(
    CameraIntrinsics,
    fx=st.floats(50, 2000),
    fy=st.floats(50, 2000),
    cx=st.floats(0, 640),
    cy=st.floats(0, 480),
    width=st.integers(1, 1280),
    height=st.integers(1, 960),
)


class TestCameraIntrinsics:
    def test_rejects_bad_focal_length(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 1.0, 0, 0, 4, 4)

    def test_rejects_empty_image(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(1.0, 1.0, 0, 0, 0, 4)

    @given(intrinsics)
    def test_inverse_matches_numpy(self, k):
        np.testing.assert_allclose(k.inverse @ k.matrix, np.eye(3), atol=1e-12)

    def test_pixel_grid_layout(self):
        g = CameraIntrinsics(1, 1, 0, 0, 3, 2).pixel_grid()
        assert g.shape == (2, 3, 2)
        assert tuple(g[1, 2]) == (2.0, 1.0)


class TestRigidMotion:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            RigidMotion(np.diag([1.0, 1.0, 2.0]), np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            RigidMotion(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_inverse_and_compose(self, rng):
        from scipy.spatial.transform import Rotation

        m = RigidMotion(Rotation.random(random_state=1).as_matrix(), rng.normal(size=3))
        ident = m.compose(m.inverse())
        np.testing.assert_allclose(ident.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(ident.t, 0.0, atol=1e-12)
        x = rng.normal(size=(5, 3))
        np.testing.assert_allclose(m.inverse().apply(m.apply(x)), x, atol=1e-12)


class TestPlaneModel:
    def test_defaults_are_horizontal_road(self):
        assert ROAD.d_c == 1.65
        assert tuple(ROAD.N) == (0.0, 1.0, 0.0)

    def test_rejects_non_unit_normal(self):
        with pytest.raises(ValueError):
            PlaneModel(np.array([0.0, 2.0, 0.0]), 1.0)

    def test_rejects_non_positive_distance(self):
        with pytest.raises(ValueError):
            PlaneModel(np.array([0.0, 1.0, 0.0]), 0.0)

    def test_transformed_keeps_points_on_plane(self, rng):
        from scipy.spatial.transform import Rotation

        m = RigidMotion(Rotation.from_rotvec([0.1, -0.2, 0.05]).as_matrix(), [0.3, -0.1, 0.5])
        x = rng.normal(size=(20, 3))
        x[:, 1] = 1.65  # on the road
        moved = m.apply(x)
        np.testing.assert_allclose(point_plane_height(moved, ROAD.transformed(m)), 0.0, atol=1e-12)


class TestProjection:
    def test_optical_axis(self):
        np.testing.assert_array_equal(project([0.0, 0.0, 2.0], K_UNIT), [0.0, 0.0])

    def test_hand_evaluated(self):
        np.testing.assert_allclose(project([1.0, 1.0, 1.0], K_100), [150.0, 140.0])

    @pytest.mark.parametrize("z", [-1.0, 0.0, np.nan])
    def test_behind_camera(self, z):
        with pytest.raises(BehindCameraError):
            project([0.0, 0.0, z], K_100)

    def test_backproject_examples(self):
        np.testing.assert_array_equal(backproject([0.0, 0.0], 2.0, K_UNIT), [0.0, 0.0, 2.0])
        np.testing.assert_allclose(backproject([150.0, 140.0], 1.0, K_100), [1.0, 1.0, 1.0])

    def test_backproject_rejects_non_positive_depth(self):
        with pytest.raises(BehindCameraError):
            backproject([1.0, 1.0], 0.0, K_100)

    def test_round_trip_1000_pixels(self, rng):
        px = rng.uniform(0, 120, size=(1000, 2))
        z = rng.uniform(0.1, 250, size=1000)
        np.testing.assert_allclose(project(backproject(px, z, K_100), K_100), px, atol=1e-9, rtol=0)

    @given(intrinsics, st.floats(-500, 1500), st.floats(-500, 1500), st.floats(0.1, 250))
    def test_round_trip_property(self, k, u, v, z):
        p = project(backproject([u, v], z, k), k)
        assert np.abs(p - [u, v]).max() < 1e-9


class TestHeightAndGamma:
    @pytest.mark.parametrize(
        "point, h",
        [((0, 1.65, 10), 0.0), ((0, 0, 10), 1.65), ((2, 0.65, 7), 1.0)],
    )
    def test_point_plane_height(self, point, h):
        assert point_plane_height(np.array(point, float), ROAD) == pytest.approx(h, abs=1e-15)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.5, 5), st.floats(-1, 1),
           st.floats(-1, 1), st.floats(-1, 1))
    def test_points_on_plane_have_zero_height(self, a, b, d, nx, ny, nz):
        n = np.array([nx, ny, nz])
        if np.linalg.norm(n) < 1e-3:
            return
        plane = PlaneModel.from_normal(n, d)
        # build an in-plane point from two tangent directions
        t1 = np.cross(plane.N, [1.0, 0.0, 0.0])
        if np.linalg.norm(t1) < 1e-6:
            t1 = np.cross(plane.N, [0.0, 1.0, 0.0])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(plane.N, t1)
        x = plane.d_c * plane.N + a * t1 + b * t2
        assert abs(point_plane_height(x, plane)) < 1e-12

    def test_road_image_has_zero_gamma(self):
        k = CameraIntrinsics(200, 200, 31.5, 0.0, 64, 32)  # horizon on row 0
        rays = k.rays()
        z = 1.65 / np.where(rays[..., 1] > 0, rays[..., 1], 1.0)
        depth = DepthMap(z, rays[..., 1] > 0)
        g = gamma_from_depth(depth, k, ROAD)
        np.testing.assert_allclose(g.values[g.valid], 0.0, atol=1e-15)
        # the horizon row and rows beyond 250 m are invalid
        np.testing.assert_array_equal(g.valid, (rays[..., 1] > 0) & (z <= 250.0))
        assert g.valid[-1].all() and not g.valid[0].any()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            gamma_from_depth(DepthMap(np.ones((3, 3))), K_UNIT, ROAD)

    def test_gamma_hand_evaluated(self):
        # a pixel whose point sits 1 m above the road at Z = 7
        k = CameraIntrinsics(100, 100, 0, 0, 4, 4)
        x = np.array([0.0, 0.65, 7.0])
        u, v = project(x, k)
        kk = CameraIntrinsics(100, 100, -u, -v, 4, 4)  # move that pixel to (0, 0)
        g = gamma_from_depth(DepthMap(np.full((4, 4), 7.0)), kk, ROAD)
        assert g.values[0, 0] == pytest.approx(1 / 7, abs=1e-12)

    def test_fronto_plane_scaling(self):
        k = CameraIntrinsics(50, 50, 7.5, 7.5, 16, 16)
        fronto = PlaneModel(np.array([0.0, 0.0, 1.0]), 10.0)
        for z in (2.0, 4.0):
            g = gamma_from_depth(DepthMap(np.full((16, 16), z)), k, fronto)
            np.testing.assert_allclose(g.values, (10.0 - z) / z, rtol=1e-14)

    def test_invalid_pixels_stay_invalid(self):
        values = np.full((4, 4), 5.0)
        values[0, 0] = 0.0  # below depth_min
        values[1, 1] = 300.0  # above depth_max
        g = gamma_from_depth(DepthMap(values), CameraIntrinsics(1, 1, 0, 0, 4, 4), ROAD)
        assert not g.valid[0, 0] and not g.valid[1, 1] and g.valid.sum() == 14


class TestDepthFromGamma:
    def test_hand_evaluated(self):
        # ray with N.r = 1.65 / 10: v - cy = 16.5 at f = 100
        k = CameraIntrinsics(100, 100, 0.0, -16.5, 1, 1)
        z = depth_from_gamma(GammaMap(np.zeros((1, 1))), k, ROAD)
        assert z.valid[0, 0] and z.values[0, 0] == pytest.approx(10.0, rel=1e-15)

    def test_singular_ray_is_invalid(self):
        k = CameraIntrinsics(100, 100, 0.0, 0.0, 1, 1)  # N.r = 0 at the principal point
        z = depth_from_gamma(GammaMap(np.zeros((1, 1))), k, ROAD)
        assert not z.valid[0, 0]

    def test_out_of_range_is_invalid(self):
        k = CameraIntrinsics(100, 100, 0.0, -1.0, 1, 1)  # N.r = 0.01 -> Z = 165
        assert depth_from_gamma(GammaMap(np.zeros((1, 1))), k, ROAD).valid[0, 0]
        k = CameraIntrinsics(100, 100, 0.0, -0.5, 1, 1)  # Z = 330 > 250
        assert not depth_from_gamma(GammaMap(np.zeros((1, 1))), k, ROAD).valid[0, 0]

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip_random_maps(self, seed):
        r = np.random.default_rng(seed)
        k = CameraIntrinsics(r.uniform(100, 800), r.uniform(100, 800), 20, 12, 40, 24)
        n = r.normal(size=3)
        plane = PlaneModel.from_normal(n, r.uniform(1, 3))
        depth = DepthMap(r.uniform(0.5, 100, size=(24, 40)))
        g = gamma_from_depth(depth, k, plane)
        back = depth_from_gamma(g, k, plane)
        ok = back.valid & depth.valid
        # rays nearly parallel to the plane are ill-conditioned; skip those
        cond = np.abs(g.values + k.rays() @ plane.N) > 1e-3
        assert np.abs(back.values - depth.values)[ok & cond].max(initial=0) < 1e-9


class TestImageValidation:
    def test_accepts_gray_and_rgb(self):
        assert as_image(np.zeros((2, 3))).dtype == np.float32
        assert as_image(np.ones((2, 3, 3))).shape == (2, 3, 3)

    @pytest.mark.parametrize("bad", [np.full((2, 2), 1.5), np.full((2, 2), -0.1), np.zeros((2, 2, 2))])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            as_image(bad)
