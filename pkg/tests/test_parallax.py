import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from planeparallax.geometry import BehindCameraError, CameraIntrinsics, DepthMap, PlaneModel, RigidMotion
from planeparallax.parallax import (
    ParallaxSingularityError,
    full_reprojection_oracle,
    planar_parallax_map,
    residual_parallax,
    structure_gamma,
    synthesize_target,
)
from planeparallax.verification import DerivationConfig, verify_derivation

K_EYE = CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 4, 4)
K = CameraIntrinsics(721.5, 721.5, 609.6, 172.9, 1242, 375)


class TestResidualParallax:
    def test_hand_evaluated(self):
        d = residual_parallax([1.0, 1.0], 0.2, [0, 0, 0.5], 1.65, K_EYE)
        np.testing.assert_allclose(d, [0.2 / 1.55 * 0.5] * 2, rtol=1e-15)
        assert d[0] == pytest.approx(0.064516, abs=1e-6)

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1242), st.floats(0, 375))
    def test_on_plane_is_fixed(self, tx, ty, tz, u, v):
        assert np.abs(residual_parallax([u, v], 0.0, [tx, ty, tz], 1.65, K)).max() == 0.0

    @given(st.floats(-5, 5), st.floats(0, 1242), st.floats(0, 375))
    def test_no_motion_is_fixed(self, gamma, u, v):
        assert np.abs(residual_parallax([u, v], gamma, [0, 0, 0], 1.65, K)).max() == 0.0

    def test_singularity(self):
        with pytest.raises(ParallaxSingularityError):
            residual_parallax([10.0, 10.0], 1.65 / 0.5, [0, 0, 0.5], 1.65, K)

    def test_vectors_point_through_epipole(self, rng):
        t = np.array([0.2, -0.1, 0.8])
        epipole = (K.matrix @ t)[:2] / t[2]
        p = rng.uniform(0, [1242, 375], size=(200, 2))
        d = residual_parallax(p, rng.uniform(-0.3, 0.3, size=200), t, 1.65, K)
        to_epi = epipole - p
        cross = d[:, 0] * to_epi[:, 1] - d[:, 1] * to_epi[:, 0]
        np.testing.assert_allclose(cross, 0.0, atol=1e-9 * np.abs(to_epi).max() * np.abs(d).max())


class TestOracle:
    def test_point_on_plane(self, rng):
        motion = RigidMotion(Rotation.from_rotvec([0.02, 0.1, -0.01]).as_matrix(), [0.3, 0.05, 0.9])
        plane = PlaneModel()
        p = rng.uniform([0, 200], [1242, 375], size=(100, 2))
        # depth of the road along each target ray: target-frame plane
        plane_t = plane.transformed(motion)
        z = plane_t.d_c / (K.rays(p) @ plane_t.N)
        ok = (z > 0) & (z < 200)
        pw = full_reprojection_oracle(p[ok], z[ok], motion, plane, K)
        np.testing.assert_allclose(pw, p[ok], atol=1e-9)

    def test_static_camera(self, rng):
        p = rng.uniform(0, 300, size=(20, 2))
        pw = full_reprojection_oracle(p, rng.uniform(2, 80, 20), RigidMotion.identity(), PlaneModel(), K)
        np.testing.assert_allclose(pw, p, atol=1e-9)

    def test_behind_source_camera(self):
        motion = RigidMotion.from_translation([0, 0, 5.0])
        with pytest.raises(BehindCameraError):
            full_reprojection_oracle(np.array([600.0, 180.0]), 3.0, motion, PlaneModel(), K)

    @given(st.integers(0, 2**31))
    def test_agrees_with_closed_form(self, seed):
        r = np.random.default_rng(seed)
        motion = RigidMotion(Rotation.from_rotvec(r.normal(scale=0.1, size=3)).as_matrix(), r.normal(scale=0.7, size=3))
        plane = PlaneModel.from_normal([r.normal(0, 0.1), 1.0, r.normal(0, 0.1)], r.uniform(1, 3))
        p = r.uniform(0, [1242, 375], size=(32, 2))
        z = r.uniform(2, 80, size=32)
        gamma = structure_gamma(p, z, motion, plane, K)
        x_src = (z[:, None] * K.rays(p) - motion.t) @ motion.R
        den = plane.d_c - gamma * motion.t[2]
        ok = (x_src[:, 2] > 1e-3) & (np.abs(den) > 1e-3)
        if not ok.any():
            return
        want = full_reprojection_oracle(p[ok], z[ok], motion, plane, K)
        got = p[ok] + residual_parallax(p[ok], gamma[ok], motion.t, plane.d_c, K)
        assert np.abs(got - want).max() < 1e-6

    def test_batched_check_small(self):
        report = verify_derivation(1, DerivationConfig(trials=200))
        assert report.valid > 0.99 * report.samples
        assert report.max_err_px < 1e-6


class TestParallaxMap:
    def test_road_only_scene_is_fixed(self):
        k = CameraIntrinsics(200, 200, 31.5, -10.0, 64, 32)
        rays = k.rays()
        depth = DepthMap(1.65 / rays[..., 1])
        pw, ok = planar_parallax_map(depth, [0.1, 0.0, 0.7], PlaneModel(), k)
        assert ok.all()
        np.testing.assert_allclose(pw, k.pixel_grid(), atol=1e-12)

    def test_no_motion_is_fixed(self, rng):
        k = CameraIntrinsics(200, 200, 31.5, 15.5, 64, 32)
        depth = DepthMap(rng.uniform(1, 50, size=(32, 64)))
        pw, ok = planar_parallax_map(depth, [0, 0, 0], PlaneModel(), k)
        assert ok.all()
        np.testing.assert_array_equal(pw, k.pixel_grid())

    def test_matches_oracle_on_scene(self, scene):
        src = scene.prev
        pw, ok = planar_parallax_map(scene.depth, src.motion.t, src.plane, scene.k)
        assert ok[scene.depth.valid].all()
        want = full_reprojection_oracle(scene.k.pixel_grid()[ok], scene.depth.values[ok],
                                        src.motion, src.plane, scene.k)
        assert np.abs(pw[ok] - want).max() < 1e-6

    def test_invalid_depth_propagates(self):
        k = CameraIntrinsics(100, 100, 3.5, 3.5, 8, 8)
        values = np.full((8, 8), 10.0)
        values[2, 3] = np.nan
        _, ok = planar_parallax_map(DepthMap(values), [0, 0, 1], PlaneModel(), k)
        assert not ok[2, 3] and ok.sum() == 63

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            planar_parallax_map(DepthMap(np.ones((3, 3))), [0, 0, 1], PlaneModel(), K_EYE)


class TestSynthesize:
    def test_identity_field(self, rng):
        img = rng.uniform(size=(12, 16)).astype(np.float32)
        grid = np.stack(np.meshgrid(np.arange(16.0), np.arange(12.0)), axis=-1)
        out, mask = synthesize_target(img, grid)
        np.testing.assert_array_equal(out, img)
        assert mask.all()

    def test_all_out_of_bounds(self, rng):
        img = rng.uniform(size=(12, 16)).astype(np.float32)
        out, mask = synthesize_target(img, np.full((12, 16, 2), -5.0))
        assert not mask.any() and (out == 0).all()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            synthesize_target(np.zeros((4, 4), np.float32), np.zeros((5, 4, 2)))

    def test_invalid_aligned_pixels_propagate(self, rng):
        img = rng.uniform(size=(8, 8)).astype(np.float32)
        grid = np.stack(np.meshgrid(np.arange(8.0), np.arange(8.0)), axis=-1) + 0.5
        valid = np.ones((8, 8), bool)
        valid[3, 3] = False
        _, mask = synthesize_target(img, grid, aligned_valid=valid)
        # every sample whose 2x2 footprint touches (3, 3) is lost
        assert not mask[2:4, 2:4].any()
        assert mask[5, 5] and mask[0, 0]

    def test_ground_truth_fidelity(self, scene):
        for src in (scene.prev, scene.next):
            pw, ok = planar_parallax_map(scene.depth, src.motion.t, src.plane, scene.k)
            out, mask = synthesize_target(src.aligned, pw, ok, src.valid)
            assert mask.mean() > 0.5
            assert np.abs(out - scene.target)[mask].mean() < 0.01
