import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poemscene.geometry import GeometryError, ImageBuffer, PanoImage, pixel_to_ray
from poemscene.pointcloud import (
    DepthCalibration,
    PointCloud,
    calibrate_depth,
    depth_pano_to_points,
    load_ply,
    save_ply,
    subsample,
)


def pano_pair(h=32, seed=0, depth_lo=0.5, depth_hi=9.0):
    rng = np.random.default_rng(seed)
    rgb = PanoImage(ImageBuffer(rng.uniform(0, 1, (h, 2 * h, 3)).astype(np.float32)))
    depth = PanoImage(
        ImageBuffer(rng.uniform(depth_lo, depth_hi, (h, 2 * h, 1)).astype(np.float32))
    )
    return rgb, depth


class TestCalibration:
    def test_affine_maps_range_to_near_far(self):
        rng = np.random.default_rng(2)
        data = rng.uniform(0, 1, (16, 32, 1)).astype(np.float32)
        data.flat[0] = 0.0
        data.flat[-1] = 1.0
        depth = PanoImage(ImageBuffer(data))
        out = calibrate_depth(depth, DepthCalibration("affine-normalize", 1.0, 10.0))
        assert abs(out.data.min() - 1.0) < 1e-5
        assert abs(out.data.max() - 10.0) < 1e-5

    def test_affine_midpoint(self):
        data = np.zeros((16, 32, 1), np.float32)
        data[0, 0] = 0.0
        data[0, 1] = 1.0
        data[8, :] = 0.5
        out = calibrate_depth(PanoImage(ImageBuffer(data)), DepthCalibration("affine-normalize", 1.0, 10.0))
        assert abs(out.data[8, 4, 0] - 5.5) < 1e-5

    def test_metric_passthrough_identity(self):
        _, depth = pano_pair(seed=5)
        out = calibrate_depth(depth, DepthCalibration("metric-passthrough", 0.1, 100.0))
        assert np.array_equal(out.data, depth.data)

    def test_constant_affine_rejected(self):
        data = np.full((8, 16, 1), 0.4, np.float32)
        with pytest.raises(GeometryError):
            calibrate_depth(PanoImage(ImageBuffer(data)), DepthCalibration("affine-normalize", 1, 2))

    def test_mode_validation(self):
        with pytest.raises(GeometryError):
            DepthCalibration("nonsense", 1, 2)
        with pytest.raises(GeometryError):
            DepthCalibration("affine-normalize", 5, 2)


class TestUnprojection:
    def test_full_pano_point_count(self):
        # production-scale contract: 1024x2048 panorama -> exactly 2,097,152 points
        h = 1024
        rgb = PanoImage(ImageBuffer(np.zeros((h, 2 * h, 3), np.float32)))
        depth = PanoImage(ImageBuffer(np.linspace(1, 2, h * 2 * h).reshape(h, 2 * h, 1).astype(np.float32)))
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        assert cloud.count == 2_097_152

    def test_unit_depth_lands_on_unit_sphere(self):
        rgb, _ = pano_pair(16, seed=1)
        depth = PanoImage(ImageBuffer(np.ones((16, 32, 1), np.float32)))
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        norms = np.linalg.norm(cloud.positions, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-9

    def test_center_pixel_along_positive_z(self):
        h, w = 16, 32
        rgb = PanoImage(ImageBuffer(np.zeros((h, w, 3), np.float32)))
        data = np.ones((h, w, 1), np.float32)
        v, u = h // 2, w // 2  # pixel whose center ray is closest to +Z
        data[v, u] = 2.5
        depth = PanoImage(ImageBuffer(data))
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        p = cloud.positions[v * w + u]
        expected = 2.5 * pixel_to_ray(w, h, float(u), float(v))
        assert np.allclose(p, expected, atol=1e-12)

    def test_radial_and_direction_invariants(self):
        rgb, depth = pano_pair(24, seed=9)
        calib = DepthCalibration("affine-normalize", 0.5, 20.0)
        cloud = depth_pano_to_points(rgb, depth, calib)
        calibrated = calibrate_depth(depth, calib).data[:, :, 0].astype(np.float64).ravel()
        norms = np.linalg.norm(cloud.positions, axis=1)
        assert np.abs(norms - calibrated).max() / calibrated.max() < 1e-6
        h, w = 24, 48
        uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
        rays = pixel_to_ray(w, h, uu, vv).reshape(-1, 3)
        dirs = cloud.positions / norms[:, None]
        assert np.abs(dirs - rays).max() < 1e-9

    def test_colors_copied_in_raster_order(self):
        rgb, depth = pano_pair(8, seed=3)
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        assert np.array_equal(cloud.colors.reshape(8, 16, 3), rgb.data)

    def test_dimension_mismatch_rejected(self):
        rgb, _ = pano_pair(16)
        _, depth = pano_pair(8)
        with pytest.raises(GeometryError):
            depth_pano_to_points(rgb, depth, DepthCalibration())


class TestSubsample:
    def test_stride_one_identity(self):
        rgb, depth = pano_pair(8)
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        out = subsample(cloud, 1)
        assert out.count == cloud.count
        assert np.array_equal(out.positions, cloud.positions)

    def test_stride_four_count(self):
        cloud = PointCloud(np.zeros((2_097_152 % 4096 + 4096, 3)), np.zeros((2_097_152 % 4096 + 4096, 3), np.float32))
        assert subsample(cloud, 4).count == cloud.count // 4

    def test_exact_stride_count_on_full_grid(self):
        pos = np.arange(48 * 3, dtype=np.float64).reshape(48, 3)
        cloud = PointCloud(pos, np.zeros((48, 3), np.float32))
        out = subsample(cloud, 4)
        assert out.count == 12
        assert np.array_equal(out.positions[0], cloud.positions[0])

    @given(st.integers(1, 7), st.integers(1, 60))
    @settings(max_examples=50, deadline=None)
    def test_count_arithmetic(self, stride, n):
        pos = np.arange(n * 3, dtype=np.float64).reshape(n, 3)
        cloud = PointCloud(pos, np.zeros((n, 3), np.float32))
        out = subsample(cloud, stride)
        assert out.count == (n + stride - 1) // stride
        assert np.array_equal(out.positions[0], cloud.positions[0])


class TestPly:
    def test_round_trip(self, tmp_path):
        rgb, depth = pano_pair(8, seed=7)
        cloud = depth_pano_to_points(rgb, depth, DepthCalibration("metric-passthrough", 0.5, 50))
        path = tmp_path / "cloud.ply"
        save_ply(cloud, path)
        back = load_ply(path)
        assert back.count == cloud.count
        assert np.abs(back.positions - cloud.positions).max() < 1e-6  # float32 storage
        assert np.array_equal(back.colors, cloud.colors)
