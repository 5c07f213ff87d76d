import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poemscene.geometry import (
    CubeMap,
    FRONT_FACE_INDEX,
    GeometryError,
    ImageBuffer,
    PanoImage,
    PerspectiveCamera,
    cubemap_to_pano,
    frustum_contains,
    look_at_quat,
    pano_to_cubemap,
    pixel_to_ray,
    project_pano_to_view,
    quat_to_matrix,
    ray_to_pixel,
    resize_bilinear,
    sample_pano,
    tangent_cameras,
)
from poemscene.optim.loss import psnr

from conftest import sphere_pano as smooth_pano


class TestPixelRay:
    def test_center_pixel_looks_along_positive_z(self):
        d = pixel_to_ray(1024, 512, 511.5, 255.5)
        assert np.allclose(d, [0, 0, 1], atol=1e-12)

    def test_north_pole_limit(self):
        d = pixel_to_ray(1024, 512, 511.5, 1e-9)
        assert d[1] > 0.9999
        assert abs(np.linalg.norm(d) - 1) < 1e-12

    def test_inverse_of_center(self):
        u, v = ray_to_pixel(np.array([0.0, 0.0, 1.0]), 1024, 512)
        assert abs(u - 511.5) < 1e-9
        assert abs(v - 255.5) < 1e-9

    def test_antipodal_seam_wraps_consistently(self):
        u, v = ray_to_pixel(np.array([0.0, 0.0, -1.0]), 1024, 512)
        assert abs(v - 255.5) < 1e-9
        assert min(abs(u - (-0.5)), abs(u - 1023.5)) < 1e-9

    def test_round_trip_identity_10k(self):
        rng = np.random.default_rng(0)
        w, h = 1024, 512
        u = rng.uniform(0.01, w - 1.01, 10_000)
        v = rng.uniform(0.01, h - 0.51, 10_000)  # open domain: polar half-pixel strip excluded
        d = pixel_to_ray(w, h, u, v)
        assert np.allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-12)
        u2, v2 = ray_to_pixel(d, w, h)
        du = np.minimum(np.abs(u2 - u), w - np.abs(u2 - u))  # seam-aware
        assert du.max() < 1e-6
        assert np.abs(v2 - v).max() < 1e-6

    def test_out_of_range_rejected(self):
        with pytest.raises(GeometryError):
            pixel_to_ray(64, 32, 64.0, 5.0)
        with pytest.raises(GeometryError):
            ray_to_pixel(np.zeros(3), 64, 32)

    @given(
        st.floats(0.01, 1023.9),
        st.floats(0.01, 511.49),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, u, v):
        d = pixel_to_ray(1024, 512, u, v)
        u2, v2 = ray_to_pixel(d, 1024, 512)
        du = min(abs(u2 - u), 1024 - abs(u2 - u))
        assert du < 1e-6 and abs(v2 - v) < 1e-6


class TestCubemap:
    def test_constant_pano_gives_constant_faces(self):
        data = np.full((64, 128, 3), 0.37, dtype=np.float32)
        cube = pano_to_cubemap(PanoImage(ImageBuffer(data)), 32)
        for face in cube.faces:
            assert np.allclose(face.data, 0.37, atol=1e-6)

    def test_front_face_is_minus_z(self):
        pano = smooth_pano(64, seed=9)
        cube = pano_to_cubemap(pano, 65)  # odd size: center pixel exists
        u, v = ray_to_pixel(np.array([0.0, 0.0, -1.0]), pano.width, pano.height)
        expected = sample_pano(pano, u % pano.width, v)
        center = cube.front.data[32, 32]
        assert np.allclose(center, expected, atol=1e-5)
        assert cube.faces[FRONT_FACE_INDEX] is cube.front

    def test_round_trip_psnr_at_face_size_h(self):
        pano = smooth_pano(128, seed=5)  # band-limited on the sphere
        cube = pano_to_cubemap(pano, 128)
        back = cubemap_to_pano(cube, pano.width, pano.height)
        assert psnr(back.data, pano.data) >= 40.0

    def test_round_trip_psnr_supersampled(self):
        pano = smooth_pano(64, seed=11)
        cube = pano_to_cubemap(pano, 256)  # 4x supersampling
        back = cubemap_to_pano(cube, pano.width, pano.height)
        assert psnr(back.data, pano.data) >= 40.0

    def test_resampling_deterministic(self):
        pano = smooth_pano(64, seed=2)
        a = pano_to_cubemap(pano, 48)
        b = pano_to_cubemap(pano, 48)
        for fa, fb in zip(a.faces, b.faces):
            assert np.array_equal(fa.data, fb.data)

    def test_face_size_validation(self):
        with pytest.raises(GeometryError):
            pano_to_cubemap(smooth_pano(32), 0)

    def test_cube_requires_equal_square_faces(self):
        faces = [ImageBuffer(np.zeros((8, 8, 3), np.float32))] * 5
        faces.append(ImageBuffer(np.zeros((4, 4, 3), np.float32)))
        with pytest.raises(GeometryError):
            CubeMap(tuple(faces))


class TestTangentCameras:
    def test_exactly_twenty_poses(self):
        cams = tangent_cameras()
        assert len(cams) == 20
        for c in cams:
            assert np.allclose(c.position, 0.0)
            assert abs(np.linalg.norm(c.orientation) - 1) < 1e-9

    def test_other_counts_rejected(self):
        with pytest.raises(GeometryError):
            tangent_cameras(12)

    def test_coverage_and_membership(self):
        # Monte-Carlo oracle: every direction lands in at least one frustum.
        rng = np.random.default_rng(0)
        d = rng.normal(size=(100_000, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        counts = np.zeros(len(d), dtype=int)
        for cam in tangent_cameras():
            counts += frustum_contains(cam, d)
        assert counts.min() >= 1  # 100% coverage
        # with the default 75 deg overlap the measured membership tops out at
        # 5 (the icosahedron-vertex caps sit inside all five adjacent frusta)
        assert counts.max() <= 5

    def test_antipodal_axis_pairs_covered(self):
        cams = tangent_cameras()
        axes = np.array([quat_to_matrix(c.orientation)[:, 2] for c in cams])
        for ax in axes:
            assert min(np.linalg.norm(axes + ax, axis=1)) < 1e-9  # antipode present
        covered = np.zeros(len(axes), dtype=bool)
        for cam in cams:
            covered |= frustum_contains(cam, axes)
        assert covered.all()


class TestProjectPanoToView:
    def test_constant_pano_constant_view(self):
        data = np.full((64, 128, 3), 0.25, dtype=np.float32)
        cam = PerspectiveCamera(np.zeros(3), [1, 0, 0, 0], np.radians(70), 32, 32)
        img = project_pano_to_view(PanoImage(ImageBuffer(data)), cam)
        assert np.allclose(img.data, 0.25, atol=1e-6)

    def test_z_aligned_center_pixel_matches_pano_center(self):
        pano = smooth_pano(64, seed=21)
        cam = PerspectiveCamera(np.zeros(3), [1, 0, 0, 0], np.radians(70), 33, 33)
        img = project_pano_to_view(pano, cam)
        expected = sample_pano(pano, pano.width / 2 - 0.5, pano.height / 2 - 0.5)
        assert np.allclose(img.data[16, 16], expected, atol=1e-5)

    def test_twenty_views_restitch_pano(self):
        pano = smooth_pano(96, seed=33)
        cams = tangent_cameras(resolution=128)
        images = [project_pano_to_view(pano, c).data.astype(np.float64) for c in cams]
        axes = np.array([quat_to_matrix(c.orientation)[:, 2] for c in cams])

        uu, vv = np.meshgrid(np.arange(pano.width, dtype=float), np.arange(pano.height, dtype=float))
        rays = pixel_to_ray(pano.width, pano.height, uu, vv)
        owner = np.argmax(rays @ axes.T, axis=-1)  # nearest tangent axis
        out = np.zeros_like(pano.data, dtype=np.float64)
        for k, cam in enumerate(cams):
            m = owner == k
            if not m.any():
                continue
            local = rays[m] @ cam.rotation
            f = cam.focal
            px = cam.width / 2 + f * local[:, 0] / local[:, 2] - 0.5
            py = cam.height / 2 - f * local[:, 1] / local[:, 2] - 0.5
            ix = np.clip(px, 0, cam.width - 1)
            iy = np.clip(py, 0, cam.height - 1)
            i0 = np.floor(ix).astype(int)
            j0 = np.floor(iy).astype(int)
            i1 = np.minimum(i0 + 1, cam.width - 1)
            j1 = np.minimum(j0 + 1, cam.height - 1)
            fu = (ix - i0)[:, None]
            fv = (iy - j0)[:, None]
            img = images[k]
            vals = (
                img[j0, i0] * (1 - fu) * (1 - fv)
                + img[j0, i1] * fu * (1 - fv)
                + img[j1, i0] * (1 - fu) * fv
                + img[j1, i1] * fu * fv
            )
            out[m] = vals
        assert psnr(out, pano.data) >= 35.0


class TestResize:
    def test_identity_resize(self):
        pano = smooth_pano(32, seed=1)
        out = resize_bilinear(pano.buffer, 32, 64)
        assert np.allclose(out.data, pano.data, atol=1e-6)

    def test_dims(self):
        out = resize_bilinear(smooth_pano(32).buffer, 16, 48)
        assert (out.height, out.width) == (16, 48)


class TestImageBuffer:
    def test_color_range_enforced(self):
        with pytest.raises(GeometryError):
            ImageBuffer(np.full((4, 4, 3), 1.5, np.float32))

    def test_depth_nonnegative(self):
        with pytest.raises(GeometryError):
            ImageBuffer(np.full((4, 4, 1), -0.1, np.float32))

    def test_pano_aspect(self):
        with pytest.raises(GeometryError):
            PanoImage(ImageBuffer(np.zeros((64, 64, 3), np.float32)))

    def test_camera_invariants(self):
        with pytest.raises(GeometryError):
            PerspectiveCamera(np.zeros(3), [1, 0.1, 0, 0], 1.0, 8, 8)
        with pytest.raises(GeometryError):
            PerspectiveCamera(np.zeros(3), [1, 0, 0, 0], 1.0, 8, 8, near=2.0, far=1.0)
