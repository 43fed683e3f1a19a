"""Pose images and their conv-encoder embeddings."""

import numpy as np
import pytest

from poselang import core, poseimage


def test_chain_order_is_a_permutation():
    order = poseimage.chain_order()
    assert sorted(order) == list(range(core.N_JOINTS))
    assert order[0] == core.NOSE
    assert order[7] == core.NECK


class TestBilinearResize:
    def test_identity_at_same_size(self):
        rng = np.random.default_rng(0)
        mat = rng.normal(size=(6, 9))
        assert np.allclose(poseimage.bilinear_resize(mat, (6, 9)), mat)

    def test_constant_preserved(self):
        mat = np.full((3, 4), 5.5)
        out = poseimage.bilinear_resize(mat, (7, 11))
        assert np.allclose(out, 5.5)

    def test_known_midpoints(self):
        mat = np.array([[0.0, 2.0], [4.0, 6.0]])
        out = poseimage.bilinear_resize(mat, (3, 3))
        assert np.allclose(out, [[0.0, 1.0, 2.0],
                                 [2.0, 3.0, 4.0],
                                 [4.0, 5.0, 6.0]])

    def test_degenerate_single_row(self):
        mat = np.array([[1.0, 3.0]])
        out = poseimage.bilinear_resize(mat, (4, 2))
        assert np.allclose(out, [[1.0, 3.0]] * 4)


class TestEncodePoseImage:
    def test_range_and_shape(self):
        rng = np.random.default_rng(1)
        window = rng.normal(0.0, 50.0, size=(6, core.N_JOINTS, 2))
        img = poseimage.encode_pose_image(window, (32, 32))
        assert img.values.shape == (32, 32, 2)
        assert img.height == 32 and img.width == 32
        assert img.values.min() >= 0.0
        assert img.values.max() <= 255.0

    def test_min_max_endpoints_without_resize(self):
        rng = np.random.default_rng(2)
        window = rng.normal(size=(6, core.N_JOINTS, 2))
        img = poseimage.encode_pose_image(window, (6, core.N_JOINTS))
        for c in range(2):
            assert img.values[:, :, c].min() == pytest.approx(0.0, abs=1e-9)
            assert img.values[:, :, c].max() == pytest.approx(255.0, abs=1e-9)

    def test_constant_channel_maps_to_mid_gray(self):
        window = np.zeros((5, core.N_JOINTS, 2))
        window[:, :, 1] = np.random.default_rng(3).normal(
            size=(5, core.N_JOINTS))
        img = poseimage.encode_pose_image(window, (8, 8))
        assert np.allclose(img.values[:, :, 0], 127.5)

    def test_columns_follow_chain_order(self):
        window = np.zeros((4, core.N_JOINTS, 2))
        window[:, core.NECK, 0] = 100.0  # brightest x column
        img = poseimage.encode_pose_image(window, (4, core.N_JOINTS))
        col = poseimage.CHAIN_ORDER.index(core.NECK)
        assert np.allclose(img.values[:, col, 0], 255.0)

    def test_errors(self):
        with pytest.raises(poseimage.EmptyWindow):
            poseimage.encode_pose_image(np.zeros((0, core.N_JOINTS, 2)), (8, 8))
        with pytest.raises(poseimage.ShapeMismatch):
            poseimage.encode_pose_image(np.zeros((3, 5, 2)), (8, 8))


class _StubEncoder:
    def embed_one(self, values):
        return np.array([3.0, 4.0])


def test_embed_l2_normalized():
    img = poseimage.PoseImage(values=np.zeros((4, 4, 2)))
    vec = poseimage.embed(img, _StubEncoder())
    assert np.allclose(vec, [0.6, 0.8])
    assert np.linalg.norm(vec) == pytest.approx(1.0)


class _ZeroEncoder:
    def embed_one(self, values):
        return np.zeros(3)


def test_embed_zero_vector_passthrough():
    img = poseimage.PoseImage(values=np.zeros((4, 4, 2)))
    assert np.all(poseimage.embed(img, _ZeroEncoder()) == 0.0)


def test_save_pgm(tmp_path):
    values = np.zeros((2, 3, 2))
    values[:, :, 0] = 255.0
    poseimage.save_pgm(poseimage.PoseImage(values=values), tmp_path / "img")
    x = (tmp_path / "img_x.pgm").read_bytes()
    y = (tmp_path / "img_y.pgm").read_bytes()
    assert x.startswith(b"P5\n3 2\n255\n")
    assert x.endswith(b"\xff" * 6)
    assert y.endswith(b"\x00" * 6)
