import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qksvm.dataio import (
    EMB1_MAGIC,
    FeatureMatrix,
    ImageSet,
    flatten_pixels,
    load_idx,
    parse_emb1,
    parse_idx,
    read_emb1,
    write_emb1,
)
from qksvm.errors import BadMagic, QksvmError, ShapeMismatch, TruncatedPayload

from conftest import MNIST_FILES, DATA_DIR, needs_mnist


def idx_image_bytes(dims, payload: bytes) -> bytes:
    return struct.pack(">I", 0x00000803) + struct.pack(">3I", *dims) + payload


def idx_label_bytes(n, payload: bytes) -> bytes:
    return struct.pack(">I", 0x00000801) + struct.pack(">I", n) + payload


class TestParseIdx:
    def test_hand_built_images(self):
        # magic 0x803, dims (2,2,2), payload bytes 0..7 -> two 2x2 images
        raw = idx_image_bytes((2, 2, 2), bytes(range(8)))
        out = parse_idx(raw)
        assert out.shape == (2, 2, 2)
        assert out.dtype == np.uint8
        np.testing.assert_array_equal(out[0], [[0, 1], [2, 3]])
        np.testing.assert_array_equal(out[1], [[4, 5], [6, 7]])

    def test_labels(self):
        raw = idx_label_bytes(3, bytes([7, 0, 9]))
        out = parse_idx(raw)
        np.testing.assert_array_equal(out, [7, 0, 9])

    def test_bad_magic(self):
        raw = struct.pack(">I", 0) + bytes(12)
        with pytest.raises(BadMagic):
            parse_idx(raw)

    def test_truncated_payload(self):
        raw = idx_image_bytes((2, 2, 2), bytes(range(7)))
        with pytest.raises(TruncatedPayload):
            parse_idx(raw)

    def test_trailing_bytes_rejected(self):
        raw = idx_image_bytes((1, 2, 2), bytes(range(5)))
        with pytest.raises(TruncatedPayload):
            parse_idx(raw)

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayload):
            parse_idx(struct.pack(">I", 0x00000803) + b"\x00\x00")

    @needs_mnist
    def test_mnist_train_file(self):
        images = load_idx(DATA_DIR / MNIST_FILES[0])
        assert images.shape == (60000, 28, 28)
        labels = load_idx(DATA_DIR / MNIST_FILES[1])
        assert labels.shape == (60000,)
        assert labels.min() == 0 and labels.max() == 9

    @given(
        n=st.integers(0, 5),
        h=st.integers(1, 4),
        w=st.integers(1, 4),
        data=st.data(),
    )
    @settings(max_examples=50)
    def test_wellformed_count_matches_header(self, n, h, w, data):
        payload = bytes(data.draw(st.binary(min_size=n * h * w, max_size=n * h * w)))
        out = parse_idx(idx_image_bytes((n, h, w), payload))
        assert out.shape[0] == n

    @given(raw=st.binary(max_size=64))
    @settings(max_examples=200)
    def test_malformed_never_crashes(self, raw):
        try:
            parse_idx(raw)
        except QksvmError:
            pass


class TestEmb1:
    def test_zero_case_bytes(self, tmp_path):
        # 1x1 matrix [0.0]: fixed header followed by 4 zero payload bytes
        path = tmp_path / "z.emb1"
        write_emb1(FeatureMatrix(data=np.zeros((1, 1), dtype=np.float32)), path)
        raw = path.read_bytes()
        expected = (
            EMB1_MAGIC
            + struct.pack("<HBB", 1, 0, 2)
            + struct.pack("<2Q", 1, 1)
            + struct.pack("<B", 0)
            + b"\x00\x00\x00\x00"
        )
        assert raw == expected
        back = read_emb1(path)
        assert back.data.shape == (1, 1)
        assert back.data[0, 0] == 0.0

    def test_golden_3x2(self, tmp_path):
        # golden bytes derived from the documented layout, not from the writer
        m = FeatureMatrix(
            data=np.arange(1, 7, dtype=np.float32).reshape(3, 2),
            labels=np.array([0, 1, 2]),
        )
        path = tmp_path / "g.emb1"
        write_emb1(m, path)
        golden = (
            EMB1_MAGIC
            + struct.pack("<HBB", 1, 0, 2)
            + struct.pack("<2Q", 3, 2)
            + struct.pack("<B", 1)
            + np.arange(1, 7, dtype="<f4").tobytes()
            + bytes([0, 1, 2])
        )
        assert path.read_bytes() == golden
        back = read_emb1(path)
        np.testing.assert_array_equal(back.data, m.data)
        np.testing.assert_array_equal(back.labels, [0, 1, 2])

    def test_shape_mismatch(self):
        raw = (
            EMB1_MAGIC
            + struct.pack("<HBB", 1, 0, 2)
            + struct.pack("<2Q", 2, 2)
            + struct.pack("<B", 0)
            + b"\x00" * 8  # dims promise 16 bytes
        )
        with pytest.raises(ShapeMismatch):
            parse_emb1(raw)

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            parse_emb1(b"NOPE" + b"\x00" * 16)

    def test_f64_roundtrip(self, tmp_path):
        m = FeatureMatrix(data=np.array([[1.5, -2.25]], dtype=np.float64))
        path = tmp_path / "d.emb1"
        write_emb1(m, path)
        back = read_emb1(path)
        assert back.data.dtype == np.float64
        np.testing.assert_array_equal(back.data, m.data)

    @given(
        rows=st.integers(1, 64),
        cols=st.integers(1, 64),
        seed=st.integers(0, 2**31),
        with_labels=st.booleans(),
    )
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_identity(self, rows, cols, seed, with_labels, tmp_path_factory):
        rng = np.random.default_rng(seed)
        m = FeatureMatrix(
            data=rng.standard_normal((rows, cols)).astype(np.float32),
            labels=rng.integers(0, 10, rows) if with_labels else None,
        )
        path = tmp_path_factory.mktemp("rt") / "m.emb1"
        write_emb1(m, path)
        back = read_emb1(path)
        assert back.data.tobytes() == m.data.tobytes()  # bit-exact for f32
        if with_labels:
            np.testing.assert_array_equal(back.labels, m.labels)
        else:
            assert back.labels is None


class TestFlattenPixels:
    def _image_set(self, pixels: np.ndarray, labels) -> ImageSet:
        return ImageSet(images=pixels.astype(np.uint8), labels=np.asarray(labels))

    def test_all_zero(self):
        s = self._image_set(np.zeros((1, 28, 28)), [3])
        out = flatten_pixels(s)
        assert out.cols == 784
        assert np.all(out.data == 0.0)

    def test_all_255(self):
        s = self._image_set(np.full((1, 28, 28), 255), [1])
        out = flatten_pixels(s)
        assert np.all(out.data == 1.0)

    def test_single_pixel_scaling(self):
        img = np.zeros((1, 28, 28))
        img[0, 0, 0] = 128
        out = flatten_pixels(self._image_set(img, [0]))
        assert out.data[0, 0] == np.float32(128.0) / np.float32(255.0)

    def test_order_and_label_alignment(self):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, (5, 4, 4)).astype(np.uint8)
        labels = np.array([4, 2, 0, 2, 1])
        out = flatten_pixels(self._image_set(imgs, labels))
        np.testing.assert_array_equal(out.labels, labels)
        for i in range(5):
            np.testing.assert_allclose(out.data[i], imgs[i].ravel() / 255.0, atol=1e-7)
