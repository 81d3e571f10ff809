"""IDX image parsing, the EMB1 tensor container, and pixel flattening.

IDX is the classic big-endian MNIST layout (magic 0x00000803 for u8 image
tensors, 0x00000801 for u8 label vectors). EMB1 is this project's neutral
little-endian carrier for float feature matrices so that embedding
extractors written in other languages can hand data to the pipeline
without a shared library.

EMB1 layout, byte-exact:

    magic    4 bytes  b"EMB1"
    version  u16 LE   (currently 1)
    dtype    u8       0 = f32, 1 = f64
    rank     u8       1..4
    dims     rank x u64 LE
    label    u8       1 -> a trailing u8 label array of length dims[0]
    payload  prod(dims) elements, row-major, little-endian
    labels   dims[0] bytes, only when label flag is 1
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimensionOverflow,
    DtypeUnsupported,
    IoError,
    ShapeMismatch,
    TruncatedPayload,
)

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1
_EMB1_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_EMB1_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}

# Guards against absurd dimension fields in hostile files.
_MAX_ELEMENTS = 1 << 40


@dataclass
class ImageSet:
    """A stack of H x W u8 images with aligned class labels."""

    images: np.ndarray  # (n, h, w) uint8
    labels: np.ndarray  # (n,) int64 in [0, n_classes)
    source: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ShapeMismatch(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.images)


@dataclass
class FeatureMatrix:
    """Row-major float feature matrix with optional aligned labels."""

    data: np.ndarray  # (rows, cols) float32 or float64
    labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.ndim != 2:
            raise ShapeMismatch(f"expected 2-D data, got ndim={self.data.ndim}")
        if not np.all(np.isfinite(self.data)):
            raise ShapeMismatch("feature matrix contains non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != self.rows:
                raise ShapeMismatch(
                    f"{self.rows} rows vs {len(self.labels)} labels"
                )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def parse_idx(stream: bytes) -> np.ndarray:
    """Parse one IDX byte stream into a u8 image tensor or a label vector.

    Returns (n, h, w) uint8 for image files and (n,) uint8 for label files.
    Trailing bytes after the payload are rejected.
    """
    if len(stream) < 4:
        raise TruncatedPayload(f"stream of {len(stream)} bytes has no header")
    (magic,) = struct.unpack(">I", stream[:4])
    if magic == IDX_MAGIC_IMAGES:
        ndim = 3
    elif magic == IDX_MAGIC_LABELS:
        ndim = 1
    else:
        raise BadMagic(f"unrecognized IDX magic 0x{magic:08x}")

    header_len = 4 + 4 * ndim
    if len(stream) < header_len:
        raise TruncatedPayload("stream ends inside the dimension fields")
    dims = struct.unpack(f">{ndim}I", stream[4:header_len])
    count = 1
    for d in dims:
        count *= d
    if count > _MAX_ELEMENTS:
        raise DimensionOverflow(f"dims {dims} declare {count} elements")

    payload = stream[header_len:]
    if len(payload) < count:
        raise TruncatedPayload(
            f"header declares {count} bytes, payload has {len(payload)}"
        )
    if len(payload) > count:
        raise TruncatedPayload(
            f"{len(payload) - count} trailing bytes after declared payload"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(path: str | Path) -> np.ndarray:
    """Read an IDX file (transparently gunzipping ``.gz``) and parse it."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if path.suffix == ".gz" or raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def load_image_set(images_path: str | Path, labels_path: str | Path, source: str = "") -> ImageSet:
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise ShapeMismatch(f"{images_path} is not an image file")
    if labels.ndim != 1:
        raise ShapeMismatch(f"{labels_path} is not a label file")
    return ImageSet(images=images, labels=labels.astype(np.int64), source=source)


def flatten_pixels(s: ImageSet) -> FeatureMatrix:
    """Flatten images to rows and scale pixels to [0, 1] by dividing by 255."""
    n = len(s)
    data = s.images.reshape(n, -1).astype(np.float32) / np.float32(255.0)
    return FeatureMatrix(data=data, labels=s.labels.copy())


def write_emb1(m: FeatureMatrix, path: str | Path) -> None:
    """Write a feature matrix (and labels, when present) as an EMB1 file."""
    arr = m.data
    code = _EMB1_CODES.get(arr.dtype)
    if code is None:
        raise DtypeUnsupported(f"dtype {arr.dtype} has no EMB1 code")
    if m.labels is not None:
        labels = m.labels
        if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
            raise ShapeMismatch("labels outside u8 range cannot be stored")
    header = EMB1_MAGIC + struct.pack(
        "<HBB", EMB1_VERSION, code, arr.ndim
    ) + struct.pack(f"<{arr.ndim}Q", *arr.shape) + struct.pack(
        "<B", 1 if m.labels is not None else 0
    )
    payload = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            if m.labels is not None:
                fh.write(m.labels.astype(np.uint8).tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_emb1(path: str | Path) -> FeatureMatrix:
    """Read an EMB1 file back into a FeatureMatrix.

    Rank-1 payloads come back as a single row; rank>2 payloads are
    flattened to (dims[0], rest).
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return parse_emb1(raw)


def parse_emb1(raw: bytes) -> FeatureMatrix:
    if len(raw) < 8:
        raise TruncatedPayload("EMB1 stream shorter than fixed header")
    if raw[:4] != EMB1_MAGIC:
        raise BadMagic(f"expected {EMB1_MAGIC!r}, got {raw[:4]!r}")
    version, code, rank = struct.unpack("<HBB", raw[4:8])
    if version != EMB1_VERSION:
        raise BadMagic(f"unsupported EMB1 version {version}")
    dtype = _EMB1_DTYPES.get(code)
    if dtype is None:
        raise DtypeUnsupported(f"unknown dtype code {code}")
    if not 1 <= rank <= 4:
        raise ShapeMismatch(f"rank {rank} outside [1, 4]")
    dims_end = 8 + 8 * rank
    if len(raw) < dims_end + 1:
        raise TruncatedPayload("EMB1 stream ends inside the dims fields")
    dims = struct.unpack(f"<{rank}Q", raw[8:dims_end])
    count = 1
    for d in dims:
        count *= d
    if count > _MAX_ELEMENTS:
        raise DimensionOverflow(f"dims {dims} declare {count} elements")
    (label_flag,) = struct.unpack("<B", raw[dims_end : dims_end + 1])

    body = raw[dims_end + 1 :]
    nbytes = count * dtype.itemsize
    expected = nbytes + (dims[0] if label_flag else 0)
    if len(body) != expected:
        raise ShapeMismatch(
            f"dims {dims} imply {expected} payload bytes, found {len(body)}"
        )
    data = np.frombuffer(body[:nbytes], dtype=dtype).reshape(dims)
    if rank == 1:
        data = data.reshape(1, -1)
    elif rank > 2:
        data = data.reshape(dims[0], -1)
    labels = None
    if label_flag:
        labels = np.frombuffer(body[nbytes:], dtype=np.uint8).astype(np.int64)
    # native byte order copy so downstream math sees a plain aligned array
    return FeatureMatrix(
        data=np.ascontiguousarray(data.astype(data.dtype.newbyteorder("="))),
        labels=labels,
    )
