"""Datasets: seeded Gaussian blobs and IDX image files, pixels in [0, 1]."""
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("label out of range")

    def __len__(self):
        return len(self.labels)

    def reshape(self, shape):
        return Dataset(self.inputs.reshape((len(self),) + tuple(shape)), self.labels,
                       self.class_count)

    def subset(self, idx):
        return Dataset(self.inputs[idx], self.labels[idx], self.class_count)

    def split_indices(self, test_fraction=0.2, seed=0):
        order = np.random.default_rng(seed).permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        return np.sort(order[n_test:]), np.sort(order[:n_test])

    def split(self, test_fraction=0.2, seed=0):
        """Deterministic shuffled ``(train, test)`` split."""
        train_idx, test_idx = self.split_indices(test_fraction, seed)
        return self.subset(train_idx), self.subset(test_idx)


def blob_centers(dims, class_count):
    """Simplex vertices in ``[0.2, 0.8]^dims``: the corner at 0.2 plus one vertex
    per axis raised to 0.8, so at most ``dims + 1`` classes fit."""
    if class_count > dims + 1:
        raise ValueError(f"{class_count} classes need more than {dims} dims "
                         f"(at most {dims + 1} simplex vertices)")
    centers = np.full((class_count, dims), 0.2)
    for c in range(min(class_count, dims)):
        centers[c, c] = 0.8
    return centers


def gen_blobs(n_per_class, dims, class_count, spread, seed=0):
    if spread <= 0:
        raise ValueError("spread must be > 0")
    if n_per_class < 1 or class_count < 2:
        raise ValueError("need n_per_class >= 1 and class_count >= 2")
    centers = blob_centers(dims, class_count)
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(class_count), n_per_class)
    noise = rng.normal(0.0, spread, size=(len(labels), dims))
    inputs = np.clip(centers[labels] + noise, 0.0, 1.0)
    return Dataset(inputs, labels, class_count)


def _read_header(buf, magic, ndims, path):
    if len(buf) < 4 + 4 * ndims:
        raise IdxFormatError(f"truncated file: {path}")
    found = struct.unpack(">I", buf[:4])[0]
    if found != magic:
        raise IdxFormatError(f"bad magic 0x{found:08x} in {path} (expected 0x{magic:08x})")
    return struct.unpack(f">{ndims}I", buf[4:4 + 4 * ndims])


def load_idx(images_path, labels_path, class_count=None):
    """Read an IDX image/label pair into a Dataset of shape ``(N, 1, rows, cols)``."""
    with open(images_path, "rb") as f:
        img = f.read()
    with open(labels_path, "rb") as f:
        lab = f.read()
    count, rows, cols = _read_header(img, IDX_IMAGES_MAGIC, 3, images_path)
    (n_labels,) = _read_header(lab, IDX_LABELS_MAGIC, 1, labels_path)
    pixels = np.frombuffer(img, dtype=np.uint8, offset=16)
    labels = np.frombuffer(lab, dtype=np.uint8, offset=8)
    if pixels.size < count * rows * cols:
        raise IdxFormatError(f"truncated file: {images_path}")
    if labels.size < n_labels:
        raise IdxFormatError(f"truncated file: {labels_path}")
    if count != n_labels:
        raise IdxFormatError(f"count mismatch: {count} images vs {n_labels} labels")
    inputs = pixels[:count * rows * cols].reshape(count, 1, rows, cols) / 255.0
    labels = labels[:n_labels].astype(int)
    if class_count is None:
        class_count = max(int(labels.max()) + 1, 2) if len(labels) else 2
    return Dataset(inputs, labels, class_count)


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images ``(N, rows, cols)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


def load_digits_dataset():
    """scikit-learn's bundled 8x8 digits, quantized to bytes like an IDX file."""
    from sklearn.datasets import load_digits

    d = load_digits()
    pixels = np.round(d.images * (255.0 / 16.0)).astype(np.uint8)
    return Dataset(pixels[:, None] / 255.0, d.target, 10)
