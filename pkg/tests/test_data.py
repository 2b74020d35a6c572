import struct

import numpy as np
import pytest

from advprobe.data import (Dataset, IdxFormatError, blob_centers, gen_blobs, load_digits_dataset,
                           load_idx, write_idx)


def write_raw(path, magic, dims, payload):
    with open(path, "wb") as f:
        f.write(struct.pack(f">{1 + len(dims)}I", magic, *dims))
        f.write(bytes(payload))


def test_hand_built_idx_pair(tmp_path):
    img, lab = tmp_path / "img", tmp_path / "lab"
    write_raw(img, 0x803, (2, 2, 2), [0, 255, 128, 64, 255, 0, 64, 128])
    write_raw(lab, 0x801, (2,), [3, 7])
    data = load_idx(img, lab)
    assert data.inputs.shape == (2, 1, 2, 2)
    assert data.inputs[0].ravel().tolist() == [0.0, 1.0, 128 / 255, 64 / 255]
    assert data.labels.tolist() == [3, 7]
    assert data.class_count == 8


def test_idx_errors(tmp_path):
    img, lab = tmp_path / "img", tmp_path / "lab"
    write_raw(img, 0x803, (3, 2, 2), [1] * 12)
    write_raw(lab, 0x801, (2,), [0, 1])
    with pytest.raises(IdxFormatError, match="count mismatch"):
        load_idx(img, lab)
    write_raw(lab, 0x802, (3,), [0, 1, 1])
    with pytest.raises(IdxFormatError, match="bad magic"):
        load_idx(img, lab)
    write_raw(lab, 0x801, (3,), [0, 1, 1])
    write_raw(img, 0x803, (3, 2, 2), [1] * 11)
    with pytest.raises(IdxFormatError, match="truncated"):
        load_idx(img, lab)
    with open(img, "wb") as f:
        f.write(b"\x00\x00")
    with pytest.raises(IdxFormatError, match="truncated"):
        load_idx(img, lab)


def test_idx_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(5, 3, 4), dtype=np.uint8)
    labels = rng.integers(0, 10, size=5)
    write_idx(tmp_path / "i", tmp_path / "l", images, labels)
    data = load_idx(tmp_path / "i", tmp_path / "l", class_count=10)
    assert np.array_equal(np.round(data.inputs[:, 0] * 255).astype(np.uint8), images)
    assert np.array_equal(data.labels, labels)


def test_blobs_are_reproducible_and_in_unit_box():
    a = gen_blobs(30, 4, 3, 0.2, seed=5)
    b = gen_blobs(30, 4, 3, 0.2, seed=5)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.inputs, gen_blobs(30, 4, 3, 0.2, seed=6).inputs)
    assert a.inputs.min() >= 0 and a.inputs.max() <= 1
    assert np.bincount(a.labels).tolist() == [30, 30, 30]


def test_tiny_spread_collapses_to_centers():
    data = gen_blobs(5, 3, 4, 1e-15, seed=0)
    centers = blob_centers(3, 4)
    assert np.allclose(data.inputs, centers[data.labels], atol=1e-12)


def test_too_many_classes_is_an_error():
    with pytest.raises(ValueError, match="classes"):
        gen_blobs(5, 2, 4, 0.1)
    with pytest.raises(ValueError):
        gen_blobs(5, 2, 2, 0.0)


def test_blobs_are_linearly_separable_at_small_spread():
    # nearest-center rule as a separability oracle
    data = gen_blobs(200, 3, 4, 0.05, seed=1)
    centers = blob_centers(3, 4)
    d = ((data.inputs[:, None, :] - centers[None]) ** 2).sum(-1)
    assert np.mean(np.argmin(d, axis=1) == data.labels) == 1.0


def test_split_is_deterministic_and_partitions():
    data = gen_blobs(20, 2, 2, 0.1)
    tr, te = data.split_indices(0.25, seed=3)
    assert len(te) == 10 and len(tr) == 30
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(40))
    tr2, te2 = data.split_indices(0.25, seed=3)
    assert np.array_equal(te, te2)
    train, test = data.split(0.25, seed=3)
    assert np.array_equal(test.inputs, data.inputs[te])


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0], 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 2)), [5], 2)


def test_digits_are_bytes_in_unit_range():
    data = load_digits_dataset()
    assert data.inputs.shape[1:] == (1, 8, 8)
    assert data.class_count == 10
    assert np.allclose(data.inputs * 255, np.round(data.inputs * 255))
    assert data.inputs.min() == 0.0 and data.inputs.max() == 1.0
