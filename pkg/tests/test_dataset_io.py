import struct

import numpy as np
import pytest

from vitac_common.exception import BadMagicError, FileFormatError, TruncatedFileError, VersionMismatchError
from vitac_data.dataset_io import dataset_from_bytes, dataset_to_bytes, load_dataset, save_dataset
from vitac_data.records import Modality


def test_round_trip_is_byte_identical(toy_dataset):
    data = dataset_to_bytes(toy_dataset)
    again = dataset_from_bytes(data)
    assert dataset_to_bytes(again) == data
    assert again.test_ids == toy_dataset.test_ids
    assert [f.cluster_id for f in again.fabrics] == [f.cluster_id for f in toy_dataset.fabrics]
    for mod in Modality:
        np.testing.assert_array_equal(
            again.view(mod).features, toy_dataset.view(mod).features.astype(np.float32).astype(np.float64)
        )


def test_save_and_load(tmp_path, toy_dataset):
    path = save_dataset(toy_dataset, tmp_path / "sub" / "d.gfds")
    assert load_dataset(path).feature_dim == toy_dataset.feature_dim


def test_bad_magic(toy_dataset):
    data = dataset_to_bytes(toy_dataset)
    with pytest.raises(BadMagicError):
        dataset_from_bytes(b"XXXX" + data[4:])


def test_version_mismatch(toy_dataset):
    data = bytearray(dataset_to_bytes(toy_dataset))
    data[4:8] = struct.pack("<I", 99)
    with pytest.raises(VersionMismatchError):
        dataset_from_bytes(bytes(data))


@pytest.mark.parametrize("cut", [3, 10, 40, -5])
def test_truncated(toy_dataset, cut):
    data = dataset_to_bytes(toy_dataset)
    with pytest.raises(TruncatedFileError):
        dataset_from_bytes(data[:cut])


def test_trailing_bytes(toy_dataset):
    with pytest.raises(FileFormatError):
        dataset_from_bytes(dataset_to_bytes(toy_dataset) + b"\0")
