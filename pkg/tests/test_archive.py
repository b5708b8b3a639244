import json

import numpy as np
import pytest

from approxmul import data_path
from approxmul.approxflow.archive import ArchiveError, load_archive, save_archive


def _tensors(rng):
    return {
        "w": rng.integers(0, 256, (4, 3, 2, 2)).astype(np.uint8),
        "b": rng.integers(-1000, 1000, 4).astype(np.int32),
        "s": np.array([0.125, 3.5]),
        "f": rng.random((2, 5)).astype(np.float32),
        "l": np.arange(7, dtype=np.int64),
        "empty": np.zeros((0, 3), dtype=np.uint8),
    }


def test_round_trip(tmp_path, rng):
    t = _tensors(rng)
    save_archive(t, tmp_path / "a.json")
    back = load_archive(tmp_path / "a.json")
    assert list(back) == list(t)
    for k in t:
        assert back[k].dtype == t[k].dtype and np.array_equal(back[k], t[k])
    save_archive(back, tmp_path / "b.json", blob_name="a2.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "a2.bin").read_bytes()


def test_fixture_archive_byte_identical(tmp_path):
    src = data_path("lenet_digits.tensors.json")
    save_archive(load_archive(src), tmp_path / "lenet_digits.tensors.json")
    assert (tmp_path / "lenet_digits.tensors.json").read_bytes() == src.read_bytes()
    assert (tmp_path / "lenet_digits.tensors.bin").read_bytes() == data_path("lenet_digits.tensors.bin").read_bytes()


def _corrupt(tmp_path, rng, edit):
    save_archive(_tensors(rng), tmp_path / "a.json")
    m = json.loads((tmp_path / "a.json").read_text())
    edit(m, tmp_path)
    (tmp_path / "a.json").write_text(json.dumps(m))
    return tmp_path / "a.json"


@pytest.mark.parametrize("edit", [
    lambda m, p: m.update(format="other"),
    lambda m, p: m["tensors"][1].update(byte_offset=3),
    lambda m, p: m["tensors"][0].update(dtype="complex64"),
    lambda m, p: m["tensors"][0]["shape"].__setitem__(0, 400),
    lambda m, p: m["tensors"].pop(2),
    lambda m, p: m["tensors"][2].pop("name"),
    lambda m, p: (p / "a.bin").write_bytes((p / "a.bin").read_bytes()[:-3]),
])
def test_corruption_rejected(tmp_path, rng, edit):
    path = _corrupt(tmp_path, rng, edit)
    with pytest.raises(ArchiveError):
        load_archive(path)


def test_not_json(tmp_path):
    (tmp_path / "a.json").write_text("{nope")
    with pytest.raises(ArchiveError):
        load_archive(tmp_path / "a.json")


def test_unsupported_dtype(tmp_path):
    with pytest.raises(ArchiveError):
        save_archive({"c": np.zeros(2, dtype=np.complex64)}, tmp_path / "a.json")
