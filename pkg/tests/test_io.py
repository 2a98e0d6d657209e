import json

import numpy as np
import pytest

from metaset import io


def test_voxel_round_trip(tmp_path):
    solid = np.random.default_rng(0).random((7, 7, 7)) < 0.4
    path = tmp_path / "c.vxc"
    io.write_voxels(path, solid)
    assert path.stat().st_size == 8 + (343 + 7) // 8
    assert np.array_equal(io.read_voxels(path, expected_density=solid.mean()), solid)
    with pytest.raises(io.FormatError):
        io.read_voxels(path, expected_density=0.9)


def test_voxel_bit_layout(tmp_path):
    solid = np.zeros((8, 8, 8), bool)
    solid[0, 0, 1] = True  # x = 1 is the second bit of the first byte
    io.write_voxels(tmp_path / "c.vxc", solid)
    assert (tmp_path / "c.vxc").read_bytes()[8] == 0b10


def test_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "x.vxc"
    p.write_bytes(b"NOPE" + b"\0" * 8)
    with pytest.raises(io.FormatError):
        io.read_voxels(p)
    io.write_cloud(tmp_path / "p.pc3d", np.zeros((3, 3)))
    data = (tmp_path / "p.pc3d").read_bytes()
    (tmp_path / "p.pc3d").write_bytes(data[:-4])
    with pytest.raises(io.FormatError):
        io.read_cloud(tmp_path / "p.pc3d")


def test_cloud_round_trip(tmp_path):
    pts = np.random.default_rng(1).random((20, 3)).astype(np.float32)
    io.write_cloud(tmp_path / "p.pc3d", pts)
    assert np.array_equal(io.read_cloud(tmp_path / "p.pc3d"), pts.astype(float))


def test_kernel_round_trip(tmp_path):
    k = np.array([[1.0, 0.25], [0.25, 1.0]])
    io.write_kernel(tmp_path / "k.kmat", k, "property", csv_mirror=True)
    m, kind = io.read_kernel(tmp_path / "k.kmat")
    assert kind == "property" and np.array_equal(m, k)
    assert np.array_equal(np.loadtxt(tmp_path / "k.csv", delimiter=","), k)
    io.write_kernel(tmp_path / "a.kmat", [[1.0, 0.0], [1.0, 1.0]])
    with pytest.raises(io.FormatError):
        io.read_kernel(tmp_path / "a.kmat")


@pytest.mark.parametrize("binary", [True, False])
def test_pbm_round_trip(tmp_path, binary):
    solid = np.random.default_rng(2).random((5, 11)) < 0.5
    io.write_pbm(tmp_path / "c.pbm", solid, binary=binary)
    assert np.array_equal(io.read_pbm(tmp_path / "c.pbm"), solid)


def test_pbm_comments(tmp_path):
    (tmp_path / "c.pbm").write_bytes(b"P1\n# note\n3 2\n1 0 1\n0 1 0\n")
    assert io.read_pbm(tmp_path / "c.pbm").tolist() == [[True, False, True], [False, True, False]]


def test_manifest_and_cell(tmp_path):
    solid = np.zeros((4, 4), bool)
    solid[:2] = True
    io.write_pbm(tmp_path / "a.pbm", solid)
    entry = {"id": "a", "family_id": "f", "density": 0.5, "cell_path": "a.pbm",
             "cloud_path": "", "properties": [1.0, 0.3, 1.0, 0.4], "embedding": None}
    io.write_manifest(tmp_path / "m.json", [entry])
    cell = io.load_cell2d(io.read_manifest(tmp_path / "m.json")[0], tmp_path / "m.json")
    assert cell.volume_fraction == 0.5
    (tmp_path / "bad.json").write_text(json.dumps([{"id": "a"}]))
    with pytest.raises(io.FormatError):
        io.read_manifest(tmp_path / "bad.json")


def test_embeddings(tmp_path):
    io.write_embeddings(tmp_path / "e.csv", ["a", "b"], [[1.0, 2.0], [3.0, 4.5]])
    ids, m = io.read_embeddings(tmp_path / "e.csv")
    assert ids == ["a", "b"] and m.tolist() == [[1.0, 2.0], [3.0, 4.5]]
    (tmp_path / "r.csv").write_text("a,1,2\nb,1\n")
    with pytest.raises(io.FormatError):
        io.read_embeddings(tmp_path / "r.csv")
