from __future__ import annotations

import struct

import numpy as np
import pytest

from chromabench.css_adapt import Transform3
from chromabench.dataio import (
    load_cube,
    load_dataset,
    load_model,
    load_transform,
    read_pfm,
    read_sidecar,
    save_cube,
    save_dataset,
    save_model,
    save_transform,
    sidecar_path,
    write_pfm,
    write_sidecar,
)
from chromabench.estimators import CBCC_SCHEMA, RegressionModel
from chromabench.synth import HyperspectralCube, MondrianParams, mondrian_dataset


def test_pfm_layout_by_hand(tmp_path):
    px = np.arange(12, dtype=np.float32).reshape(2, 2, 3)
    write_pfm(tmp_path / "a.pfm", px)
    raw = (tmp_path / "a.pfm").read_bytes()
    assert raw.startswith(b"PF\n2 2\n-1.0\n")
    body = raw[len(b"PF\n2 2\n-1.0\n"):]
    vals = struct.unpack("<12f", body)
    # bottom row first
    assert vals[:6] == tuple(px[1].ravel()) and vals[6:] == tuple(px[0].ravel())
    np.testing.assert_array_equal(read_pfm(tmp_path / "a.pfm"), px)


def test_pfm_big_endian_and_grey(tmp_path):
    p = tmp_path / "b.pfm"
    p.write_bytes(b"Pf\n2 1\n1.0\n" + struct.pack(">2f", 0.5, 2.0))
    img = read_pfm(p)
    assert img.shape == (1, 2, 3)
    np.testing.assert_array_equal(img[0, :, 0], [0.5, 2.0])
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ValueError, match="not a PFM"):
        read_pfm(p)
    p.write_bytes(b"PF\n4 4\n-1.0\n\x00\x00")
    with pytest.raises(ValueError, match="truncated"):
        read_pfm(p)


def test_sidecar_round_trip(tmp_path):
    write_sidecar(tmp_path / "s.txt", {"camera_id": "c", "mask": "1,2,3,4"})
    assert read_sidecar(tmp_path / "s.txt") == {"camera_id": "c", "mask": "1,2,3,4"}
    assert sidecar_path("x/img.pfm").name == "img.pfm.txt"


def test_dataset_round_trip(tmp_path, refls, illums, cam_a):
    ds = mondrian_dataset(3, MondrianParams(12, 10, seed=2), refls, illums, cam_a)
    m = save_dataset(ds, tmp_path / "d")
    back = load_dataset(m)
    assert back.camera_id == ds.camera_id and len(back) == 3
    for (i1, g1), (i2, g2) in zip(ds, back):
        np.testing.assert_allclose(i2.pixels, i1.pixels, rtol=1e-6)
        np.testing.assert_allclose(g2.illuminant_rgb, g1.illuminant_rgb, rtol=1e-15)
        assert (i2.scene_id, i2.illuminant_id) == (i1.scene_id, i1.illuminant_id)
    assert m.read_text().splitlines()[0] == "path,ill_r,ill_g,ill_b,camera_id,scene_id"


def test_dataset_mask_from_sidecar(tmp_path, refls, illums, cam_a):
    ds = mondrian_dataset(1, MondrianParams(12, 10, seed=2), refls, illums, cam_a)
    m = save_dataset(ds, tmp_path / "d")
    sc = sidecar_path(tmp_path / "d" / "mondrian00000.pfm")
    meta = read_sidecar(sc)
    meta["mask"] = "0,0,4,3"
    write_sidecar(sc, meta)
    img, _ = load_dataset(m).items[0]
    assert (~img.mask).sum() == 12


def test_dataset_missing_image(tmp_path):
    (tmp_path / "manifest.csv").write_text("path,ill_r,ill_g,ill_b,camera_id,scene_id\nnope.pfm,1,1,1,c,s\n")
    with pytest.raises(FileNotFoundError, match="nope.pfm"):
        load_dataset(tmp_path / "manifest.csv")


def test_model_and_transform_round_trip(tmp_path, rng):
    m = RegressionModel(rng.normal(size=(15, 3)), CBCC_SCHEMA)
    save_model(m, tmp_path / "m.csv")
    back = load_model(tmp_path / "m.csv")
    assert back.schema_id == CBCC_SCHEMA
    np.testing.assert_array_equal(back.L, m.L)
    S = Transform3(rng.normal(size=(3, 3)) + 3 * np.eye(3), "a", "b")
    save_transform(S, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[:2] == ["from,to", "a,b"]
    T = load_transform(tmp_path / "s.csv")
    np.testing.assert_array_equal(T.m, S.m)
    assert (T.from_camera, T.to_camera) == ("a", "b")


def test_cube_round_trip(tmp_path, rng):
    c = HyperspectralCube(np.arange(400, 701, 10.0), rng.uniform(size=(3, 2, 31)), "x")
    save_cube(c, tmp_path / "c.npz")
    back = load_cube(tmp_path / "c.npz")
    np.testing.assert_array_equal(back.data, c.data)
    assert back.cube_id == "c"
    with pytest.raises(FileNotFoundError, match="missing.npz"):
        load_cube(tmp_path / "missing.npz")
