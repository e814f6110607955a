"""On-disk formats.

* Images: little-endian PFM (``PF``, scale ``-1.0``, rows bottom to top) with a
  ``key=value`` sidecar next to it (``<image>.txt``).
* Datasets: CSV manifest ``path,ill_r,ill_g,ill_b,camera_id,scene_id`` with
  paths relative to the manifest.
* Regression models: first line the schema id, then ``D`` rows of 3 values.
* Camera transforms: header ``from,to``, one row with the ids, three matrix rows.
* Spectral cubes: ``.npz`` archive with ``bands`` (nm) and ``data`` (H x W x B).
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .css_adapt import Transform3
from .estimators import RegressionModel
from .synth import GroundTruth, HyperspectralCube, LabeledDataset, LinearImage, box_mask

MANIFEST_HEADER = ["path", "ill_r", "ill_g", "ill_b", "camera_id", "scene_id"]


def _fmt(x: float) -> str:
    return repr(float(x))


# -- PFM ---------------------------------------------------------------------


def write_pfm(path: str | Path, pixels: NDArray) -> None:
    """Write an ``(H, W, 3)`` array as a little-endian colour PFM."""
    px = np.asarray(pixels, dtype="<f4")
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"PFM writer expects (H, W, 3), got {px.shape}")
    h, w = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(px[::-1]).tobytes())


def read_pfm(path: str | Path) -> NDArray[np.float32]:
    """Read a PFM file into an ``(H, W, 3)`` array (grey files are replicated)."""
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        if tag not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file (header {tag!r})")
        dims = fh.readline().split()
        while not dims:
            dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        chans = 3 if tag == b"PF" else 1
        buf = fh.read(w * h * chans * 4)
    if len(buf) != w * h * chans * 4:
        raise ValueError(f"{path}: truncated PFM data")
    img = np.frombuffer(buf, dtype=dtype).reshape(h, w, chans)[::-1]
    if chans == 1:
        img = np.repeat(img, 3, axis=2)
    return img.astype(np.float32)


# -- sidecars and manifests --------------------------------------------------


def sidecar_path(image_path: str | Path) -> Path:
    p = Path(image_path)
    return p.with_name(p.name + ".txt")


def write_sidecar(path: str | Path, fields: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in fields.items():
            fh.write(f"{k}={v}\n")


def read_sidecar(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: expected key=value, got {line!r}")
            out[key.strip()] = val.strip()
    return out


def save_image(path: str | Path, img: LinearImage, gt: GroundTruth, mask_box: tuple[int, int, int, int] | None = None) -> None:
    """PFM plus sidecar carrying camera, scene, illuminant and ground truth."""
    write_pfm(path, img.pixels)
    fields = {
        "camera_id": img.camera_id,
        "scene_id": img.scene_id,
        "illuminant_id": img.illuminant_id,
        "illuminant_rgb": ",".join(_fmt(v) for v in gt.illuminant_rgb),
        "source": gt.source,
    }
    if mask_box is not None:
        fields["mask"] = ",".join(str(int(v)) for v in mask_box)
    write_sidecar(sidecar_path(path), fields)


def save_dataset(ds: LabeledDataset, directory: str | Path, manifest_name: str | None = None) -> Path:
    """Write every item as ``<scene_id>[_<illuminant_id>].pfm`` and a manifest; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = directory / (manifest_name or "manifest.csv")
    rows = []
    seen: set[str] = set()
    for k, (img, gt) in enumerate(ds):
        stem = img.scene_id or f"img{k:05d}"
        if stem in seen:
            stem = f"{stem}_{img.illuminant_id or k}"
        if stem in seen:
            stem = f"{stem}_{k:05d}"
        seen.add(stem)
        fname = f"{stem}.pfm"
        save_image(directory / fname, img, gt)
        rows.append([fname, *(_fmt(v) for v in gt.illuminant_rgb), img.camera_id, img.scene_id])
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        w.writerows(rows)
    return manifest


def load_dataset(manifest: str | Path, name: str | None = None) -> LabeledDataset:
    """Load a manifest and its images; sidecars are optional.

    A sidecar ``mask=x0,y0,x1,y1`` excludes that half-open rectangle (e.g. a
    colour checker) from every statistic.
    """
    manifest = Path(manifest)
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{manifest}: missing manifest columns {sorted(missing)}")
        rows = list(reader)
    items = []
    camera = None
    for row in rows:
        path = manifest.parent / row["path"]
        if not path.exists():
            raise FileNotFoundError(f"{manifest}: image {path} does not exist")
        px = read_pfm(path).astype(float)
        meta = read_sidecar(sidecar_path(path)) if sidecar_path(path).exists() else {}
        mask = None
        if "mask" in meta:
            box = tuple(int(v) for v in meta["mask"].split(","))
            if len(box) != 4:
                raise ValueError(f"{sidecar_path(path)}: mask needs x0,y0,x1,y1")
            mask = box_mask(px.shape[0], px.shape[1], box)
        img = LinearImage(
            px,
            camera_id=row["camera_id"],
            scene_id=row["scene_id"],
            illuminant_id=meta.get("illuminant_id", ""),
            mask=mask,
        )
        gt = GroundTruth(
            [float(row["ill_r"]), float(row["ill_g"]), float(row["ill_b"])],
            meta.get("source", "dataset-provided"),
        )
        camera = camera or img.camera_id
        items.append((img, gt))
    if not items:
        raise ValueError(f"{manifest}: manifest lists no images")
    return LabeledDataset(items, camera, name or manifest.parent.name)


# -- models and transforms ---------------------------------------------------


def save_model(model: RegressionModel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(model.schema_id + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in model.L:
            w.writerow([_fmt(v) for v in row])


def load_model(path: str | Path, trained_on: str = "") -> RegressionModel:
    with open(path, newline="", encoding="utf-8") as fh:
        schema = fh.readline().strip()
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    return RegressionModel(np.array(rows), schema, trained_on)


def save_transform(S: Transform3, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to"])
        w.writerow([S.from_camera, S.to_camera])
        for row in S.m:
            w.writerow([_fmt(v) for v in row])


def load_transform(path: str | Path) -> Transform3:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) != 5 or rows[0] != ["from", "to"]:
        raise ValueError(f"{path}: expected header 'from,to', the camera ids and three matrix rows")
    return Transform3(np.array([[float(v) for v in r] for r in rows[2:]]), rows[1][0], rows[1][1])


# -- cubes -------------------------------------------------------------------


def save_cube(cube: HyperspectralCube, path: str | Path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, bands=cube.bands, data=cube.data)


def load_cube(path: str | Path) -> HyperspectralCube:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"cube file {path} does not exist")
    with np.load(path) as z:
        return HyperspectralCube(z["bands"], z["data"], cube_id=path.stem)


def iter_files(paths: Iterable[str | os.PathLike]) -> list[Path]:
    return [Path(p) for p in paths]
