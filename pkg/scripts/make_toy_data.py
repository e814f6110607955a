"""Write a self-contained toy data directory and an example config.

    python3 scripts/make_toy_data.py DIR [--cameras 2] [--count 60] [--size 64]

Creates ``refl.csv`` (1995 reflectances), ``illum.csv`` (102 lights), one CSS
file per camera, two spectral cubes and ``experiment.ini`` wired to them.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from chromabench.dataio import save_cube
from chromabench.library import css_family, gaussian_css, random_illuminants, random_reflectances, toy_cube_data
from chromabench.spectra import DEFAULT_GRID, write_spectra_csv
from chromabench.synth import HyperspectralCube

CONFIG = """\
[data]
reflectances = refl.csv
illuminants = illum.csv
cameras = {cameras}
cubes = cube0.npz, cube1.npz

[mondrian]
count = {count}
width = {size}
height = {size}

[run]
methods = cbcc, grey_world
protocols = intra, inter, inter-adapted, stable-repr
folds = 3
repeats = {repeats}

[seeds]
mondrian = 7
cv = 0
cube = 0

[output]
directory = out
"""


def contrasting_pair():
    """A narrow-band sensor and a shifted, broadened, unbalanced one."""
    return [
        gaussian_css("gauss", (600, 540, 450), (25, 25, 25)),
        gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4)),
    ]


def write_toy_data(root: Path, cameras: int = 2, count: int = 60, size: int = 64, repeats: int = 5,
                   n_refl: int = 1995, n_illum: int = 102) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    refls = random_reflectances(n_refl, seed=1)
    write_spectra_csv(root / "refl.csv", refls)
    write_spectra_csv(root / "illum.csv", random_illuminants(n_illum, seed=2))
    cams = contrasting_pair() if cameras == 2 else css_family()[:cameras]
    names = []
    for css in cams:
        write_spectra_csv(root / f"{css.camera_id}.csv", css)
        names.append(f"{css.camera_id}.csv")
    for k in range(2):
        data = toy_cube_data(16, 16, refls, seed=k)
        save_cube(HyperspectralCube(DEFAULT_GRID.wavelengths, data, f"cube{k}"), root / f"cube{k}.npz")
    cfg = root / "experiment.ini"
    cfg.write_text(CONFIG.format(cameras=", ".join(names), count=count, size=size, repeats=repeats),
                   encoding="utf-8")
    return cfg


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", type=Path)
    ap.add_argument("--cameras", type=int, default=2)
    ap.add_argument("--count", type=int, default=60)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    a = ap.parse_args()
    np.seterr(all="raise")
    print(write_toy_data(a.root, a.cameras, a.count, a.size, a.repeats))


if __name__ == "__main__":
    main()
