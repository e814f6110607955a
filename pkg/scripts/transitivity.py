"""Composition error of learned camera maps over every ordered camera triple.

    python3 scripts/transitivity.py

Reports max and median of ||S_bc S_ab - S_ac||_F / ||S_ac||_F for the bundled
14-camera family and for a wider family that adds strongly shifted sensors.
"""

from __future__ import annotations

import itertools

import numpy as np

from chromabench.css_adapt import learn_css_transform
from chromabench.library import css_family, gaussian_css, random_reflectances


def errors(cams, refls):
    S = {(a.camera_id, b.camera_id): learn_css_transform(a, b, refls).m for a in cams for b in cams}
    ids = [c.camera_id for c in cams]
    return np.array([np.linalg.norm(S[b, c] @ S[a, b] - S[a, c]) / np.linalg.norm(S[a, c])
                     for a, b, c in itertools.product(ids, repeat=3)])


def main() -> None:
    refls = random_reflectances(1995, 1)
    fam = css_family()
    e = errors(fam, refls)
    print(f"family ({len(fam)} cameras, {e.size} triples): max {e.max():.4f} median {np.median(e):.4f}")
    wide = fam + [
        gaussian_css("gauss", (600, 540, 450), (25, 25, 25)),
        gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4)),
    ]
    e = errors(wide, refls)
    print(f"wide family ({len(wide)} cameras, {e.size} triples): max {e.max():.4f} median {np.median(e):.4f}")


if __name__ == "__main__":
    main()
