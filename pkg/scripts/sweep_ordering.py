"""Intra / adapted / inter CBCC means over several scene seeds.

    python3 scripts/sweep_ordering.py [--seeds 7 8 9] [--n 200] [--size 128]

For each seed and direction prints the fold-matched numbers (training folds
and test folds never share a scene) next to the plain train-on-all variant,
in which the adapted training set contains the test scenes themselves.
"""

from __future__ import annotations

import argparse

import numpy as np

from chromabench.css_adapt import learn_css_transform
from chromabench.estimators import Cbcc
from chromabench.evaluation import cross_validate, inter_eval, paired_cross_validate
from chromabench.library import gaussian_css, random_illuminants, random_reflectances
from chromabench.synth import MondrianParams, mondrian_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9, 10, 11])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=1)
    a = ap.parse_args()

    refls, illums = random_reflectances(1995, 1), random_illuminants(102, 2)
    ca = gaussian_css("gauss", (600, 540, 450), (25, 25, 25))
    cb = gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4))
    m = Cbcc()
    print("seed direction        intra  adapted  inter | plain: adapted  inter | ordering ok (matched, plain)")
    for seed in a.seeds:
        p = MondrianParams(a.size, a.size, seed=seed)
        da = mondrian_dataset(a.n, p, refls, illums, ca, jobs=a.jobs)
        db = mondrian_dataset(a.n, p, refls, illums, cb, jobs=a.jobs)
        matched, plain = [], []
        for (d1, c1), (d2, c2) in (((da, ca), (db, cb)), ((db, cb), (da, ca))):
            S = learn_css_transform(c1, c2, refls)
            intra = cross_validate(d2, m, 3, a.repeats, seed=0, jobs=a.jobs).mean
            ad = paired_cross_validate(d1, d2, m, S, 3, a.repeats, seed=0, jobs=a.jobs).mean
            it = paired_cross_validate(d1, d2, m, None, 3, a.repeats, seed=0, jobs=a.jobs).mean
            pad = inter_eval(d1, d2, m, S, jobs=a.jobs).mean
            pit = inter_eval(d1, d2, m, jobs=a.jobs).mean
            matched.append((intra, ad, it))
            plain.append((intra, pad, pit))
            print(f"{seed:4d} {c1.camera_id + '->' + c2.camera_id:<20s} {intra:6.3f} {ad:8.3f} {it:6.3f} |"
                  f"        {pad:7.3f} {pit:6.3f}")
        for name, rows in (("matched", matched), ("plain", plain)):
            i, ad, it = np.mean(rows, axis=0)
            ok = i <= ad <= i + 1 and it >= ad + 1
            print(f"     mean ({name}): intra {i:.3f} adapted {ad:.3f} inter {it:.3f} ok={ok}")


if __name__ == "__main__":
    main()
