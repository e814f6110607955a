"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

from chromabench.cli import main
from chromabench.css_adapt import Transform3, learn_css_transform, stable_representation
from chromabench.estimators import Cbcc, grey_world
from chromabench.evaluation import (
    angular_error,
    angular_errors,
    cross_validate,
    cv_partitions,
    inter_eval,
    paired_cross_validate,
    wilcoxon_signed_rank,
)
from chromabench.library import css_family, gaussian_css, planck, random_illuminants, random_reflectances, toy_cube_data
from chromabench.spectra import DEFAULT_GRID, CssFunction, Spectrum, render_reflectance, render_reflectance_matrix, sensor_response
from chromabench.synth import HyperspectralCube, LinearImage, MondrianParams, mondrian_dataset, render_hyperspectral
from oracles import exact_signed_rank_p, riemann_rgb

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))
from make_toy_data import write_toy_data  # noqa: E402


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def spectra_1995():
    return random_reflectances(1995, seed=1), random_illuminants(102, seed=2)


def blackbody(t):
    v = planck(t)
    return Spectrum(DEFAULT_GRID.wavelengths, v / v.max(), id=f"{t}K", kind="illuminant")


def test_c1_render_matches_loop_oracle(verdict):
    rng = np.random.default_rng(2024)
    wl = DEFAULT_GRID.wavelengths
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        m = rng.uniform(0, 1, (31, 3))
        il = rng.uniform(0, 2, 31)
        rf = rng.uniform(0, 1, 31)
        got = render_reflectance(CssFunction.from_matrix("r", wl, m), Spectrum(wl, il), Spectrum(wl, rf))
        want = np.array(riemann_rgb(m.tolist(), il.tolist(), rf.tolist(), DEFAULT_GRID.step_nm))
        worst = max(worst, float(np.max(np.abs(got - want) / np.abs(want))))
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-12 and elapsed < 1.0, f"max relative error {worst:.2e}, {elapsed:.3f} s")


def test_c2_css_transform_recovery(verdict, spectra_1995):
    refls, _ = spectra_1995
    rng = np.random.default_rng(7)
    worst_mix = 0.0
    for _ in range(100):
        css1 = gaussian_css("c1", rng.uniform([570, 510, 430], [640, 570, 490]), rng.uniform(15, 50, 3),
                            gains=rng.uniform(0.3, 1.0, 3))
        M0 = rng.uniform(-0.3, 1.0, (3, 3)) + np.eye(3)
        mix = css1.matrix @ M0.T
        if np.any(mix < 0):
            M0 = np.abs(M0)
            mix = css1.matrix @ M0.T
        css2 = CssFunction.from_matrix("c2", css1.wavelengths_nm, mix)
        worst_mix = max(worst_mix, float(np.abs(learn_css_transform(css1, css2, refls).m - M0).max()))
    P = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], float)
    worst_exact = 0.0
    for c in css_family():
        worst_exact = max(worst_exact, float(np.abs(learn_css_transform(c, c, refls).m - np.eye(3)).max()))
        sw = CssFunction.from_matrix("sw", c.wavelengths_nm, c.matrix[:, [1, 0, 2]])
        worst_exact = max(worst_exact, float(np.abs(learn_css_transform(c, sw, refls).m - P).max()))
    verdict(2, worst_mix < 1e-8 and worst_exact < 1e-9,
            f"mix max error {worst_mix:.2e} (tol 1e-8), identity/permutation {worst_exact:.2e} (tol 1e-9)")


def test_c3_ordering_intra_adapted_inter(verdict, spectra_1995):
    refls, illums = spectra_1995
    a = gaussian_css("gauss", (600, 540, 450), (25, 25, 25))
    b = gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4))
    t0 = time.perf_counter()
    p = MondrianParams(128, 128, seed=7)
    da = mondrian_dataset(200, p, refls, illums, a)
    db = mondrian_dataset(200, p, refls, illums, b)
    m = Cbcc()
    rows = []
    for (d1, c1), (d2, c2) in (((da, a), (db, b)), ((db, b), (da, a))):
        S = learn_css_transform(c1, c2, refls)
        intra = cross_validate(d2, m, folds=3, repeats=100, seed=0)
        adapted = paired_cross_validate(d1, d2, m, S, folds=3, repeats=100, seed=0)
        inter = paired_cross_validate(d1, d2, m, None, folds=3, repeats=100, seed=0)
        rows.append((intra.mean, adapted.mean, inter.mean))
    i, ad, it = np.mean(rows, axis=0)
    elapsed = time.perf_counter() - t0
    ok = i <= ad <= i + 1.0 and it >= ad + 1.0 and elapsed < 300
    per = "; ".join(f"{x:.2f}/{y:.2f}/{z:.2f}" for x, y, z in rows)
    verdict(3, ok, f"intra {i:.3f} <= adapted {ad:.3f} <= intra+1, inter {it:.3f} >= adapted+1 "
                   f"(per direction intra/adapted/inter: {per}; {elapsed:.0f} s)")


def test_c4_same_css_control(verdict, spectra_1995):
    refls, illums = spectra_1995
    b = gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4))
    p = MondrianParams(128, 128, seed=7)
    train = mondrian_dataset(200, p, refls, illums, b, name="train")
    test = mondrian_dataset(200, p, refls, illums, b, name="test", start=200)
    assert not {i.scene_id for i, _ in train} & {i.scene_id for i, _ in test}
    m = Cbcc()
    intra = cross_validate(test, m, folds=3, repeats=100, seed=0)
    inter = inter_eval(train, test, m)
    diff = abs(inter.mean - intra.mean)
    verdict(4, diff < 0.5, f"|inter {inter.mean:.3f} - intra {intra.mean:.3f}| = {diff:.3f} (tol 0.5)")


def test_c5_grey_world_on_flat_mean_scene(verdict, spectra_1995):
    refls, illums = spectra_1995
    # equal-area stripes in complementary pairs r, 1 - r: mean reflectance is 0.5 at every wavelength
    rng = np.random.default_rng(5)
    picks = rng.choice(len(refls), size=6, replace=False)
    R = np.stack([refls[k].values for k in picks])
    R = np.concatenate([R, 1.0 - R])
    labels = np.repeat(np.arange(12), 4)[None, :].repeat(10, axis=0)
    cams = css_family() + [gaussian_css("gauss", (600, 540, 450), (25, 25, 25)),
                           gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4))]
    worst = 0.0
    for css in cams:
        for il in illums[::10]:
            img = LinearImage(render_reflectance_matrix(css, il, R)[labels], camera_id=css.camera_id)
            worst = max(worst, angular_error(grey_world(img), sensor_response(css, il)))
    verdict(5, worst < 0.5, f"max grey-world error {worst:.2e} deg over {len(cams)} cameras (tol 0.5)")


def test_c6_signed_rank_exact_and_antisymmetric(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0, 10, 8), rng.uniform(0, 10, 8)
        if rng.random() < 0.3:
            b = a - rng.integers(-3, 4, 8) * 0.5  # tied magnitudes
            if np.count_nonzero(a - b) < 6:
                continue
        worst = max(worst, abs(wilcoxon_signed_rank(a, b).p_value - exact_signed_rank_p(a - b)))
    flip = {"+": "-", "-": "+", "=": "="}
    bad = 0
    for k in range(1000):
        n = int(rng.integers(6, 60))
        a = rng.gamma(2.0, 2.0, n)
        b = a * rng.uniform(0.6, 1.4) + rng.normal(0, 1, n)
        b = np.abs(b)
        bad += wilcoxon_signed_rank(b, a).sign != flip[wilcoxon_signed_rank(a, b).sign]
    verdict(6, worst <= 1e-12 and bad == 0, f"max |p - exact| {worst:.1e} (tol 1e-12), antisymmetry violations {bad}/1000")


def test_c7_stable_representation(verdict, spectra_1995):
    refls, _ = spectra_1995
    fam = {c.camera_id: c for c in css_family()}
    c1, c2 = fam["canon-like-a"], fam["sony-like"]
    cube = HyperspectralCube(DEFAULT_GRID.wavelengths, toy_cube_data(16, 16, refls, seed=0), "toy")
    i1, g1 = render_hyperspectral(cube, blackbody(2856), c1)
    i2, g2 = render_hyperspectral(cube, blackbody(6504), c2)
    before = float(np.median(angular_errors(i1.pixels.reshape(-1, 3), i2.pixels.reshape(-1, 3))))
    S = learn_css_transform(c1, c2, refls)
    r1 = stable_representation(i1, g1.illuminant_rgb, S)
    r2 = stable_representation(i2, g2.illuminant_rgb, Transform3.identity(c2.camera_id, c2.camera_id))
    after = float(np.median(angular_errors(r1.pixels.reshape(-1, 3), r2.pixels.reshape(-1, 3))))
    verdict(7, after < 2.0 and before > 5.0, f"median per-pixel angle before {before:.2f} (> 5), after {after:.2f} (< 2)")


def test_c8_cv_partitions_exhaustive(verdict):
    rng = np.random.default_rng(8)
    checked = failures = 0
    for n in range(2, 51):
        for folds in range(2, n + 1):
            for _ in range(2):
                counts = np.zeros(n, dtype=int)
                for part in cv_partitions(n, folds, rng):
                    counts[part] += 1
                checked += 1
                failures += int(not np.all(counts == 1))
    verdict(8, failures == 0, f"{checked} (folds, N) repetitions checked, {failures} failures")


def _snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c9_cli_determinism(verdict, tmp_path):
    cfg = write_toy_data(tmp_path / "data", count=8, size=32, repeats=3, n_refl=300, n_illum=4)
    data = tmp_path / "data"
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        codes = [
            main(["gen-mondrian", "--config", str(cfg), "--out", str(out / "gen")]),
            main(["render-hyper", "--config", str(cfg), "--out", str(out / "hyper")]),
            main(["learn-css", str(data / "gauss.csv"), str(data / "shifted-broad.csv"), str(data / "refl.csv"),
                  "--out", str(out / "S.csv")]),
            main(["run", "--config", str(cfg), "--out", str(out / "run")]),
        ]
        assert codes == [0, 0, 0, 0]
        runs.append(_snapshot(out))
    same = runs[0].keys() == runs[1].keys() and all(runs[0][k] == runs[1][k] for k in runs[0])
    n_csv = sum(k.endswith(".csv") for k in runs[0])
    verdict(9, same, f"{len(runs[0])} files ({n_csv} CSV) compared across two runs, identical={same}")
