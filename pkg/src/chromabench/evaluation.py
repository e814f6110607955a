"""Angular error, evaluation protocols and paired significance testing."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import norm, rankdata

from .css_adapt import Transform3, adapt_dataset, adapt_image
from .estimators import Method, grey_world
from .synth import DEGENERATE_TOL, LabeledDataset

PROTOCOLS = ("intra", "inter", "inter-adapted", "inter-ss")
EXACT_MAX_N = 25


def angular_error(e1: ArrayLike, e2: ArrayLike) -> float:
    """Angle in degrees between two RGB vectors."""
    return float(angular_errors(np.reshape(e1, (1, 3)), np.reshape(e2, (1, 3)))[0])


def angular_errors(est: ArrayLike, ref: ArrayLike) -> NDArray[np.float64]:
    """Row-wise :func:`angular_error` for ``(..., 3)`` arrays.

    Uses ``atan2(|a x b|, a . b)``, which stays accurate for nearly parallel
    vectors where ``acos`` of the cosine loses half the digits.
    """
    a = np.asarray(est, dtype=float)
    b = np.asarray(ref, dtype=float)
    if np.any(np.linalg.norm(a, axis=-1) == 0) or np.any(np.linalg.norm(b, axis=-1) == 0):
        raise ValueError("angular error is undefined for a zero vector")
    a, b = np.broadcast_arrays(a, b)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.degrees(np.arctan2(cross, np.sum(a * b, axis=-1)))


def summarize(errors: ArrayLike) -> tuple[float, float, float, float]:
    """Mean, median, trimean and maximum."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("cannot summarise an empty error list")
    q1, q2, q3 = np.percentile(e, [25, 50, 75])
    return float(e.mean()), float(q2), float((q1 + 2 * q2 + q3) / 4), float(e.max())


@dataclass(frozen=True)
class EvalReport:
    """Per-image errors of one method under one protocol, with summaries.

    ``scene_ids[k]`` names the test image behind ``per_image_errors_deg[k]``;
    for cross-validation the list is repetition-major.
    """

    per_image_errors_deg: tuple[float, ...]
    mean: float
    median: float
    trimean: float
    max: float
    protocol: str
    train_name: str
    test_name: str
    method: str = ""
    scene_ids: tuple[str, ...] = ()
    repeats: int = 1

    @classmethod
    def from_errors(cls, errors: ArrayLike, protocol: str, train_name: str, test_name: str,
                    method: str = "", scene_ids: Sequence[str] = (), repeats: int = 1) -> "EvalReport":
        e = np.asarray(errors, dtype=float).ravel()
        if np.any(e < 0) or np.any(e > 180) or not np.all(np.isfinite(e)):
            raise ValueError("angular errors must lie in [0, 180]")
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        if scene_ids and len(scene_ids) != e.size:
            raise ValueError("scene_ids must match the error list")
        return cls(tuple(float(x) for x in e), *summarize(e), protocol, train_name, test_name,
                   method, tuple(scene_ids), repeats)

    @property
    def label(self) -> str:
        return f"{self.method}:{self.protocol}" if self.method else self.protocol

    def summary_text(self) -> str:
        return (
            f"{self.label}  train={self.train_name}  test={self.test_name}  "
            f"n={len(self.per_image_errors_deg)}  repeats={self.repeats}\n"
            f"  mean={self.mean:.4f}  median={self.median:.4f}  "
            f"trimean={self.trimean:.4f}  max={self.max:.4f}"
        )


@dataclass
class _Extracted:
    X: NDArray[np.float64]
    fallback: NDArray[np.float64]
    T: NDArray[np.float64]
    scene_ids: list[str]


def _extract_one(args):
    method, img = args
    return method.extract(img)


def extract_features(method: Method, ds: LabeledDataset, jobs: int = 1) -> _Extracted:
    """Feature rows, fallback estimates and targets for every item of ``ds``."""
    tasks = [(method, img) for img, _ in ds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_extract_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_extract_one(t) for t in tasks]
    X = np.stack([r[0] for r in rows])
    fb = np.stack([r[1] for r in rows])
    return _Extracted(X, fb, ds.targets(), [img.scene_id for img, _ in ds])


def cv_partitions(n: int, folds: int, rng: np.random.Generator) -> list[NDArray[np.int64]]:
    """Random split of ``range(n)`` into ``folds`` parts whose sizes differ by at most one."""
    if folds < 2 or folds > n:
        raise ValueError(f"need 2 <= folds <= {n}, got {folds}")
    return [np.sort(p) for p in np.array_split(rng.permutation(n), folds)]


def cross_validate(
    ds: LabeledDataset,
    method: Method,
    folds: int = 3,
    repeats: int = 100,
    seed: int | np.random.Generator = 0,
    jobs: int = 1,
    features: _Extracted | None = None,
) -> EvalReport:
    """Repeated ``folds``-fold cross-validation, errors pooled over repetitions.

    Within a repetition every image is tested exactly once. Features are
    extracted once and reused by every fold.
    """
    fx = features or extract_features(method, ds, jobs)
    return _folded(fx, fx, method, folds, repeats, seed, "intra", ds.name, ds.name)


def paired_cross_validate(
    train: LabeledDataset,
    test: LabeledDataset,
    method: Method,
    adaptation: Transform3 | None = None,
    folds: int = 3,
    repeats: int = 100,
    seed: int | np.random.Generator = 0,
    jobs: int = 1,
    test_features: _Extracted | None = None,
) -> EvalReport:
    """Inter-camera evaluation for two datasets of the same scenes, fold by fold.

    Each fold trains on the training-fold items of ``train`` (mapped with
    ``adaptation`` if given) and tests on the held-out items of ``test``, so
    no test scene is ever seen in training and the partitions match those of
    :func:`cross_validate` with the same seed.
    """
    if len(train) != len(test) or [i.scene_id for i, _ in train] != [i.scene_id for i, _ in test]:
        raise ValueError("paired evaluation needs both datasets to list the same scenes in the same order")
    protocol = "inter"
    if adaptation is not None:
        _check_pair(adaptation, train, test)
        train = adapt_dataset(train, adaptation)
        if len(train) != len(test):
            raise ValueError("adaptation dropped items; paired evaluation is not possible")
        protocol = "inter-adapted"
    ftr = extract_features(method, train, jobs)
    fte = test_features or extract_features(method, test, jobs)
    return _folded(ftr, fte, method, folds, repeats, seed, protocol, train.name, test.name)


def _folded(ftr: _Extracted, fte: _Extracted, method: Method, folds: int, repeats: int,
            seed: int | np.random.Generator, protocol: str, train_name: str, test_name: str) -> EvalReport:
    n = fte.X.shape[0]
    if n < folds:
        raise ValueError(f"dataset {test_name!r} has {n} items, fewer than {folds} folds")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    errors = np.empty((repeats, n))
    for r in range(repeats):
        for k, test in enumerate(cv_partitions(n, folds, rng)):
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            try:
                model = method.fit(ftr.X[train], ftr.T[train], f"{train_name}[rep {r} fold {k}]")
                est = method.predict(model, fte.X[test], fte.fallback[test])
            except Exception as exc:
                raise RuntimeError(
                    f"{method.name} failed on {test_name}, repetition {r}, fold {k}: {exc}"
                ) from exc
            errors[r, test] = angular_errors(est, fte.T[test])
    return EvalReport.from_errors(errors.ravel(), protocol, train_name, test_name, method.name,
                                  fte.scene_ids * repeats, repeats)


def _check_pair(S: Transform3, train: LabeledDataset, test: LabeledDataset) -> None:
    if S.from_camera != train.camera_id or S.to_camera != test.camera_id:
        raise ValueError(
            f"transform maps {S.from_camera!r}->{S.to_camera!r}, "
            f"datasets are {train.camera_id!r}->{test.camera_id!r}"
        )


def _train_and_test(method: Method, train: LabeledDataset, test: LabeledDataset, jobs: int,
                    test_features: _Extracted | None = None):
    tr = extract_features(method, train, jobs)
    te = test_features or extract_features(method, test, jobs)
    model = method.fit(tr.X, tr.T, train.name)
    return method.predict(model, te.X, te.fallback), te


def inter_eval(
    train: LabeledDataset,
    test: LabeledDataset,
    method: Method,
    adaptation: Transform3 | None = None,
    jobs: int = 1,
    test_features: _Extracted | None = None,
) -> EvalReport:
    """Train on one camera's dataset, test on another's.

    With ``adaptation`` the training images and illuminants are first mapped
    into the test camera.
    """
    protocol = "inter"
    if adaptation is not None:
        _check_pair(adaptation, train, test)
        train = adapt_dataset(train, adaptation)
        protocol = "inter-adapted"
    est, te = _train_and_test(method, train, test, jobs, test_features)
    return EvalReport.from_errors(angular_errors(est, te.T), protocol, train.name, test.name,
                                  method.name, te.scene_ids)


def inter_eval_sharpened(
    train: LabeledDataset,
    test: LabeledDataset,
    method: Method,
    sharpen_train: Transform3,
    sharpen_test: Transform3,
    jobs: int = 1,
) -> EvalReport:
    """Spectral-sharpening baseline: train and test each in its own sharpened space.

    Estimates are mapped back through the inverse test-camera sharpening
    before scoring against the original test ground truth.
    """
    tr = adapt_dataset(train, sharpen_train)
    te_sharp = [adapt_image(img, sharpen_test) for img, _ in test]
    ftr = extract_features(method, tr, jobs)
    model = method.fit(ftr.X, ftr.T, tr.name)
    rows = [method.extract(img) for img in te_sharp]
    est = method.predict(model, np.stack([r[0] for r in rows]), np.stack([r[1] for r in rows]))
    back = np.maximum(sharpen_test.inverse().apply(est), 0.0)
    for k, (img, _) in enumerate(test):
        if np.linalg.norm(back[k]) <= DEGENERATE_TOL:
            back[k] = grey_world(img)
    return EvalReport.from_errors(angular_errors(back, test.targets()), "inter-ss", train.name,
                                  test.name, method.name, [img.scene_id for img, _ in test])


# -- Wilcoxon signed-rank ----------------------------------------------------


@dataclass(frozen=True)
class WstVerdict:
    """``sign`` is ``'+'`` when method ``a`` has significantly lower errors."""

    comparison: tuple[str, str]
    sign: str
    alpha: float
    statistic: float
    n_effective: int
    p_value: float


def _exact_two_sided(ranks2: NDArray[np.int64], w2: int) -> float:
    """Exact two-sided p-value of the doubled signed-rank sum ``w2``.

    The null distribution is built by convolving one rank at a time with
    integer counts, so the result is exact for tied (half-integer) ranks too.
    """
    total = int(ranks2.sum())
    counts = [1] + [0] * total
    for r in ranks2.tolist():
        for s in range(total, r - 1, -1):
            if counts[s - r]:
                counts[s] += counts[s - r]
    dev = abs(2 * w2 - total)
    hits = sum(c for s, c in enumerate(counts) if abs(2 * s - total) >= dev)
    return float(Fraction(hits, 1 << ranks2.size))


def signed_rank_statistic(errs_a: ArrayLike, errs_b: ArrayLike):
    """Nonzero differences ``a - b``, their average ranks and ``W+``."""
    a = np.asarray(errs_a, dtype=float).ravel()
    b = np.asarray(errs_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    return d, ranks, float(ranks[d > 0].sum())


def wilcoxon_signed_rank(
    errs_a: ArrayLike,
    errs_b: ArrayLike,
    alpha: float = 0.05,
    names: tuple[str, str] = ("a", "b"),
) -> WstVerdict:
    """Paired two-sided signed-rank test on per-image errors.

    Exact null distribution up to 25 nonzero pairs, tie-corrected normal
    approximation beyond.
    """
    d, ranks, w = signed_rank_statistic(errs_a, errs_b)
    n = d.size
    if n == 0:
        return WstVerdict(names, "=", alpha, 0.0, 0, 1.0)
    if n < 6:
        raise ValueError(f"signed-rank test needs at least 6 nonzero differences, got {n}")
    mean = n * (n + 1) / 4.0
    if n <= EXACT_MAX_N:
        p = _exact_two_sided(np.rint(2 * ranks).astype(np.int64), int(round(2 * w)))
    else:
        _, t = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t ** 3 - t)) / 48.0
        p = float(min(1.0, 2.0 * norm.sf(abs(w - mean) / math.sqrt(var))))
    if p < alpha and w != mean:
        sign = "+" if w < mean else "-"
    else:
        sign = "="
    return WstVerdict(names, sign, alpha, w, n, p)


def wst_matrix(reports: Sequence[EvalReport], alpha: float = 0.05) -> list[list[str]]:
    """Pairwise verdict signs; ``NA`` where reports are not paired or too small."""
    out = []
    for ri in reports:
        row = []
        for rj in reports:
            if ri is rj:
                row.append("")
                continue
            if len(ri.per_image_errors_deg) != len(rj.per_image_errors_deg) or ri.scene_ids != rj.scene_ids:
                row.append("NA")
                continue
            try:
                row.append(wilcoxon_signed_rank(ri.per_image_errors_deg, rj.per_image_errors_deg, alpha).sign)
            except ValueError:
                row.append("NA")
        out.append(row)
    return out


# -- report files ------------------------------------------------------------


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """One row per scored test image: ``dataset,scene_id,error_deg``."""
    ids = report.scene_ids or tuple("" for _ in report.per_image_errors_deg)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "scene_id", "error_deg"])
        for sid, e in zip(ids, report.per_image_errors_deg):
            w.writerow([report.test_name, sid, repr(e)])


def read_report_csv(path: str | Path) -> tuple[str, list[str], list[float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty report")
    return rows[0]["dataset"], [r["scene_id"] for r in rows], [float(r["error_deg"]) for r in rows]


def write_wst_csv(labels: Sequence[str], matrix: Sequence[Sequence[str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for lab, row in zip(labels, matrix):
            w.writerow([lab] + list(row))
