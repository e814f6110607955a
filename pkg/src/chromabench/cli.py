"""Command-line experiment runner.

Subcommands::

    chromabench gen-mondrian --config exp.ini [--out DIR] [--seed N] [--jobs N]
    chromabench render-hyper --config exp.ini [--out DIR]
    chromabench learn-css CSS1 CSS2 REFL --out S.csv [--verify [CSS3]]
    chromabench run --config exp.ini [--out DIR] [--seed N] [--jobs N]
    chromabench report REPORT.csv [REPORT.csv ...] [--out DIR]

All outputs are plain files; rerunning a command with the same config and
seed rewrites them byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .css_adapt import Transform3, learn_css_transform, stable_representation
from .dataio import load_cube, load_dataset, load_transform, save_dataset, save_transform
from .estimators import GreyEdge, GreyWorld, Oracle, make_method, spectral_sharpen
from .evaluation import (
    EvalReport,
    angular_errors,
    cross_validate,
    inter_eval,
    inter_eval_sharpened,
    paired_cross_validate,
    read_report_csv,
    summarize,
    wilcoxon_signed_rank,
    write_report_csv,
    write_wst_csv,
    wst_matrix,
)
from .library import planck
from .spectra import DEFAULT_GRID, CssFunction, Spectrum, load_spectra_csv
from .synth import LabeledDataset, hyperspectral_dataset, mondrian_dataset, render_hyperspectral

logger = logging.getLogger("chromabench")

TRANSITIVITY_TOL = 0.05


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.@+-]+", "-", name)


# -- loading -----------------------------------------------------------------


def _need(value, what: str, cfg: ExperimentConfig):
    if not value:
        raise ValueError(f"{cfg.source}: [data] {what} is required for this command")
    return value


def _reflectances(cfg: ExperimentConfig) -> list[Spectrum]:
    return load_spectra_csv(_need(cfg.reflectances, "reflectances", cfg), "reflectance")


def _illuminants(cfg: ExperimentConfig) -> list[Spectrum]:
    return load_spectra_csv(_need(cfg.illuminants, "illuminants", cfg), "illuminant")


def _cameras(cfg: ExperimentConfig) -> list[CssFunction]:
    cams = [load_spectra_csv(p, "css")[0] for p in _need(cfg.cameras, "cameras", cfg)]
    ids = [c.camera_id for c in cams]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{cfg.source}: camera ids (file stems) must be distinct, got {ids}")
    return cams


def _blackbody(cct: float, cfg: ExperimentConfig) -> Spectrum:
    v = planck(cct, cfg.grid)
    return Spectrum(cfg.grid.wavelengths, v / v.max(), id=f"planck{int(round(cct))}K", kind="illuminant")


# -- gen-mondrian / render-hyper ----------------------------------------------


def cmd_gen_mondrian(cfg: ExperimentConfig, jobs: int = 1) -> list[Path]:
    """One Mondrian dataset per configured camera, all sharing the same scenes."""
    refls, illums, cams = _reflectances(cfg), _illuminants(cfg), _cameras(cfg)
    out = []
    for css in cams:
        ds = mondrian_dataset(cfg.mondrian_count, cfg.mondrian, refls, illums, css, cfg.grid,
                              jobs=jobs, start=cfg.mondrian_start)
        out.append(save_dataset(ds, cfg.out / _safe(ds.name)))
        logger.info("wrote %d images to %s", len(ds), out[-1])
    return out


def cmd_render_hyper(cfg: ExperimentConfig) -> list[Path]:
    """Every cube under every illuminant, one dataset per configured camera."""
    cubes = [load_cube(p) for p in _need(cfg.cubes, "cubes", cfg)]
    illums, cams = _illuminants(cfg), _cameras(cfg)
    out = []
    for css in cams:
        ds = hyperspectral_dataset(cubes, illums, css, cfg.grid)
        out.append(save_dataset(ds, cfg.out / _safe(ds.name)))
        logger.info("wrote %d images to %s", len(ds), out[-1])
    return out


# -- learn-css ---------------------------------------------------------------


def transitivity_error(s_ab: Transform3, s_bc: Transform3, s_ac: Transform3) -> float:
    """``||S_bc S_ab - S_ac||_F / ||S_ac||_F``."""
    return float(np.linalg.norm(s_bc.m @ s_ab.m - s_ac.m) / np.linalg.norm(s_ac.m))


def cmd_learn_css(css1: Path, css2: Path, refl: Path, out: Path, verify: Path | None | bool = False,
                  grid=None) -> tuple[Transform3, float | None]:
    """Fit and write ``S`` (camera 1 to camera 2).

    With ``verify`` set to a third camera file the composition through that
    camera is compared to the direct map; with ``verify=True`` alone the
    round trip ``S_21 S_12`` is compared to the identity.
    """
    grid = grid or DEFAULT_GRID
    c1, c2 = load_spectra_csv(css1, "css")[0], load_spectra_csv(css2, "css")[0]
    refls = load_spectra_csv(refl, "reflectance")
    S = learn_css_transform(c1, c2, refls, grid)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_transform(S, out)
    err = None
    if verify:
        if isinstance(verify, Path):
            c3 = load_spectra_csv(verify, "css")[0]
            s23 = learn_css_transform(c2, c3, refls, grid)
            s13 = learn_css_transform(c1, c3, refls, grid)
            err = transitivity_error(S, s23, s13)
        else:
            back = learn_css_transform(c2, c1, refls, grid)
            err = transitivity_error(S, back, Transform3.identity())
    return S, err


# -- run ---------------------------------------------------------------------


def _datasets(cfg: ExperimentConfig, jobs: int) -> list[LabeledDataset]:
    if cfg.datasets:
        return [load_dataset(p) for p in cfg.datasets]
    refls, illums = _reflectances(cfg), _illuminants(cfg)
    return [
        mondrian_dataset(cfg.mondrian_count, cfg.mondrian, refls, illums, css, cfg.grid, jobs=jobs,
                         start=cfg.mondrian_start)
        for css in _cameras(cfg)
    ]


def _method(name: str, datasets: Sequence[LabeledDataset]):
    if name == "oracle":
        return Oracle.from_datasets(*datasets)
    return make_method("cbcc" if name == "ss-cbcc" else name)


def _same_scenes(a: LabeledDataset, b: LabeledDataset) -> bool:
    return [i.scene_id for i, _ in a] == [i.scene_id for i, _ in b]


def _transform_for(cfg: ExperimentConfig, a: str, b: str, cams: dict, refls, cache: dict) -> Transform3:
    if (a, b) in cache:
        return cache[(a, b)]
    if cfg.transform is not None:
        S = load_transform(cfg.transform)
        if (S.from_camera, S.to_camera) == (a, b):
            cache[(a, b)] = S
            return S
    if a not in cams or b not in cams or refls is None:
        raise ValueError(f"no transform for {a!r}->{b!r}: configure [data] transform or cameras and reflectances")
    cache[(a, b)] = learn_css_transform(cams[a], cams[b], refls, cfg.grid)
    return cache[(a, b)]


def _run_protocols(cfg: ExperimentConfig, datasets: list[LabeledDataset], jobs: int) -> list[EvalReport]:
    cams = {c.camera_id: c for c in _cameras(cfg)} if cfg.cameras else {}
    refls = _reflectances(cfg) if cfg.reflectances else None
    cache: dict = {}
    reports: list[EvalReport] = []
    pairs = [(a, b) for a in datasets for b in datasets if a is not b]
    for name in cfg.methods:
        method = _method(name, datasets)
        if name == "ss-cbcc":
            protocols = ["inter-ss"]
        else:
            protocols = [p for p in cfg.protocols if p not in ("stable-repr", "inter-ss")]
            if "inter-ss" in cfg.protocols and name in ("cbcc", "cm"):
                protocols.append("inter-ss")
        for protocol in protocols:
            if protocol == "intra":
                for ds in datasets:
                    reports.append(cross_validate(ds, method, cfg.folds, cfg.repeats, cfg.seed_cv, jobs))
                continue
            for a, b in pairs:
                if protocol == "inter-ss":
                    if refls is None or a.camera_id not in cams or b.camera_id not in cams:
                        raise ValueError("inter-ss needs [data] cameras and reflectances")
                    l1, l2 = (_blackbody(t, cfg) for t in cfg.sharpen_cct)
                    ta = spectral_sharpen(cams[a.camera_id], l1, l2, refls, cfg.grid)
                    tb = spectral_sharpen(cams[b.camera_id], l1, l2, refls, cfg.grid)
                    reports.append(inter_eval_sharpened(a, b, method, ta, tb, jobs))
                    continue
                S = None
                if protocol == "inter-adapted":
                    S = _transform_for(cfg, a.camera_id, b.camera_id, cams, refls, cache)
                if cfg.paired and _same_scenes(a, b):
                    reports.append(paired_cross_validate(a, b, method, S, cfg.folds, cfg.repeats,
                                                         cfg.seed_cv, jobs))
                else:
                    reports.append(inter_eval(a, b, method, S, jobs))
    return reports


def stable_repr_errors(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel angles between the two renderings of the first cube, before and after processing.

    Camera 1 sees the cube under the first ``[stable] cct`` light and camera 2
    under the second. Image 1 is mapped into camera 2 with the learned ``S``
    and both are corrected with their illuminants (ground truth or an
    unsupervised estimate).
    """
    cams = _cameras(cfg)
    if len(cams) < 2:
        raise ValueError("stable-repr needs two cameras")
    c1, c2 = cams[0], cams[1]
    cube = load_cube(_need(cfg.cubes, "cubes", cfg)[0])
    la, lb = (_blackbody(t, cfg) for t in cfg.stable_cct)
    i1, g1 = render_hyperspectral(cube, la, c1, cfg.grid)
    i2, g2 = render_hyperspectral(cube, lb, c2, cfg.grid)
    S = learn_css_transform(c1, c2, _reflectances(cfg), cfg.grid)
    if cfg.stable_estimate == "ground-truth":
        e1, e2 = g1.illuminant_rgb, g2.illuminant_rgb
    else:
        est = GreyWorld() if cfg.stable_estimate == "grey_world" else GreyEdge()
        e1, e2 = est.extract(i1)[0], est.extract(i2)[0]
    r1 = stable_representation(i1, e1, S)
    r2 = stable_representation(i2, e2, Transform3.identity(c2.camera_id, c2.camera_id))
    return _pixel_angles(i1.pixels, i2.pixels), _pixel_angles(r1.pixels, r2.pixels)


def _pixel_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a2, b2 = a.reshape(-1, 3), b.reshape(-1, 3)
    ok = (np.linalg.norm(a2, axis=1) > 0) & (np.linalg.norm(b2, axis=1) > 0)
    out = np.full(a2.shape[0], np.nan)
    out[ok] = angular_errors(a2[ok], b2[ok])
    return out.reshape(a.shape[:2])


def _write_pixel_csv(path: Path, ang: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("y,x,angle_deg\n")
        for (y, x), v in np.ndenumerate(ang):
            fh.write(f"{y},{x},{v!r}\n")


def bar_chart_svg(labels: Sequence[str], values: Sequence[float], title: str = "mean angular error (deg)") -> str:
    """Horizontal bar chart as a standalone SVG document."""
    bar_h, gap, left, width = 18, 6, 320, 360
    top = 30
    vmax = max([v for v in values if np.isfinite(v)] + [1e-9])
    h = top + len(labels) * (bar_h + gap) + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 80}" height="{h}" '
        f'font-family="sans-serif" font-size="12">',
        f'<text x="10" y="18" font-weight="bold">{_xml(title)}</text>',
    ]
    for k, (lab, v) in enumerate(zip(labels, values)):
        y = top + k * (bar_h + gap)
        w = 0.0 if not np.isfinite(v) else width * v / vmax
        parts.append(f'<text x="{left - 6}" y="{y + bar_h - 5}" text-anchor="end">{_xml(lab)}</text>')
        parts.append(f'<rect x="{left}" y="{y}" width="{w:.2f}" height="{bar_h}" fill="#4878a8"/>')
        parts.append(f'<text x="{left + w + 4:.2f}" y="{y + bar_h - 5}">{v:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _xml(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _report_name(r: EvalReport) -> str:
    if r.protocol == "intra":
        return f"{r.method}_intra_{r.test_name}"
    return f"{r.method}_{r.protocol}_{r.train_name}_to_{r.test_name}"


def cmd_run(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Run the configured protocols and write reports; returns paths and summaries."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "reports").mkdir(exist_ok=True)
    lines = [
        f"chromabench {__version__}",
        f"config: {cfg.source}",
        f"config_sha256: {cfg.text_hash}",
        f"seeds: {cfg.seeds_text()}",
        f"folds={cfg.folds} repeats={cfg.repeats} paired={cfg.paired}",
    ]
    reports: list[EvalReport] = []
    needs_data = [p for p in cfg.protocols if p != "stable-repr"] or "ss-cbcc" in cfg.methods
    if needs_data:
        datasets = _datasets(cfg, jobs)
        lines.append("datasets: " + ", ".join(f"{d.name} ({d.camera_id}, n={len(d)})" for d in datasets))
        reports = _run_protocols(cfg, datasets, jobs)
    for r in reports:
        write_report_csv(r, cfg.out / "reports" / f"{_safe(_report_name(r))}.csv")
        lines.append(r.summary_text())
    result: dict = {"reports": reports}
    if "stable-repr" in cfg.protocols:
        before, after = stable_repr_errors(cfg)
        _write_pixel_csv(cfg.out / "stable_before.csv", before)
        _write_pixel_csv(cfg.out / "stable_after.csv", after)
        mb, ma = float(np.nanmedian(before)), float(np.nanmedian(after))
        lines.append(f"stable-repr ({cfg.stable_estimate}): median before={mb:.4f} after={ma:.4f}")
        result["stable"] = (mb, ma)
    if len(cfg.methods) >= 2 and len(reports) >= 2:
        labels = [_report_name(r) for r in reports]
        write_wst_csv(labels, wst_matrix(reports), cfg.out / "wst.csv")
    if cfg.svg and reports:
        (cfg.out / "means.svg").write_text(
            bar_chart_svg([_report_name(r) for r in reports], [r.mean for r in reports]), encoding="utf-8")
    (cfg.out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    result["summary"] = cfg.out / "summary.txt"
    return result


# -- report ------------------------------------------------------------------


def cmd_report(paths: Sequence[Path], out: Path | None = None) -> str:
    """Summaries and, for two or more files, the pairwise signed-rank verdicts."""
    rows = []
    for p in paths:
        ds, ids, errs = read_report_csv(p)
        rows.append((Path(p).stem, ds, ids, errs))
    lines = []
    for name, ds, ids, errs in rows:
        mean, med, tri, mx = summarize(errs)
        lines.append(f"{name}  test={ds}  n={len(errs)}  mean={mean:.4f}  median={med:.4f}  "
                     f"trimean={tri:.4f}  max={mx:.4f}")
    labels = [r[0] for r in rows]
    matrix = []
    for i, ri in enumerate(rows):
        row = []
        for j, rj in enumerate(rows):
            if i == j:
                row.append("")
            elif ri[2] != rj[2]:
                row.append("NA")
            else:
                try:
                    row.append(wilcoxon_signed_rank(ri[3], rj[3]).sign)
                except ValueError:
                    row.append("NA")
        matrix.append(row)
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        if len(rows) >= 2:
            write_wst_csv(labels, matrix, out / "wst.csv")
        (out / "means.svg").write_text(bar_chart_svg(labels, [summarize(r[3])[0] for r in rows]),
                                       encoding="utf-8")
    return text


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chromabench", description="Inter-camera colour constancy experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path)
            p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--jobs", type=int, default=1)

    common(sub.add_parser("gen-mondrian", help="render Mondrian datasets for every camera"))
    common(sub.add_parser("render-hyper", help="render spectral cubes for every camera"))
    p = sub.add_parser("learn-css", help="fit the 3x3 map between two cameras")
    p.add_argument("css1", type=Path)
    p.add_argument("css2", type=Path)
    p.add_argument("reflectances", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--verify", nargs="?", const=True, default=False, type=Path,
                   help="check composition through a third camera file (or the round trip if none)")
    common(sub.add_parser("run", help="run the configured protocols"))
    p = sub.add_parser("report", help="summarise per-image report files")
    p.add_argument("reports", nargs="+", type=Path)
    p.add_argument("--out", type=Path, default=None)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        if args.command == "learn-css":
            S, err = cmd_learn_css(args.css1, args.css2, args.reflectances, args.out, args.verify)
            print(f"wrote {args.out} ({S.from_camera} -> {S.to_camera}, cond {S.condition_number:.3g})")
            if err is not None:
                print(f"composition relative error {err:.4f} (tolerance {TRANSITIVITY_TOL})")
                if err >= TRANSITIVITY_TOL:
                    return 2
            return 0
        if args.command == "report":
            print(cmd_report(args.reports, args.out), end="")
            return 0
        cfg = load_config(args.config, out=args.out)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "gen-mondrian":
            for m in cmd_gen_mondrian(cfg, args.jobs):
                print(m)
        elif args.command == "render-hyper":
            for m in cmd_render_hyper(cfg):
                print(m)
        elif args.command == "run":
            res = cmd_run(cfg, args.jobs)
            print(res["summary"].read_text(encoding="utf-8"), end="")
        return 0
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"chromabench {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
