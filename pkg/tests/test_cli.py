from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np
import pytest

from chromabench.cli import bar_chart_svg, main
from chromabench.config import load_config
from chromabench.dataio import load_transform
from chromabench.library import css_family
from chromabench.spectra import CssFunction, write_spectra_csv

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))
from make_toy_data import write_toy_data  # noqa: E402


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    cfg = write_toy_data(root, count=12, size=32, repeats=2, n_refl=200, n_illum=3)
    return root, cfg


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_gen_mondrian_smoke_and_determinism(toy, tmp_path):
    root, cfg = toy
    one = root / "one.ini"
    one.write_text(cfg.read_text().replace("count = 12", "count = 1"))
    assert main(["gen-mondrian", "--config", str(one), "--out", str(tmp_path / "a")]) == 0
    assert main(["gen-mondrian", "--config", str(one), "--out", str(tmp_path / "b")]) == 0
    for cam in ("mondrian-gauss", "mondrian-shifted-broad"):
        m = rows(tmp_path / "a" / cam / "manifest.csv")
        assert len(m) == 2
        assert (tmp_path / "a" / cam / "manifest.csv").read_bytes() == (tmp_path / "b" / cam / "manifest.csv").read_bytes()
        assert (tmp_path / "a" / cam / m[1][0]).read_bytes() == (tmp_path / "b" / cam / m[1][0]).read_bytes()


def test_seed_flag_changes_scenes(toy, tmp_path):
    _, cfg = toy
    main(["gen-mondrian", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["gen-mondrian", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    m = "mondrian-gauss/manifest.csv"
    assert (tmp_path / "a" / m).read_bytes() != (tmp_path / "b" / m).read_bytes()


def test_render_hyper_counts(toy, tmp_path):
    _, cfg = toy
    assert main(["render-hyper", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "hyper-gauss" / "manifest.csv")) == 1 + 2 * 3


def test_render_hyper_missing_cube(toy, tmp_path, capsys):
    root, cfg = toy
    bad = root / "bad.ini"
    bad.write_text(cfg.read_text().replace("cube1.npz", "cube9.npz"))
    assert main(["render-hyper", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "cube9.npz" in capsys.readouterr().err


def test_learn_css_identity_and_permutation(toy, tmp_path):
    root, _ = toy
    assert main(["learn-css", str(root / "gauss.csv"), str(root / "gauss.csv"), str(root / "refl.csv"),
                 "--out", str(tmp_path / "id.csv")]) == 0
    assert np.abs(load_transform(tmp_path / "id.csv").m - np.eye(3)).max() < 1e-9
    from chromabench.spectra import load_spectra_csv

    (c,) = load_spectra_csv(root / "gauss.csv", "css")
    sw = CssFunction.from_matrix("swapped", c.wavelengths_nm, c.matrix[:, [1, 0, 2]])
    write_spectra_csv(tmp_path / "swapped.csv", sw)
    main(["learn-css", str(root / "gauss.csv"), str(tmp_path / "swapped.csv"), str(root / "refl.csv"),
          "--out", str(tmp_path / "p.csv")])
    P = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    assert np.abs(load_transform(tmp_path / "p.csv").m - P).max() < 1e-9


def test_learn_css_verify(toy, tmp_path, capsys):
    root, _ = toy
    fam = css_family()
    for c in fam[:3]:
        write_spectra_csv(tmp_path / f"{c.camera_id}.csv", c)
    a, b, c = (str(tmp_path / f"{x.camera_id}.csv") for x in fam[:3])
    code = main(["learn-css", a, b, str(root / "refl.csv"), "--out", str(tmp_path / "s.csv"), "--verify", c])
    out = capsys.readouterr().out
    assert code == 0 and "composition relative error" in out


def test_run_oracle_intra_is_zero(toy, tmp_path):
    root, cfg = toy
    ini = root / "oracle.ini"
    ini.write_text(cfg.read_text().replace("methods = cbcc, grey_world", "methods = oracle")
                   .replace("protocols = intra, inter, inter-adapted, stable-repr", "protocols = intra"))
    assert main(["run", "--config", str(ini), "--out", str(tmp_path)]) == 0
    errs = [float(r[2]) for r in rows(tmp_path / "reports" / "oracle_intra_mondrian-gauss.csv")[1:]]
    assert max(errs) < 1e-5
    assert "mean=0.0000" in (tmp_path / "summary.txt").read_text()


def test_run_full_protocol_set(toy, tmp_path):
    _, cfg = toy
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    reports = sorted(p.name for p in (tmp_path / "a" / "reports").iterdir())
    assert "cbcc_inter_mondrian-gauss_to_mondrian-shifted-broad.csv" in reports
    assert "cbcc_inter-adapted_mondrian-gauss@shifted-broad_to_mondrian-shifted-broad.csv" in reports
    for name in reports + ["summary.txt", "wst.csv", "stable_before.csv", "stable_after.csv", "means.svg"]:
        sub = "reports/" if name in reports else ""
        assert (tmp_path / "a" / sub / name).read_bytes() == (tmp_path / "b" / sub / name).read_bytes(), name
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "config_sha256:" in summary and "seeds: mondrian=7" in summary and "datasets:" in summary
    mean = {}
    for line in summary.splitlines():
        if line.startswith("cbcc:inter"):
            key = line.split()[0] + line.split()[2]
            nxt = summary.splitlines()[summary.splitlines().index(line) + 1]
            mean[key] = float(nxt.split("mean=")[1].split()[0])
    assert mean["cbcc:inter-adaptedtest=mondrian-shifted-broad"] < mean["cbcc:intertest=mondrian-shifted-broad"]
    assert len(rows(tmp_path / "a" / "stable_after.csv")) == 1 + 16 * 16


def test_run_error_exit(toy, tmp_path, capsys):
    root, cfg = toy
    bad = root / "badproto.ini"
    bad.write_text(cfg.read_text().replace("protocols = intra", "protocols = sideways"))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "sideways" in capsys.readouterr().err


def test_report_command(toy, tmp_path, capsys):
    _, cfg = toy
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")])
    files = sorted(str(p) for p in (tmp_path / "r" / "reports").glob("cbcc_intra_*.csv"))
    assert main(["report", *files, "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "wst.csv").exists()
    assert "cbcc_intra_mondrian-gauss" in capsys.readouterr().out


def test_config_env_override(toy, tmp_path, monkeypatch):
    root, cfg = toy
    moved = tmp_path / "cfg.ini"
    moved.write_text(cfg.read_text())
    with pytest.raises(FileNotFoundError, match="reflectances"):
        load_config(moved)
    monkeypatch.setenv("CHROMABENCH_DATA", str(root))
    c = load_config(moved)
    assert c.reflectances == root / "refl.csv" and c.mondrian.width == 32


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    svg = bar_chart_svg(["a<b", "c"], [1.0, 2.5])
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg") and len([e for e in root if e.tag.endswith("rect")]) == 2
