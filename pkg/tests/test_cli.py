import csv
import json
import locale
from pathlib import Path

import numpy as np
import pytest

from bfnlab import acceptance
from bfnlab.cli import main
from bfnlab.cli_io import (
    DEFAULTS,
    ConfigError,
    build_config,
    fmt,
    load_config,
    parse_profile,
    read_config_text,
    write_csv,
)
from bfnlab.core import NamedProfile

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- configuration parsing ----------------------------------------------------------------


def test_defaults_documented():
    cfg = build_config({})
    assert (cfg.grid_n, cfg.nt, cfg.gain.kappa, cfg.iterations) == (512, 2048, 1.0, 1)
    assert DEFAULTS["record_every"] == "64"


@pytest.mark.parametrize("text,msg", [
    ("colour = red", "unknown key"),
    ("T = 1\nT = 2", "repeated key"),
    ("T 1", "expected"),
    ("T = 1,5", "not a number"),
    ("T = nan", "finite"),
    ("grid_n = 12.5", "integer"),
    ("u0 = sin2pi 1 bogus=2", "bad option"),
    ("gain_support = 0.2", "expected"),
    ("bc = neumannish", "unknown boundary"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        build_config(read_config_text(text))


def test_comments_and_blank_lines():
    raw = read_config_text("# header\n\nT = 0.5  # horizon\n")
    assert raw == {"T": "0.5"}


def test_profile_options():
    p = parse_profile("sin2pi 0.1 phase=0.5 mode=2 offset=1")
    assert p == NamedProfile("sin2pi", 0.1, 0.5, 2, 1.0)


def test_numbers_ignore_locale():
    old = locale.setlocale(locale.LC_NUMERIC)
    try:
        for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
            try:
                locale.setlocale(locale.LC_NUMERIC, name)
                break
            except locale.Error:
                continue
        cfg = build_config(read_config_text("T = 0.25"))
        assert cfg.spec.T == 0.25
        assert fmt(0.25) == "0.25"
    finally:
        locale.setlocale(locale.LC_NUMERIC, old)


@pytest.mark.parametrize("value,text", [(0.1, "0.10000000000000001"), (None, ""), (float("nan"), ""), (2.0, "2")])
def test_fmt(value, text):
    assert fmt(value) == text


def test_csv_layout(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, ["x", "y"], [[0.0, 0.5], [1.0, np.nan]])
    assert path.read_bytes() == b"x,y\n0,1\n0.5,\n"


@pytest.mark.parametrize("name", ["figure1_linear", "fixed_point", "viscous_burgers", "burgers_theorem6"])
def test_sample_configs_parse(name):
    load_config(CONFIGS / f"{name}.cfg")


# -- run ---------------------------------------------------------------------------------------


def test_run_fixed_point(tmp_path):
    assert main(["run", str(CONFIGS / "fixed_point.cfg"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    for it in rep["iterations"]:
        assert it["w0"] == 0.0 and it["wT"] == 0.0 and it["wtilde0"] == 0.0
    assert all(v == 0.0 for v in rep["oracle_deviation"].values())


def test_run_figure1_linear_is_flat_and_deterministic(tmp_path):
    cfg = str(CONFIGS / "figure1_linear.cfg")
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "profile.csv").read_bytes()
    assert a == (tmp_path / "b" / "profile.csv").read_bytes()
    assert b"\r" not in a
    rates = [float(r["rate"]) for r in read_rows(tmp_path / "a" / "profile.csv") if r["rate"]]
    assert np.max(np.abs(np.array(rates) - 1.0)) <= 1e-6


def test_run_viscous_burgers_is_refused(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "viscous_burgers.cfg"), "--out", str(tmp_path)]) == 2
    assert "Theorem 2" in capsys.readouterr().err


def test_run_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("speed = 3\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_run_past_shock_is_refused(tmp_path, capsys):
    cfg = tmp_path / "shock.cfg"
    cfg.write_text("equation = burgers\nT = 1\nu0 = sin2pi 0.5\ngrid_n = 64\nnt = 64\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 2
    assert "Theorem 6" in capsys.readouterr().err


# -- figure1 -------------------------------------------------------------------------------------


def test_figure1_csv(tmp_path):
    args = ["figure1", "linear", "--T", "0.25", "0.75", "--grid-n", "64", "--nt", "64"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "figure1_linear.csv").read_bytes()
    assert a == (tmp_path / "b" / "figure1_linear.csv").read_bytes()
    rows = read_rows(tmp_path / "a" / "figure1_linear.csv")
    assert list(rows[0]) == ["x", "rate_T=0.25", "rate_T=0.75"]
    x = np.array([float(r["x"]) for r in rows])
    short = np.array([float(r["rate_T=0.25"] or "nan") for r in rows])
    assert short[np.argmin(np.abs(x - 0.7))] == pytest.approx(0.0, abs=1e-12)
    long = np.array([float(r["rate_T=0.75"] or "nan") for r in rows])
    assert np.all(long[~np.isnan(long)] > 0)
    assert (tmp_path / "a" / "figure1_linear.plt").exists()


# -- bn-growth -----------------------------------------------------------------------------------


@pytest.mark.parametrize("args,verdict", [
    (["--K", "0", "--Kp", "0"], "well-posed boundary case"),
    (["--K", "1", "--Kp", "1"], "super-polynomial"),
    (["--K", "1", "--Kp", "1", "--nu", "0"], "polynomial"),
])
def test_bn_growth(tmp_path, args, verdict):
    assert main(["bn-growth", *args, "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "bn_summary.txt").read_text()
    assert summary.startswith(verdict + ":")
    rows = read_rows(tmp_path / "bn.csv")
    assert len(rows) == 128 and list(rows[0]) == ["n", "log10_abs_b", "g"]


def test_bn_growth_rejects_large_N(tmp_path):
    assert main(["bn-growth", "--N", "1000", "--out", str(tmp_path)]) == 1


# -- colehopf-check ------------------------------------------------------------------------------


def test_colehopf_check(tmp_path):
    assert main(["colehopf-check", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "colehopf.json").read_text())["discrepancy"] <= 1e-6


def test_colehopf_check_past_cap(capsys):
    assert main(["colehopf-check", "--n-modes", "64"]) == 1
    assert "Proposition 3" in capsys.readouterr().err


# -- verify ------------------------------------------------------------------------------------------


@pytest.fixture
def quick_criteria(monkeypatch):
    keep = {"1", "2", "4", "9"}
    monkeypatch.setattr(acceptance, "CRITERIA", [c for c in acceptance.CRITERIA if c[0] in keep])


def test_verify_passes_and_is_deterministic(tmp_path, quick_criteria, capsys):
    assert main(["verify", "--out", str(tmp_path / "a")]) == 0
    assert main(["verify", "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[:4] == [line for line in out[:4] if line.startswith("PASS ")]
    a = json.loads((tmp_path / "a" / "verify.json").read_text())
    b = json.loads((tmp_path / "b" / "verify.json").read_text())
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b and a["all_passed"]


@pytest.mark.parametrize("mutation", sorted(acceptance.MUTATIONS))
def test_verify_mutation_fails(tmp_path, monkeypatch, mutation):
    target = {"theorem1": "1", "window": "2", "chi": "4", "theorem6": "5", "bn": "9"}[mutation]
    monkeypatch.setattr(acceptance, "CRITERIA", [c for c in acceptance.CRITERIA if c[0] == target])
    assert main(["verify", "--mutate", mutation, "--out", str(tmp_path)]) == 1
    assert not json.loads((tmp_path / "verify.json").read_text())["all_passed"]
