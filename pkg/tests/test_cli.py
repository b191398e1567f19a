import json
import math
import re
from pathlib import Path

import numpy as np
import pytest

from hdfl.cli import main
from hdfl.harness import Row
from hdfl.plotting import collect_series, svg_chart

DATA = Path(__file__).parent / "data"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def no_env_seed(monkeypatch):
    monkeypatch.delenv("HDFL_SEED", raising=False)


def test_gen_is_byte_identical(tmp_path, no_env_seed):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("gen", "--kind", "subspace_gaussians", "--n", 100, "--m", 2, "--seed", 7, "--out", a) == 0
    assert run("gen", "--kind", "subspace_gaussians", "--n", 100, "--m", 2, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["ambient_dim"] == 100 and doc["intrinsic_dim"] == 2


def test_missing_seed_is_usage_error(tmp_path, no_env_seed, capsys):
    assert run("gen", "--kind", "concentric_spheres", "--n", 5, "--out", tmp_path / "x.json") == 2
    err = capsys.readouterr().err
    assert "--seed" in err and len(err.strip().splitlines()) == 1


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HDFL_SEED", "7")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("gen", "--kind", "concentric_spheres", "--n", 5, "--out", a) == 0
    assert run("gen", "--kind", "concentric_spheres", "--n", 5, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unknown_flag_rejected(no_env_seed):
    with pytest.raises(SystemExit) as info:
        run("gen", "--kind", "concentric_spheres", "--n", 5, "--seed", 1, "--colour", "red")
    assert info.value.code == 2


def test_folded_curve_then_twonn(tmp_path, no_env_seed):
    data, out = tmp_path / "curve.json", tmp_path / "lid.csv"
    assert run("gen", "--kind", "folded_curve", "--n", 50, "--per-class", 250, "--noise", 0,
               "--seed", 3, "--out", data) == 0
    assert run("lid", "twonn", "--data", data, "--out", out) == 0
    value = float(out.read_text().splitlines()[1].split(",")[-1])
    assert 0.8 <= value <= 1.6


def test_train_probe_attack_pipeline(tmp_path, no_env_seed):
    data, lr, mlp = tmp_path / "d.json", tmp_path / "lr.json", tmp_path / "mlp.json"
    run("gen", "--kind", "subspace_gaussians", "--n", 20, "--m", 2, "--per-class", 10, "--seed", 1,
        "--out", data)
    assert run("train", "--data", data, "--model", "logistic", "--seed", 2, "--out", lr) == 0
    assert run("train", "--data", data, "--model", "mlp", "--hidden", "8,4", "--epochs", 5,
               "--seed", 2, "--out", mlp) == 0
    report = tmp_path / "probe.json"
    assert run("probe", "--model", lr, "--data", data, "--complexity", "--radius", "auto",
               "--margins", "--margins-csv", tmp_path / "m.csv", "--out", report) == 0
    doc = json.loads(report.read_text())
    assert doc["complexity"]["independent_count"] == 1
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 21
    out = tmp_path / "att.csv"
    assert run("attack", "--model", lr, "--data", data, "--kind", "minimal", "--transfer-to", mlp,
               "--out", out) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 21 and rows[1].endswith((",0", ",1"))
    assert run("attack", "--model", mlp, "--data", data, "--kind", "minimal") == 3


def test_train_needs_seed_but_tree_does_not(tmp_path, no_env_seed):
    data = tmp_path / "d.json"
    run("gen", "--kind", "subspace_gaussians", "--n", 4, "--m", 2, "--per-class", 5, "--seed", 1,
        "--out", data)
    assert run("train", "--data", data, "--model", "logistic", "--out", tmp_path / "m.json") == 2
    assert run("train", "--data", data, "--model", "tree", "--out", tmp_path / "t.json") == 0


def test_missing_input_is_data_error(tmp_path):
    assert run("probe", "--model", tmp_path / "nope.json", "--complexity") == 3


def test_experiment_twice_identical(tmp_path, no_env_seed):
    cfg = tmp_path / "margin_collapse.json"
    cfg.write_text(json.dumps({"kind": "margin_collapse", "dims": [5, 20], "seeds": 2}))
    for d in ("a", "b"):
        assert run("experiment", "--config", cfg, "--seed", 1, "--out-dir", tmp_path / d) == 0
    for name in ("margin_collapse.csv", "margin_collapse.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_experiment_overrides_last_wins(tmp_path, no_env_seed):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "margin_collapse", "dims": [5], "seeds": 2}))
    assert run("experiment", "--config", cfg, "--seed", 1, "--set", "seeds=5", "--set", "seeds=3",
               "--out-dir", tmp_path) == 0
    meta = json.loads((tmp_path / "margin_collapse.json").read_text())
    assert meta["config"]["seeds"] == 3


@pytest.mark.parametrize("text,field", [
    ('{"kind": "margin_collapse", "dims": "many"}', "dims"),
    ('{"kind": "margin_collapse", "epsilon": -1}', "epsilon"),
    ('{"kind": ', "<json>"),
])
def test_bad_config_names_field(tmp_path, capsys, text, field):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    assert run("experiment", "--config", cfg, "--seed", 1, "--out-dir", tmp_path) == 2
    err = capsys.readouterr().err.strip()
    assert field in err and len(err.splitlines()) == 1


def test_plot_one_polyline_per_metric(tmp_path, no_env_seed):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "margin_collapse", "dims": [5, 20], "seeds": 2}))
    run("experiment", "--config", cfg, "--seed", 1, "--out-dir", tmp_path)
    svg = tmp_path / "mc.svg"
    assert run("plot", "--input", tmp_path / "margin_collapse.csv", "--out", svg) == 0
    text = svg.read_text()
    assert text.count("<polyline") == 3
    assert run("plot", "--input", tmp_path / "margin_collapse.csv", "--metric", "nope") == 2


def test_plot_empty_csv_fails(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("plot", "--input", empty, "--out", tmp_path / "x.svg") != 0
    header_only = tmp_path / "h.csv"
    header_only.write_text("experiment,N,metric,value,ci_lo,ci_hi,seeds\n")
    assert run("plot", "--input", header_only, "--out", tmp_path / "x.svg") != 0


def test_plot_loglog_golden(tmp_path):
    out = tmp_path / "s.svg"
    assert run("plot", "--input", DATA / "sphere_scaling.csv", "--metric", "mean_distance",
               "--loglog", "--out", out) == 0
    text = out.read_text()
    assert text == (DATA / "sphere_scaling_loglog.svg").read_text()
    assert ">log10 N<" in text and ">log10 distance<" in text


def test_golden_polyline_recovers_power_law():
    # invert the pixel mapping by hand; the input follows d = 0.2 * (N / 20) ** -0.5
    text = (DATA / "sphere_scaling_loglog.svg").read_text()
    pts = re.search(r'<polyline points="([^"]+)"', text).group(1).split()
    xy = np.array([[float(v) for v in p.split(",")] for p in pts])
    x0, x1 = math.log10(20), math.log10(500)
    y0, y1 = math.log10(0.03), math.log10(0.25)
    lx = x0 + (xy[:, 0] - 70) / 400 * (x1 - x0)
    ly = y0 + (370 - xy[:, 1]) / 340 * (y1 - y0)
    slope = np.polyfit(lx, ly, 1)[0]
    assert slope == pytest.approx(-0.5, abs=1e-4)


def test_svg_is_deterministic():
    rows = [Row("e", n, "m", 1.0 / n, 0.5 / n, 2.0 / n, 1) for n in (1, 2, 4)]
    s = collect_series(rows)
    assert svg_chart(s, title="t", logx=True) == svg_chart(s, title="t", logx=True)


def test_plot_png(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "s.png"
    assert run("plot", "--input", DATA / "sphere_scaling.csv", "--loglog", "--format", "png",
               "--out", out) == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
