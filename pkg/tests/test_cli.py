import json
import shutil
import subprocess

import pytest

from weak_euler import __version__
from weak_euler.cli import main
from weak_euler.experiments import EXPERIMENTS


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, cfg, *flags, out="out"):
    code = main(["run", _write(tmp_path, cfg), "--output", str(tmp_path / out), *flags])
    summary = tmp_path / out / "summary.json"
    return code, (json.loads(summary.read_text()) if summary.exists() else None)


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 10 == len(EXPERIMENTS)
    text = "\n".join(lines)
    conv = next(l for l in lines if l.startswith("convergence"))
    irr = next(l for l in lines if l.startswith("irregular-rate"))
    assert "order h" in conv and "bounded measurable" in irr
    assert "requires:" in text


def test_analytic_convergence(tmp_path):
    cfg = {"experiment": "convergence", "model": "gbm", "f": "square", "n_ladder": [4, 8, 16, 32, 64],
           "mode": "analytic"}
    code, doc = _run(tmp_path, cfg)
    assert code == 0 and doc["pass"] is True
    assert doc["estimates"]["report"]["slope"] == pytest.approx(0.9335099581299642, abs=1e-12)
    assert doc["version"] == __version__
    assert doc["config"]["n_ladder"] == [4, 8, 16, 32, 64]
    for f in ("results.csv", "plotdata.csv", "timing.json"):
        assert (tmp_path / "out" / f).exists()
    header = (tmp_path / "out" / "results.csv").read_text().splitlines()[0]
    assert header == "n,h,error,stderr,M,excluded"


def test_error_identity_on_delay_model(tmp_path):
    code, doc = _run(tmp_path, {"experiment": "error-identity", "model": "delay", "M": 200})
    assert code == 0 and doc["pass"]
    assert doc["estimates"]["models"][0]["max_residual"] < 1e-9


def test_contract_failure_is_reported_not_raised(tmp_path):
    cfg = {"experiment": "convergence", "model": "gbm", "f": "square", "n_ladder": [4, 8, 16],
           "mode": "analytic", "thresholds": {"slope_band": [2.0, 3.0]}}
    code, doc = _run(tmp_path, cfg)
    assert code == 0 and doc["pass"] is False


@pytest.mark.parametrize("cfg", [
    {"experiment": "nope"},
    {"experiment": "convergence", "model": "gbm", "f": "sin"},
    {"experiment": "convergence", "model": "gbm", "f": "sin", "n_ladder": [4, 8], "M": -5},
    {"experiment": "convergence", "model": "unknown", "f": "sin", "n_ladder": [4, 8]},
    {"experiment": "convergence", "model": "gbm", "f": "sin", "n_ladder": [0, 4]},
    [1, 2],
])
def test_invalid_configs_exit_nonzero(tmp_path, cfg, capsys):
    code, doc = _run(tmp_path, cfg)
    assert code != 0 and doc is None
    assert "error" in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


@pytest.mark.filterwarnings("ignore:reference bias")
def test_same_summary_for_any_thread_count(tmp_path):
    cfg = {"experiment": "convergence", "model": "bounded", "f": "sin", "n_ladder": [1, 2, 4], "M": 9000,
           "kappa_ref": 4, "seed": 17}
    _run(tmp_path, cfg, "--threads", "1", out="a")
    _run(tmp_path, cfg, "--threads", "3", out="b")
    _run(tmp_path, cfg, out="c")
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes() == (tmp_path / "c" / "summary.json").read_bytes()
    for f in ("results.csv", "plotdata.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    cfg = {"experiment": "convergence", "model": "bounded", "f": "sin", "n_ladder": [1, 2, 4], "M": 2000,
           "kappa_ref": 4, "seed": 1, "no_bias_check": True}
    _, a = _run(tmp_path, cfg, out="a")
    _, b = _run(tmp_path, cfg, "--seed", "2", out="b")
    assert b["config"]["seed"] == 2
    assert a["estimates"]["report"]["ladder"] != b["estimates"]["report"]["ladder"]


def test_console_script(tmp_path):
    exe = shutil.which("weak-euler")
    assert exe is not None
    out = subprocess.run([exe, "list"], capture_output=True, text=True, check=True).stdout
    assert out.count("\n") == 10
