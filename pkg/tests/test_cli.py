import io
import json
import subprocess
import sys

import numpy as np
import pytest

from uace.bundle import write_bundle
from uace.cli import main
from uace.reports import load_report
from uace.synth import (
    four_color_scenario,
    gen_four_color,
    gen_random_bundle,
)


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def bundle_dir(tmp_path):
    bundle, _ = gen_four_color(four_color_scenario(seed=17, n=80))
    path = tmp_path / "bundle"
    write_bundle(bundle, path)
    return path


def test_validate_ok(bundle_dir):
    code, out, _ = run_cli(["validate", str(bundle_dir)])
    assert code == 0
    report = json.loads(out)
    assert report["valid"] is True
    assert report["dims"]["n_concepts"] == 4


def test_validate_missing_is_exit_1(tmp_path):
    code, _, err = run_cli(["validate", str(tmp_path / "nope")])
    assert code == 1
    assert "validation error" in err


def test_usage_error_is_exit_3(bundle_dir):
    code, _, err = run_cli(["explain", str(bundle_dir), "--method", "wrong"])
    assert code == 3
    code, _, err = run_cli(["frobnicate"])
    assert code == 3


def test_numerical_error_is_exit_2(monkeypatch, bundle_dir):
    from uace import cli
    from uace.errors import NumericalError

    def boom(args, stdout):
        raise NumericalError("synthetic failure")

    monkeypatch.setitem(cli._COMMANDS, "validate", boom)
    code, _, err = run_cli(["validate", str(bundle_dir)])
    assert code == 2
    assert "numerical error" in err


def test_stats_subcommand_writes_matrix_dir(bundle_dir, tmp_path):
    out_dir = tmp_path / "stats"
    code, out, _ = run_cli(
        ["stats", str(bundle_dir), "--out-dir", str(out_dir)]
    )
    assert code == 0
    assert (out_dir / "manifest.json").exists()
    for name in ("m", "s", "cos_alpha", "cos_theta", "epsilon"):
        assert (out_dir / f"{name}.f32").exists()
    payload = json.loads(out)
    assert len(payload["epsilon"]) == 4
    # dumped matrices carry the actual statistics at storage precision
    from uace.activations import compute_stats
    from uace.bundle import read_bundle

    stats = compute_stats(read_bundle(bundle_dir))
    stored = np.frombuffer((out_dir / "m.f32").read_bytes(), dtype="<f4")
    assert np.abs(stored.reshape(stats.m.shape) - stats.m).max() < 1e-6


@pytest.mark.parametrize("method", ["uace", "ols", "oracle", "ycbm", "ocbm", "tcav"])
def test_explain_every_method(bundle_dir, tmp_path, method):
    out_file = tmp_path / f"{method}.json"
    code, out, err = run_cli(
        ["explain", str(bundle_dir), "--method", method, "--seed", "3",
         "--out", str(out_file)]
    )
    assert code == 0, err
    report = load_report(out_file)
    assert report["method"] == method
    assert report["schema_version"] == 1
    assert {pl["label"] for pl in report["per_label"]} == {"class_a", "class_b"}
    # resolved configuration embedded for reproducibility
    assert "config" in report


def test_explain_deterministic_byte_identical(bundle_dir, tmp_path):
    args = [
        "explain", str(bundle_dir), "--method", "uace", "--tune",
        "--seed", "11", "--kappa", "0.02",
    ]
    code, out1, _ = run_cli(args + ["--out", str(tmp_path / "r1.json")])
    assert code == 0
    code, out2, _ = run_cli(args + ["--out", str(tmp_path / "r2.json")])
    assert code == 0
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert out1 == out2


def test_tune_requires_seed(bundle_dir, monkeypatch):
    monkeypatch.delenv("UACE_SEED", raising=False)
    code, _, err = run_cli(["explain", str(bundle_dir), "--method", "uace", "--tune"])
    assert code == 3
    assert "seed" in err


def test_seed_env_fallback(bundle_dir, monkeypatch, tmp_path):
    monkeypatch.setenv("UACE_SEED", "21")
    code, _, _ = run_cli(
        ["explain", str(bundle_dir), "--method", "uace", "--tune",
         "--out", str(tmp_path / "env.json")]
    )
    assert code == 0
    report = load_report(tmp_path / "env.json")
    assert report["config"]["seed"] == 21


def test_compare_report_with_itself_is_zero(bundle_dir, tmp_path):
    report = tmp_path / "r.json"
    run_cli(["explain", str(bundle_dir), "--method", "ols", "--out", str(report)])
    code, out, _ = run_cli(
        ["compare", str(report), str(report), "--metric", "kendall"]
    )
    assert code == 0
    assert json.loads(out)["mean"] == 0.0
    for metric in ("topkdiff", "drift", "jaccard"):
        code, out, _ = run_cli(
            ["compare", str(report), str(report), "--metric", metric, "--k", "3"]
        )
        assert code == 0
        value = json.loads(out)["mean"]
        assert value == (1.0 if metric == "jaccard" else 0.0)


def test_compare_different_methods(bundle_dir, tmp_path):
    r1, r2 = tmp_path / "a.json", tmp_path / "b.json"
    run_cli(["explain", str(bundle_dir), "--method", "ols", "--out", str(r1)])
    run_cli(["explain", str(bundle_dir), "--method", "uace", "--seed", "1",
             "--out", str(r2)])
    code, out, _ = run_cli(
        ["compare", str(r1), str(r2), "--metric", "topkdiff", "--k", "4"]
    )
    assert code == 0
    payload = json.loads(out)
    assert 0.0 <= payload["mean"] <= 1.0
    assert set(payload["per_label"]) == {"class_a", "class_b"}


def test_synth_writes_bundle_and_validates(tmp_path):
    out_bundle = tmp_path / "synth_bundle"
    code, out, err = run_cli(
       ["synth", "four_color", "--seed", "5", "--n", "60",
        "--out-bundle", str(out_bundle)]
    )
    assert code == 0, err
    code, _, _ = run_cli(["validate", str(out_bundle)])
    assert code == 0


def test_synth_trials_reports_analytic_probability(tmp_path):
    code, out, err = run_cli(
        ["synth", "corollary", "--k", "5", "--n", "64", "--dim", "32",
         "--trials", "60", "--seed", "9", "--estimators", "ols"]
    )
    assert code == 0, err
    payload = json.loads(out)
    assert "analytic_top1" in payload
    freq = payload["trials"]["estimators"]["ols"]["top1_freq"]
    assert abs(freq - payload["analytic_top1"]) < 0.2  # 60-trial noise


def test_synth_requires_seed(monkeypatch):
    monkeypatch.delenv("UACE_SEED", raising=False)
    code, _, err = run_cli(["synth", "four_color"])
    assert code == 3


def test_uncertainty_subcommand(bundle_dir):
    code, out, _ = run_cli(["uncertainty", str(bundle_dir), "--method", "prop1"])
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 4
    assert {r["concept"] for r in rows} == {"red", "green", "blue", "white"}
    assert sorted(r["rank"] for r in rows) == [0, 1, 2, 3]

    code, out, _ = run_cli(
        ["uncertainty", str(bundle_dir), "--method", "mc", "--samples", "4",
         "--seed", "2"]
    )
    assert code == 0

    code, out, _ = run_cli(
        ["uncertainty", str(bundle_dir), "--method", "df", "--df-steps", "20",
         "--seed", "2"]
    )
    assert code == 0
    assert all(r["epsilon"] > 0 for r in json.loads(out)["rows"])


def test_config_file_supplies_defaults(bundle_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 33, "kappa": 0.1}))
    code, _, _ = run_cli(
        ["explain", str(bundle_dir), "--method", "uace", "--tune",
         "--config", str(cfg), "--out", str(tmp_path / "r.json")]
    )
    assert code == 0
    report = load_report(tmp_path / "r.json")
    assert report["config"]["seed"] == 33


def test_module_invocation_smoke(bundle_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "uace", "validate", str(bundle_dir)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["valid"] is True
