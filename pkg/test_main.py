import json
import os

import pytest
from click.testing import CliRunner

from src.config import ChainConfig, Hyperparameters, RunConfig
from src.main import REPORT_NAME, SCORE_DIR, cli, run_pipeline
from src.manifest import FAILED_NAME, MANIFEST_NAME, RunManifest
from src.outputs import SUMMARY_FILES, TRUTH_FILES, load_summary, summary_digest

QUICK = ["--iters", "40", "--burnin", "20", "--cmax", "3", "--inner-advance", "1", "--warm-burn-in", "2",
         "--seed", "5"]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def simulated(runner, tmp_path):
    out = str(tmp_path / "sim")
    result = runner.invoke(cli, ["simulate", "--scenario", "sim1", "--seed", "3", "--out", out])
    assert result.exit_code == 0, result.output
    return out


def _infer(runner, simulated, out, *extra):
    args = ["infer", "--N", os.path.join(simulated, "N.csv"), "--n", os.path.join(simulated, "n.csv"),
            "--out", out, *QUICK, *extra]
    return runner.invoke(cli, args)


def test_simulate_writes_counts_truth_and_manifest(simulated):
    for name in ["N.csv", "n.csv", MANIFEST_NAME] + TRUTH_FILES:
        assert os.path.exists(os.path.join(simulated, name)), name


def test_infer_writes_every_summary_file(runner, simulated, tmp_path):
    out = str(tmp_path / "run")
    result = _infer(runner, simulated, out, "--truth-dir", simulated)
    assert result.exit_code == 0, result.output
    for name in SUMMARY_FILES + ["trace.npz", MANIFEST_NAME]:
        assert os.path.exists(os.path.join(out, name)), name
    assert not os.path.exists(os.path.join(out, FAILED_NAME))
    summary = load_summary(out)
    assert 1 <= summary.C_star <= 3
    assert summary.L_star.shape == (100, summary.C_star)
    with open(os.path.join(out, MANIFEST_NAME)) as f:
        manifest = json.load(f)
    assert manifest["seed"] == 5
    assert manifest["config"]["hyper"]["c_max"] == 3
    assert "trace.npz" in manifest["outputs"]


def test_reruns_are_byte_identical(runner, simulated, tmp_path):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    assert _infer(runner, simulated, first).exit_code == 0
    assert _infer(runner, simulated, second).exit_code == 0
    digest = summary_digest(first)
    assert set(digest) == set(SUMMARY_FILES)
    assert digest == summary_digest(second)


def test_rerun_from_manifest(runner, simulated, tmp_path):
    first, again = str(tmp_path / "a"), str(tmp_path / "again")
    assert _infer(runner, simulated, first).exit_code == 0
    result = runner.invoke(cli, ["infer", "--from-manifest", os.path.join(first, MANIFEST_NAME), "--out", again])
    assert result.exit_code == 0, result.output
    assert summary_digest(first) == summary_digest(again)


def test_fixed_C_and_heatmaps(runner, simulated, tmp_path):
    out = str(tmp_path / "fixed")
    result = _infer(runner, simulated, out, "--fixed-C", "2", "--heatmaps")
    assert result.exit_code == 0, result.output
    assert load_summary(out).C_star == 2
    assert os.path.exists(os.path.join(out, "L_star.svg"))


def test_summarize_saved_trace(runner, simulated, tmp_path):
    run, again = str(tmp_path / "run"), str(tmp_path / "resummarized")
    assert _infer(runner, simulated, run).exit_code == 0
    result = runner.invoke(cli, ["summarize", "--trace", os.path.join(run, "trace.npz"),
                                 "--N", os.path.join(simulated, "N.csv"), "--n", os.path.join(simulated, "n.csv"),
                                 "--out", again])
    assert result.exit_code == 0, result.output
    digest_run, digest_again = summary_digest(run), summary_digest(again)
    for name in ("L_star.csv", "Z_star.csv", "w_star.csv", "phi_p0.csv"):
        assert digest_run[name] == digest_again[name], name


def test_score_reports_recovery(runner, simulated, tmp_path):
    out = str(tmp_path / "run")
    assert _infer(runner, simulated, out).exit_code == 0
    result = runner.invoke(cli, ["score", "--summary-dir", out, "--truth-dir", simulated])
    assert result.exit_code == 0, result.output
    with open(os.path.join(out, SCORE_DIR, REPORT_NAME)) as f:
        report = json.load(f)
    assert report["C_true"] == 2
    assert '"C_star"' in result.output


def test_score_keeps_the_inference_manifest(runner, simulated, tmp_path):
    out = str(tmp_path / "run")
    assert _infer(runner, simulated, out).exit_code == 0
    assert runner.invoke(cli, ["score", "--summary-dir", out, "--truth-dir", simulated]).exit_code == 0
    assert RunManifest.load_config(os.path.join(out, MANIFEST_NAME)).subcommand == "infer"
    assert RunManifest.load_config(os.path.join(out, SCORE_DIR, MANIFEST_NAME)).subcommand == "score"

    again = str(tmp_path / "again")
    result = runner.invoke(cli, ["infer", "--from-manifest", os.path.join(out, MANIFEST_NAME), "--out", again])
    assert result.exit_code == 0, result.output
    assert summary_digest(out) == summary_digest(again)


def test_score_refuses_to_write_into_the_summary_dir(runner, simulated, tmp_path):
    out = str(tmp_path / "run")
    assert _infer(runner, simulated, out).exit_code == 0
    result = runner.invoke(cli, ["score", "--summary-dir", out, "--truth-dir", simulated, "--out", out])
    assert result.exit_code == 2
    assert RunManifest.load_config(os.path.join(out, MANIFEST_NAME)).subcommand == "infer"


def test_from_manifest_needs_an_inference_record(runner, simulated, tmp_path):
    out = str(tmp_path / "x")
    result = runner.invoke(cli, ["infer", "--from-manifest", os.path.join(simulated, MANIFEST_NAME), "--out", out])
    assert result.exit_code == 2
    assert "simulate" in result.output
    assert not os.path.exists(os.path.join(out, MANIFEST_NAME))


def test_per_sample_depth_prior(runner, simulated, tmp_path):
    out = str(tmp_path / "run")
    result = _infer(runner, simulated, out, "--a", "400,500,600,700", "--b", "2")
    assert result.exit_code == 0, result.output
    hyper = RunManifest.load_config(os.path.join(out, MANIFEST_NAME)).hyper
    assert hyper.a_phi == [400.0, 500.0, 600.0, 700.0]
    assert hyper.b_phi == 2.0


def test_per_sample_depth_prior_must_match_the_samples(runner, simulated, tmp_path):
    out = str(tmp_path / "bad")
    assert _infer(runner, simulated, out, "--a", "400,500").exit_code == 1
    assert os.path.exists(os.path.join(out, FAILED_NAME))


def test_unknown_flag_is_a_usage_error(runner, simulated, tmp_path):
    result = _infer(runner, simulated, str(tmp_path / "x"), "--bogus")
    assert result.exit_code == 2


def test_missing_inputs_are_a_usage_error(runner, tmp_path):
    result = runner.invoke(cli, ["infer", "--out", str(tmp_path / "x")])
    assert result.exit_code == 2


def test_invalid_hyperparameter_is_a_usage_error(runner, simulated, tmp_path):
    result = _infer(runner, simulated, str(tmp_path / "x"), "--r", "1.5")
    assert result.exit_code == 2


def test_failure_leaves_marker(runner, simulated, tmp_path):
    out = str(tmp_path / "bad")
    result = _infer(runner, simulated, out, "--fixed-C", "0")
    assert result.exit_code == 1
    with open(os.path.join(out, FAILED_NAME)) as f:
        assert "StructuralError" in f.read()


def test_run_pipeline_clears_stale_failure(tmp_path, simulated):
    out = str(tmp_path / "retry")
    RunManifest(out).mark_failed(RuntimeError("earlier"))
    config = RunConfig(subcommand="infer", out_dir=out, path_N=os.path.join(simulated, "N.csv"),
                       path_n=os.path.join(simulated, "n.csv"), fixed_C=1,
                       hyper=Hyperparameters(c_max=3),
                       chain=ChainConfig(n_iter=10, burn_in=5, log_every=0))
    assert run_pipeline(config) == 0
    assert not os.path.exists(os.path.join(out, FAILED_NAME))
    assert os.path.exists(os.path.join(out, MANIFEST_NAME))


def test_malformed_counts_fail_cleanly(tmp_path):
    bad_N = tmp_path / "N.csv"
    bad_N.write_text("locus,s1\nchr1,4\n")
    bad_n = tmp_path / "n.csv"
    bad_n.write_text("locus,s1\nchr1,9\n")
    out = str(tmp_path / "out")
    config = RunConfig(subcommand="infer", out_dir=out, path_N=str(bad_N), path_n=str(bad_n))
    assert run_pipeline(config) == 1
    with open(os.path.join(out, FAILED_NAME)) as f:
        assert "locus row 1" in f.read()
