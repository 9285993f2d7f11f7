import csv
import json

import pytest

from varchen import bounds, cli
from varchen.cli import (EPOCH_COLUMNS, TRACE_COLUMNS, SpecError, help_config, main,
                         parse_spec_text)

SPEC = """\
# three methods on the synthetic logistic problem
[experiment]
problem = logistic
l2 = 0.01
n_samples = 60
dim = 5
seeds = 3
timing = off

[run varchen]
alpha = 0.5
epochs = 2

[run sdlbfgs-vr]
alpha = 0.5
epochs = 2

[run svrg]
alpha = 1.0
epochs = 2
"""


@pytest.fixture
def spec(tmp_path):
    p = tmp_path / "spec.txt"
    p.write_text(SPEC)
    return p


def _run(tmp_path, spec, *flags, out="out"):
    return main(["--out", str(tmp_path / out), *flags, "run", str(spec)])


def test_fan_out_and_headers(tmp_path, spec):
    assert _run(tmp_path, spec) == 0
    out = tmp_path / "out"
    for name in ("varchen", "sdlbfgs-vr", "svrg"):
        with open(out / f"{name}_seed3_trace.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == TRACE_COLUMNS
        assert len(rows) == 1 + 2 * 6
        with open(out / f"{name}_seed3_epochs.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == EPOCH_COLUMNS
        assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert len(list(out.glob("*_trace.csv"))) == 3
    assert len(list(out.glob("*_epochs.csv"))) == 3


def test_golden_headers():
    assert ",".join(TRACE_COLUMNS) == "k,epoch,minibatch_loss,grad_norm,alpha,lambda_k,Lambda_k,flush,wall_ms"
    assert ",".join(EPOCH_COLUMNS) == "epoch,full_loss,full_grad_norm,val_metric"


def test_manifest_records_flags_and_runs(tmp_path, spec):
    assert _run(tmp_path, spec, "--seed", "9", "--jobs", "2") == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    flags = manifest["cli_flags"]
    assert flags["seed"] == 9 and flags["jobs"] == 2 and flags["out"] == str(tmp_path / "out")
    assert flags["command"] == "run" and flags["spec"] == str(spec)
    assert manifest["schema_version"] == 1
    assert manifest["git_describe"]
    runs = manifest["runs"]
    assert [r["run"] for r in runs] == ["varchen", "sdlbfgs-vr", "svrg"]
    assert all(r["seed"] == 9 and r["config"]["seed"] == 9 for r in runs)
    assert all(len(r["config_hash"]) == 64 for r in runs)
    assert len({r["config_hash"] for r in runs}) == 3
    assert (tmp_path / "out" / "varchen_seed9_trace.csv").exists()


def test_timing_recorded_when_on(tmp_path, spec):
    spec.write_text(SPEC.replace("timing = off", "timing = on"))
    assert _run(tmp_path, spec) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["runs"][0]["timing"]["seconds"] >= 0
    with open(tmp_path / "out" / "varchen_seed3_trace.csv") as fh:
        walls = [float(r["wall_ms"]) for r in csv.DictReader(fh)]
    assert walls[-1] > 0


def test_parallel_matches_serial(tmp_path, spec):
    assert _run(tmp_path, spec, out="a") == 0
    assert _run(tmp_path, spec, "--jobs", "3", out="b") == 0
    for p in (tmp_path / "a").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_env_var_output_dir(tmp_path, spec, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env_out"))
    assert main(["run", str(spec)]) == 0
    assert (tmp_path / "env_out" / "summary.csv").exists()


def test_summary_report(tmp_path, spec):
    assert _run(tmp_path, spec) == 0
    with open(tmp_path / "out" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["varchen", "sdlbfgs-vr", "svrg"]
    assert all(r["status"] == "ok" for r in rows)


def test_malformed_libsvm_exit_2(tmp_path, capsys):
    (tmp_path / "d.libsvm").write_text("1 1:0.5\n-1 3:1 2:4\n")
    spec = tmp_path / "s.txt"
    spec.write_text("[experiment]\ndataset = d.libsvm\n[run varchen]\n")
    assert _run(tmp_path, spec) == 2
    assert "d.libsvm:2:" in capsys.readouterr().err


def test_dataset_from_file(tmp_path):
    lines = [f"{1 if i % 2 else -1} 1:{i / 10} 2:{1 - i / 20}" for i in range(20)]
    (tmp_path / "d.libsvm").write_text("\n".join(lines) + "\n")
    spec = tmp_path / "s.txt"
    spec.write_text("[experiment]\ndataset = d.libsvm\nvalidation = d.libsvm\nl2 = 0.1\n"
                    "[run svrg]\nalpha = 1\nepochs = 2\n")
    assert _run(tmp_path, spec) == 0
    with open(tmp_path / "out" / "svrg_seed0_epochs.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(0.0 <= float(r["val_metric"]) <= 1.0 for r in rows)


def test_divergence_exit_3(tmp_path, capsys):
    spec = tmp_path / "s.txt"
    spec.write_text("[experiment]\nproblem = synthetic\ncond = 1e4\n[run sgd]\nalpha = 1\nepochs = 100\n")
    assert _run(tmp_path, spec) == 3
    assert "diverged" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["runs"][0]["status"] == "diverged"
    assert manifest["runs"][0]["diagnostic"]


def test_io_errors_exit_4(tmp_path, spec):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--out", str(blocker / "sub"), "run", str(spec)]) == 4
    assert main(["--out", str(tmp_path / "o"), "run", str(tmp_path / "missing.txt")]) == 4


@pytest.mark.parametrize("text,line,col,fragment", [
    ("[experiment]\nproblem logistic\n", 2, 1, "key = value"),
    ("[experiment]\n  colour = red\n", 2, 3, "unknown key"),
    ("[experiment]\nl2 = lots\n", 2, 6, "bad value"),
    ("[experiment]\nl2 = 1\nl2 = 2\n", 3, 1, "duplicate key"),
    ("l2 = 1\n", 1, 1, "outside"),
    ("[nonsense]\n", 1, 1, "unknown section"),
    ("[experiment\n", 1, 1, "unterminated"),
    ("[experiment]\nproblem = svm\n[run svrg]\n", 2, 11, "problem must be"),
    ("[run varchen]\nmemory = 0\n", 1, 1, "memory must be"),
    ("[run x]\n", 1, 1, "method must be"),
    ("[run a]\nmethod = svrg\n[run a]\n", 3, 1, "duplicate run"),
    ("[experiment]\n", 1, 1, "no [run"),
])
def test_spec_errors(text, line, col, fragment):
    with pytest.raises(SpecError) as info:
        parse_spec_text(text, "s.txt")
    assert (info.value.lineno, info.value.col) == (line, col), str(info.value)
    assert fragment in str(info.value)


def test_spec_parse_error_exit_2(tmp_path, capsys):
    spec = tmp_path / "s.txt"
    spec.write_text("[experiment]\nseeds = 1, two\n[run svrg]\n")
    assert _run(tmp_path, spec) == 2
    assert "s.txt:2:9" in capsys.readouterr().err


def test_spec_values_typed():
    spec = parse_spec_text("[experiment]\nseeds = 1 2, 3\ntiming = off\n"
                           "[run fast]\nmethod = svrg\nc = none\nlipschitz = 2.5\nepochs = 4\n")
    assert spec.experiment["seeds"] == [1, 2, 3]
    assert spec.experiment["timing"] is False
    cfg = spec.runs[0].config
    assert (cfg.method, cfg.c, cfg.lipschitz, cfg.epochs) == ("svrg", None, 2.5, 4)


def test_help_config_lists_every_key(capsys):
    assert main(["--help-config"]) == 0
    text = capsys.readouterr().out
    for key in list(cli.EXPERIMENT_KEYS) + list(cli.RUN_KEYS):
        assert f"  {key} " in text
    assert "default=0.25" in text
    assert help_config() in text


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2


def test_verify_passes():
    assert main(["verify"]) == 0


def test_verify_catches_perturbed_bound(monkeypatch, capsys):
    real = bounds.theorem1_bounds

    def perturbed(*args, **kwargs):
        b = real(*args, **kwargs)
        return bounds.SpectrumBounds(b.lambda_lo, 1.0 / (1.0 / b.lambda_hi + 1.0), b.per_step_trace)

    monkeypatch.setattr(bounds, "theorem1_bounds", perturbed)
    assert main(["verify", "--quick"]) == 1
    out = capsys.readouterr().out
    assert "FAIL containment" in out
    assert "PASS equivalence" in out
