import hashlib
import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from spdelab.core.errors import ConfigurationError
from spdelab.harness.cli import main
from spdelab.harness.config import ExperimentConfig, load_config, thread_budget
from spdelab.harness.records import CSV_COLUMNS, Metric, ResultRecord, inputs_hash, write_csv, write_record
from spdelab.harness import suites
from spdelab.harness.runner import run_experiment


def _config(**overrides) -> ExperimentConfig:
    data = {"name": "probe", "experiment": {"kind": "resolvent", "field": "sin:omega=1", "lam": 2.0}}
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


def _record() -> ResultRecord:
    return ResultRecord(experiment="probe", kind="resolvent", config_hash="c", inputs_hash="i", seed=0, threads=1)


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        _config(run={"seed": 1, "n_path": 10})
    with pytest.raises(ValidationError):
        _config(experiment={"kind": "resolvent", "lambda": 2.0})


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_lambda_must_be_positive(lam):
    with pytest.raises(ValidationError, match="lambda must be > 0"):
        _config(experiment={"kind": "schauder", "lam": lam})


def test_name_must_be_a_slug():
    with pytest.raises(ValidationError):
        _config(name="two words")


def test_config_hash_ignores_output_and_threads():
    base = _config()
    assert _config(output={"directory": "elsewhere"}).config_hash() == base.config_hash()
    assert _config(run={"threads": 4}).config_hash() == base.config_hash()
    assert _config(run={"seed": 9}).config_hash() != base.config_hash()


def test_inputs_hash_is_a_blob_hash():
    assert inputs_hash({}) == hashlib.sha1(b"blob 2\0{}").hexdigest()
    assert inputs_hash({"a": 1, "b": 2}) == inputs_hash({"b": 2, "a": 1})


def test_initial_state(default_model):
    assert not np.any(_config().initial_state(default_model))
    with pytest.raises(ConfigurationError):
        _config(experiment={"kind": "resolvent", "x0": [1.0, 2.0]}).initial_state(default_model)


@pytest.mark.parametrize(
    "metric,expected",
    [
        (Metric(name="m", value=1.05, target=1.0, tolerance=0.1, comparison="abs"), True),
        (Metric(name="m", value=1.2, target=1.0, tolerance=0.1, comparison="abs"), False),
        (Metric(name="m", value=0.5, target=0.4, tolerance=0.1, comparison="max"), True),
        (Metric(name="m", value=0.6, target=0.4, tolerance=0.1, comparison="max"), False),
        (Metric(name="m", value=0.0, target=1.0, comparison="min"), False),
        (Metric(name="m", value=math.nan, target=0.0, tolerance=1.0, comparison="max"), False),
        (Metric(name="m", value=3.0, comparison="info"), None),
    ],
)
def test_metric_verdicts(metric, expected):
    assert metric.passed is expected


def test_record_fails_on_any_checked_metric():
    record = _record()
    record.add_metric("spread", 1.5)
    assert record.passed
    record.add_metric("ratio", 2.0, target=1.0, comparison="max")
    assert not record.passed
    assert [m.name for m in record.failures] == ["ratio"]


def test_csv_layout(tmp_path):
    record = _record()
    record.add_metric("slope", -0.5, std_error=0.01, target=-0.5, tolerance=0.1, comparison="abs")
    raw = write_csv(record, tmp_path / "results.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0].decode() == ",".join(CSV_COLUMNS)
    assert lines[1] == b"probe,slope,-0.5,0.01,-0.5,0.1,abs,true"


def test_write_record_appends_to_the_ledger(tmp_path):
    record = _record()
    record.add_series("decay", [0.1, 0.01], [1.0, 10.0])
    out = tmp_path / "probe"
    write_record(record, out)
    write_record(record, out, formats=("json",))
    assert (out / "results.csv").exists()
    assert (out / "plotdata" / "decay.csv").exists()
    assert json.loads((out / "results.json").read_text())["experiment"] == "probe"
    ledger = (tmp_path / "records.jsonl").read_text().splitlines()
    assert len(ledger) == 2
    assert json.loads(ledger[0])["passed"] is True


def test_load_config(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.toml")
    path = tmp_path / "evolve.toml"
    path.write_text('name = "evolve"\n\n[experiment]\nkind = "evolve"\nt = 0.25\n')
    config = load_config(path)
    assert config.experiment.kind == "evolve"
    assert config.experiment.t == 0.25


def test_thread_budget_precedence(monkeypatch):
    monkeypatch.setenv("SPDELAB_THREADS", "3")
    assert thread_budget(5) == 5
    assert thread_budget(None, _config(run={"threads": 2})) == 3
    monkeypatch.delenv("SPDELAB_THREADS")
    assert thread_budget(None, _config(run={"threads": 2})) == 2
    monkeypatch.setenv("SPDELAB_THREADS", "many")
    with pytest.raises(ConfigurationError):
        thread_budget(None)


def test_run_experiment_writes_its_record(tmp_path):
    config = ExperimentConfig.model_validate(
        {
            "name": "evolve-const",
            "model": {"n": 2},
            "run": {"n_paths": 16, "seed": 1},
            "experiment": {"kind": "evolve", "field": "const:c=1", "source": 0.5, "t": 0.4, "n_nodes": 8},
        }
    )
    record = run_experiment(config, out_root=tmp_path)
    assert record.passed
    assert record.metrics[0].name == "v"
    assert record.metrics[0].value == pytest.approx(1.2)
    assert record.config_hash == config.config_hash()
    assert (tmp_path / "evolve-const" / "results.csv").exists()
    assert (tmp_path / "records.jsonl").exists()


def test_cli_rejects_an_invalid_config(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text('name = "bad"\n\n[experiment]\nkind = "resolvent"\nlam = 0.0\n')
    assert main(["run", "--config", str(path)]) == 2
    assert "lambda must be > 0" in capsys.readouterr().out


def test_cli_rejects_an_unknown_suite():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "nope"])
    assert exc.value.code == 2


def test_cli_catalog(capsys):
    assert main(["catalog", "--n", "4"]) == 0
    out = capsys.readouterr().out
    assert "holder:alpha=0.5" in out
    assert "radial-direction" in out


def test_decay_run_checks_the_estimator_against_the_closed_form(tmp_path):
    config = ExperimentConfig.model_validate(
        {
            "name": "decay-sine",
            "model": {"n": 2},
            "run": {"n_paths": 500, "seed": 1},
            "experiment": {"kind": "decay", "field": "sin:omega=1", "method": "smooth", "n_random": 0, "n_directions": 1, "n_times": 5, "tolerance": 0.1},
        }
    )
    record = run_experiment(config, out_root=tmp_path)
    names = [m.name for m in record.metrics]
    assert "decay_slope[i=1]" in names
    assert "oracle_decay_slope[i=1]" in names
    assert record.passed
    assert _config(experiment={"kind": "decay"}).experiment.method == "bel"


def _evolve_config(name: str, **experiment) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {
            "name": name,
            "model": {"n": 2},
            "run": {"n_paths": 16, "seed": 1},
            "experiment": {"kind": "evolve", "field": "const:c=1", "t": 0.4, "n_nodes": 8, **experiment},
        }
    )


def test_run_suite_turns_aborted_runs_into_failed_rows(tmp_path, monkeypatch):
    # the evolution Hölder check needs a Hölder field, so the second run aborts with a contract error
    configs = [_evolve_config("evolve-const", source=0.5), _evolve_config("evolve-rough", probe=True, probe_field="sin:omega=1")]
    monkeypatch.setitem(suites.SUITES, "tiny", lambda: configs)
    rows = suites.run_suite("tiny", seed=3, out_root=tmp_path)
    assert [row.experiment for row in rows] == ["evolve-const", "evolve-rough"]
    assert rows[0].passed and rows[0].error is None
    assert not rows[1].passed
    assert rows[1].error.startswith("ContractError")
    assert (tmp_path / "tiny" / "evolve-const" / "results.csv").exists()
    assert json.loads((tmp_path / "tiny" / "evolve-const" / "results.json").read_text())["seed"] == 3
    table = suites.format_table(rows)
    assert "PASS" in table and "FAIL" in table


def test_determinism_compares_thread_counts(tmp_path, monkeypatch):
    tiny = ExperimentConfig.model_validate(
        {
            "name": "bounds",
            "model": {"n": 2},
            "nonlinearity": {"name": "radial-direction", "target_M": 0.1},
            "run": {"n_paths": 40, "seed": 1, "block_size": 8},
            "experiment": {"kind": "bounds", "t_end": 0.2, "dt": 0.01, "orders": [1], "levels": 1},
        }
    )
    monkeypatch.setattr(suites, "bounds_config", lambda: tiny)
    record = suites.determinism_record(None, 2, tmp_path)
    assert record.passed
    assert record.metrics[0].name == "csv_identical"
    assert record.metrics[0].value == 1.0
    assert record.threads >= 2
    assert (tmp_path / "determinism" / "results.csv").exists()
    rows = suites.run_suite("determinism", threads=2)
    assert rows[0].experiment == "determinism" and rows[0].passed
