import json

import pytest
import yaml
from pydantic import ValidationError

from percwalk.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main
from percwalk.config import ExperimentConfig, SeedRange, config_schema, load_config

SMALL = {
    "experiment": "dirichlet-lln",
    "domain": {"kind": "full", "d": 2},
    "law": {"kind": "uniform", "a": 1.0, "b": 3.0},
    "seeds": "0..1",
    "scales": [8, 16],
}


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_invalid_eps_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write(tmp_path, {**SMALL, "eps": 1.5, "output": str(out)})
    assert main(["dirichlet-lln", "--config", str(cfg)]) == EXIT_USAGE
    assert "eps" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, {**SMALL, "colour": "blue"})
    assert main(["dirichlet-lln", "--config", str(cfg)]) == EXIT_USAGE
    assert "colour" in capsys.readouterr().err


def test_bad_law_rejected():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({**SMALL, "law": {"kind": "uniform", "a": 3.0, "b": 1.0}})


def test_missing_config_and_bad_args(tmp_path):
    assert main(["dirichlet-lln"]) == EXIT_USAGE
    assert main(["no-such-experiment"]) == EXIT_USAGE
    assert main(["dirichlet-lln", "--config", str(tmp_path / "missing.yaml")]) == EXIT_USAGE
    cfg = _write(tmp_path, SMALL)
    assert main(["dirichlet-lln", "--config", str(cfg), "--workers", "0"]) == EXIT_USAGE
    assert main(["mixing-trend", "--config", str(cfg)]) == EXIT_USAGE


def test_schema(capsys):
    assert main(["schema"]) == EXIT_PASS
    schema = json.loads(capsys.readouterr().out)
    assert "eps" in schema["properties"]
    assert config_schema() == schema


def test_seed_range():
    assert SeedRange.parse("3..5").values() == [3, 4, 5]
    assert SeedRange.parse("7").values() == [7]
    with pytest.raises(ValidationError):
        SeedRange.parse("5..3")


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    cfg = _write(tmp_path, SMALL)
    code = main(["dirichlet-lln", "--config", str(cfg), "--out", str(out), "--seeds", "0..2"])
    assert code in (EXIT_PASS, EXIT_FAIL)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["criterion"] == "AC9"
    assert summary["config_hash"] == load_config(out.parent / "cfg.yaml").model_copy(
        update={"seeds": SeedRange.parse("0..2"), "output": str(out)}).config_hash()
    assert json.loads((out / "config.json").read_text())["seeds"] == {"start": 0, "stop": 2}
    assert (out / "metadata.json").exists()
    assert list(out.glob("*.csv"))
    assert capsys.readouterr().out.startswith("dirichlet-lln [AC9]")


def test_config_for_other_experiment_is_refused(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "experiment": "holes-tail"})
    assert main(["dirichlet-lln", "--config", str(cfg)]) == EXIT_USAGE


def test_runner_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"experiment": "mixing-trend", "domain": {"kind": "box", "d": 2, "n": 2},
                            "law": {"kind": "constant", "w": 1.0}, "scales": [2, 3]})
    assert main(["mixing-trend", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "c_hat" in capsys.readouterr().err
