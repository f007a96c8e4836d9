"""
Tests for experiments, sweeps, model files, boundary grids and the command line
"""

import csv
import json

import numpy as np
import pytest

import app
from src.bench import (
    ExperimentConfig,
    boundary_agreement,
    boundary_grid,
    format_table,
    run_experiment,
    sweep,
    table_preset,
)
from src.circuit import CircuitSpec, ModelParams, init_params, param_count
from src.errors import DatasetFormatError, InvalidArgumentError, ModelFormatError
from src.model_io import load_model, model_metadata, save_model
from src.objective import Classifier, ObjectiveConfig
from src.optimize import LbfgsConfig
from src.problems import generate_dataset, save_dataset


def tiny_config(tmp_path, **overrides) -> ExperimentConfig:
    settings = dict(problem="circle", layers=(1,), restarts=1, train_size=20, test_size=50,
                    lbfgs=LbfgsConfig(max_iterations=10), output_dir=str(tmp_path))
    settings.update(overrides)
    return ExperimentConfig(**settings)


def trained_model(seed: int = 3) -> Classifier:
    spec = CircuitSpec(qubits=1, layers=2, data_dim=2)
    return Classifier(spec=spec, params=init_params(spec, seed, alpha_shape=(2,)), num_classes=2,
                      objective=ObjectiveConfig(), seed=seed)


# ============ Configs ============

def test_experiment_config_validation(tmp_path):
    with pytest.raises(InvalidArgumentError):
        tiny_config(tmp_path, problem="moons")
    with pytest.raises(InvalidArgumentError):
        tiny_config(tmp_path, layers=(0,))
    with pytest.raises(InvalidArgumentError):
        tiny_config(tmp_path, entangled=True)
    with pytest.raises(InvalidArgumentError):
        tiny_config(tmp_path, minimizer="adam")
    assert tiny_config(tmp_path, cost="f").cost == "fidelity"
    assert tiny_config(tmp_path, layers=4).layers == (4,)


def test_config_from_dict_and_merge(tmp_path):
    config = ExperimentConfig.from_dict({"problem": "squares", "layers": [2, 3], "lbfgs": {"memory": 5}})
    assert config.layers == (2, 3)
    assert config.lbfgs.memory == 5
    assert [c.layers for c in config.cells()] == [(2,), (3,)]

    merged = config.merged({"restarts": 2, "qubits": None})
    assert merged.restarts == 2
    assert merged.qubits == 1
    assert merged.lbfgs.memory == 5

    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_dict({"problem": "circle", "learning_rate": 0.1})


def test_cell_name():
    config = ExperimentConfig(problem="annulus", qubits=2, layers=(3,), entangled=True, cost="f")
    assert config.cell_name == "annulus_q2_l3_ent_f"


def test_table_preset_covers_eight_columns(tmp_path):
    configs = table_preset(tiny_config(tmp_path, layers=(1, 2)))
    assert len(configs) == 8
    assert [(c.cost, c.qubits, c.entangled) for c in configs][0] == ("fidelity", 1, False)
    assert sum(c.entangled for c in configs) == 3
    assert all(c.layers == (1, 2) for c in configs)


# ============ Experiments ============

def test_run_experiment_writes_model_and_report(tmp_path):
    config = tiny_config(tmp_path)
    report = run_experiment(config)
    cell_dir = tmp_path / config.cell_name
    assert (cell_dir / "model.json").exists()
    saved = json.loads((cell_dir / "report.json").read_text())
    assert saved["test_success"] == report.test_success
    assert 0.0 <= report.test_success <= 1.0
    assert report.core_params == 5
    assert report.core_params + report.alpha_params == param_count(CircuitSpec(1, 1, 2), "wf", 2)
    assert len(report.restart_costs) == 1
    assert sum(map(sum, report.confusion)) == 50
    assert model_metadata(cell_dir / "model.json") == {"problem": "circle", "data_seed": 0, "test_size": 50}


def test_report_keeps_lbfgs_cost_trace(tmp_path):
    report = run_experiment(tiny_config(tmp_path))
    trace = report.cost_trace
    assert len(trace) == report.iterations + 1
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert trace[-1] == report.best_cost
    saved = json.loads((tmp_path / "circle_q1_l1_noent_wf" / "report.json").read_text())
    assert saved["cost_trace"] == trace


def test_run_experiment_is_deterministic(tmp_path):
    first = run_experiment(tiny_config(tmp_path / "a", restarts=2))
    second = run_experiment(tiny_config(tmp_path / "b", restarts=2))
    assert first.best_cost == second.best_cost
    assert first.restart_costs == second.restart_costs
    a = load_model(first.model_path)
    b = load_model(second.model_path)
    assert np.array_equal(a.params.theta, b.params.theta)


def test_run_experiment_with_stored_datasets(tmp_path):
    train = save_dataset(generate_dataset("circle", 20, seed=0), tmp_path / "train.csv")
    test = save_dataset(generate_dataset("circle", 30, seed=1), tmp_path / "test.csv")
    report = run_experiment(tiny_config(tmp_path / "out", train_file=str(train), test_file=str(test)))
    assert sum(map(sum, report.confusion)) == 30


def test_corrupted_test_file_stops_before_training(tmp_path):
    train = save_dataset(generate_dataset("circle", 20, seed=0), tmp_path / "train.csv")
    test = tmp_path / "test.csv"
    test.write_text("x1,x2,class\n0.1,0.2,7\n")
    config = tiny_config(tmp_path / "out", train_file=str(train), test_file=str(test))
    with pytest.raises(DatasetFormatError):
        run_experiment(config)
    assert not (tmp_path / "out" / config.cell_name / "model.json").exists()


def test_weighted_run_on_two_qubits(tmp_path):
    report = run_experiment(tiny_config(tmp_path, qubits=2, measured_qubits=(0, 1)))
    assert report.alpha_params == 4
    assert report.core_params == 10


# ============ Sweeps ============

def test_sweep_writes_csv_and_table(tmp_path):
    rows = sweep([tiny_config(tmp_path, layers=(2, 1))])
    assert [r["layers"] for r in rows] == [1, 2]
    assert all(r["error"] == "" for r in rows)
    with open(tmp_path / "sweep.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == 2
    table = (tmp_path / "sweep.md").read_text()
    assert "### circle" in table
    assert "| 1 |" in table and "| 2 |" in table


def test_sweep_records_failed_cells(tmp_path):
    rows = sweep([tiny_config(tmp_path, train_file=str(tmp_path / "missing.csv"))])
    assert len(rows) == 1
    assert rows[0]["error"]
    assert "--" in format_table(rows)


def test_format_table_orders_columns():
    rows = [
        {"problem": "circle", "cost": "wf", "qubits": 1, "entangled": False, "layers": 1, "test_success": 0.9, "error": ""},
        {"problem": "circle", "cost": "f", "qubits": 2, "entangled": True, "layers": 1, "test_success": 0.8, "error": ""},
    ]
    header = next(line for line in format_table(rows).splitlines() if line.startswith("| Layers"))
    assert header.index("χ²_f 2q Ent.") < header.index("χ²_wf 1q No Ent.")
    assert "| 1 | 0.80 | 0.90 |" in format_table(rows)


# ============ Model Files ============

def test_model_round_trip_predicts_identically(tmp_path):
    model = trained_model()
    path = save_model(model, tmp_path / "model.json")
    loaded = load_model(path)
    X = np.random.default_rng(0).uniform(-1, 1, size=(100, 2))
    assert np.array_equal(loaded.scores(X), model.scores(X))
    assert np.array_equal(loaded.predict(X), model.predict(X))
    assert loaded.seed == 3


def test_corrupted_model_file(tmp_path):
    path = save_model(trained_model(), tmp_path / "model.json")
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError) as excinfo:
        load_model(path)
    assert excinfo.value.kind == "parse-error"

    data = json.loads(text)
    data["theta"] = data["theta"][:1] + [[[[0.0, 0.0]]]]
    path.write_text(json.dumps(data))
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_model_version_mismatch(tmp_path):
    path = save_model(trained_model(), tmp_path / "model.json")
    data = json.loads(path.read_text())
    data["format_version"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(ModelFormatError) as excinfo:
        load_model(path)
    assert excinfo.value.kind == "version-mismatch"


# ============ Boundary Grids ============

def test_boundary_grid_layout(tmp_path):
    grid = boundary_grid(trained_model(), 2, out_path=tmp_path / "grid.csv")
    assert grid.shape == (4, 4)
    assert grid[:, :2].tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]
    with open(tmp_path / "grid.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x1", "x2", "class", "fidelity"]
    assert len(rows) == 5


def test_boundary_grid_of_constant_model():
    spec = CircuitSpec(qubits=1, layers=1, data_dim=2)
    params = ModelParams(theta=np.full(spec.shape, 0.4), weights=np.zeros(spec.shape))
    model = Classifier(spec=spec, params=params, num_classes=2, objective=ObjectiveConfig(cost_kind="f"))
    grid = boundary_grid(model, 10)
    assert len(set(grid[:, 2].tolist())) == 1
    assert 0.0 <= boundary_agreement(grid, "circle") <= 1.0


def test_boundary_grid_writes_raw_fidelity_of_weighted_model():
    spec = CircuitSpec(qubits=1, layers=2, data_dim=2)
    params = init_params(spec, 5, alpha_shape=(2,))
    params.alpha = np.array([4.0, 3.0])
    model = Classifier(spec=spec, params=params, num_classes=2, objective=ObjectiveConfig(cost_kind="wf"))
    grid = boundary_grid(model, 6)
    X = grid[:, :2]
    assert model.scores(X).max() > 1.0
    assert np.all((grid[:, 3] >= 0.5 - 1e-12) & (grid[:, 3] <= 1.0 + 1e-12))
    assert np.allclose(grid[:, 3], model.fidelities(X).max(axis=1))
    assert np.array_equal(grid[:, 2], model.predict(X))


def test_boundary_grid_needs_slice_for_higher_dimensions():
    spec = CircuitSpec(qubits=1, layers=1, data_dim=3)
    model = Classifier(spec=spec, params=init_params(spec, 0), num_classes=2,
                       objective=ObjectiveConfig(cost_kind="f"))
    with pytest.raises(InvalidArgumentError):
        boundary_grid(model, 5)
    assert boundary_grid(model, 5, slice_values=[0.2]).shape == (25, 4)
    with pytest.raises(InvalidArgumentError):
        boundary_grid(model, 1, slice_values=[0.2])


# ============ Command Line ============

def test_cli_generate(tmp_path, capsys):
    assert app.main(["generate", "--problem", "squares", "--n", "12", "--seed", "4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "squares_n12_s4.csv").exists()
    assert "[OK]" in capsys.readouterr().out


def test_cli_train_then_evaluate(tmp_path, capsys):
    out = tmp_path / "runs"
    assert app.main(["train", "--problem", "circle", "--layers", "1", "--restarts", "1",
                     "--train-size", "20", "--test-size", "20", "--out", str(out), "--quiet"]) == 0
    model = out / "circle_q1_l1_noent_wf" / "model.json"
    assert model.exists()

    result_path = tmp_path / "eval.json"
    assert app.main(["evaluate", "--model", str(model), "--n", "40", "--out", str(result_path)]) == 0
    result = json.loads(result_path.read_text())
    assert result["problem"] == "circle"
    assert result["n"] == 40
    assert 0.0 <= result["success"] <= 1.0


def test_cli_reports_errors_as_json(tmp_path, capsys):
    assert app.main(["evaluate", "--model", str(tmp_path / "missing.json")]) == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "io-error"

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert app.main(["boundary", "--model", str(bad)]) == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "parse-error"
    assert payload["path"] == str(bad)


def test_cli_needs_a_problem(tmp_path, capsys):
    assert app.main(["train", "--layers", "1", "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "invalid-argument"


def test_cli_evaluate_reproduces_report_test_success(tmp_path, capsys):
    out = tmp_path / "runs"
    assert app.main(["train", "--problem", "annulus", "--layers", "1", "--restarts", "1", "--seed", "7",
                     "--train-size", "30", "--test-size", "60", "--out", str(out), "--quiet"]) == 0
    cell = out / "annulus_q1_l1_noent_wf"
    report = json.loads((cell / "report.json").read_text())

    result_path = tmp_path / "eval.json"
    assert app.main(["evaluate", "--model", str(cell / "model.json"), "--out", str(result_path)]) == 0
    result = json.loads(result_path.read_text())
    assert result["n"] == 60
    assert result["seed"] == 7 + 1_000_003
    assert result["success"] == report["test_success"]
