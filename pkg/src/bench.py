"""
Benchmark module for the re-uploading classifier

Config-driven experiments: generate (or load) train and test sets, train a
classifier with restarts, score it, and write the model and a JSON report.
Sweeps run many cells, optionally in a process pool, and write a CSV plus a
Markdown success-rate table per problem. Decision boundaries are exported
as CSV grids for external plotting.

Usage:
    from src.bench import ExperimentConfig, run_experiment

    report = run_experiment(ExperimentConfig(problem="circle", layers=(4,)))
    print(report.test_success)
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from src import config as defaults
from src.circuit import COST_FIDELITY, COST_WEIGHTED, CircuitSpec, core_param_count, normalize_cost_kind
from src.errors import InvalidArgumentError, ReuploadError
from src.model_io import load_model, save_model
from src.objective import Classifier, ObjectiveConfig, confusion_matrix, success_rate
from src.optimize import LbfgsConfig, SgdConfig
from src.problems import class_balance, generate_dataset, get_problem, label_points, load_dataset
from src.trainer import MINIMIZERS, train_classifier

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "problem", "qubits", "layers", "entangled", "cost", "minimizer", "restarts",
    "core_params", "alpha_params", "best_cost", "train_success", "test_success",
    "converged", "wall_seconds", "error",
]

# (cost, qubits, entangled) columns of the benchmark tables, left to right
TABLE_COLUMNS: List[Tuple[str, int, bool]] = [
    (COST_FIDELITY, 1, False),
    (COST_FIDELITY, 2, False),
    (COST_FIDELITY, 2, True),
    (COST_WEIGHTED, 1, False),
    (COST_WEIGHTED, 2, False),
    (COST_WEIGHTED, 2, True),
    (COST_WEIGHTED, 4, False),
    (COST_WEIGHTED, 4, True),
]

COST_SHORT = {COST_FIDELITY: "f", COST_WEIGHTED: "wf"}


@dataclass
class ExperimentConfig:
    """One experiment, or a grid over `layers`."""
    problem: str
    qubits: int = 1
    layers: Tuple[int, ...] = defaults.DEFAULT_LAYERS
    entangled: bool = False
    cost: str = COST_WEIGHTED
    minimizer: str = "lbfgs"
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    sgd: SgdConfig = field(default_factory=SgdConfig)
    restarts: int = defaults.RESTARTS
    data_seed: int = defaults.DATA_SEED
    init_seed: int = 0
    train_size: Optional[int] = None
    test_size: int = defaults.TEST_SIZE
    measured_qubits: Optional[Tuple[int, ...]] = None
    thresholds: Optional[Tuple[float, ...]] = None
    output_dir: str = defaults.OUTPUT_DIR
    train_file: Optional[str] = None
    test_file: Optional[str] = None

    def __post_init__(self):
        get_problem(self.problem)
        if isinstance(self.layers, int):
            self.layers = (self.layers,)
        self.layers = tuple(int(n) for n in self.layers)
        if not self.layers or any(n < 1 for n in self.layers):
            raise InvalidArgumentError(f"layers must be >= 1, got {list(self.layers)}")
        self.cost = normalize_cost_kind(self.cost)
        if self.minimizer not in MINIMIZERS:
            raise InvalidArgumentError(f"unknown minimizer '{self.minimizer}' (use one of {', '.join(MINIMIZERS)})")
        if self.restarts < 1:
            raise InvalidArgumentError(f"restarts must be >= 1, got {self.restarts}")
        if self.entangled and self.qubits < 2:
            raise InvalidArgumentError("entanglement needs at least 2 qubits")
        if isinstance(self.lbfgs, dict):
            self.lbfgs = LbfgsConfig(**self.lbfgs)
        if isinstance(self.sgd, dict):
            self.sgd = SgdConfig(**self.sgd)
        if self.measured_qubits is not None:
            self.measured_qubits = tuple(int(q) for q in self.measured_qubits)
        if self.thresholds is not None:
            self.thresholds = tuple(float(t) for t in self.thresholds)

    @property
    def definition(self):
        return get_problem(self.problem)

    @property
    def cell_name(self) -> str:
        layers = "-".join(str(n) for n in self.layers)
        ent = "ent" if self.entangled else "noent"
        return f"{self.problem}_q{self.qubits}_l{layers}_{ent}_{COST_SHORT[self.cost]}"

    def cells(self) -> List["ExperimentConfig"]:
        """One single-layer-count config per entry of `layers`."""
        return [replace(self, layers=(n,)) for n in self.layers]

    def objective(self) -> ObjectiveConfig:
        return ObjectiveConfig(cost_kind=self.cost, measured_qubits=self.measured_qubits,
                               thresholds=self.thresholds)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["layers"] = list(self.layers)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def merged(self, overrides: Dict) -> "ExperimentConfig":
        """Copy with every non-None override applied (command-line flags win over the file)."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(data)


def load_config(path) -> Dict:
    """Raw config document; a list, or {"experiments": [...]}, describes several experiments."""
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"invalid config JSON: {e}", path=path) from None


@dataclass
class TrainReport:
    config: Dict
    problem: str
    qubits: int
    layers: int
    entangled: bool
    cost: str
    core_params: int
    alpha_params: int
    restart_costs: List[float]
    cost_trace: List[float]
    best_cost: float
    cost_per_point: float
    train_success: float
    test_success: float
    converged: bool
    message: str
    iterations: int
    best_seed: Optional[int]
    train_balance: List[float]
    test_balance: List[float]
    confusion: List[List[int]]
    wall_seconds: float
    model_path: str
    report_path: str
    created_at: str = ""

    def to_dict(self) -> Dict:
        return asdict(self)

    def row(self) -> Dict:
        return {
            "problem": self.problem,
            "qubits": self.qubits,
            "layers": self.layers,
            "entangled": self.entangled,
            "cost": COST_SHORT[self.cost],
            "minimizer": self.config["minimizer"],
            "restarts": self.config["restarts"],
            "core_params": self.core_params,
            "alpha_params": self.alpha_params,
            "best_cost": self.best_cost,
            "train_success": self.train_success,
            "test_success": self.test_success,
            "converged": self.converged,
            "wall_seconds": round(self.wall_seconds, 3),
            "error": "",
        }


# ============ Experiments ============

def load_datasets(config: ExperimentConfig):
    definition = config.definition
    if config.train_file:
        train = load_dataset(config.train_file, problem=config.problem)
    else:
        train = generate_dataset(config.problem, config.train_size or definition.default_train_size,
                                 config.data_seed)
    if config.test_file:
        test = load_dataset(config.test_file, problem=config.problem)
    else:
        test = generate_dataset(config.problem, config.test_size, config.data_seed + defaults.TEST_SEED_OFFSET)
    for name, data in (("train", train), ("test", test)):
        if data.problem != config.problem:
            raise InvalidArgumentError(f"{name} set is for '{data.problem}', config says '{config.problem}'")
    return train, test


def _write_json(path: Path, data: Dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)


def run_experiment(config: ExperimentConfig, progress: bool = False) -> TrainReport:
    """
    Train and score one cell, writing model.json and report.json under
    <output_dir>/<cell name>/.
    """
    if len(config.layers) != 1:
        raise InvalidArgumentError("run_experiment takes a single layer count; use sweep for a grid")
    definition = config.definition
    train, test = load_datasets(config)
    spec = CircuitSpec(qubits=config.qubits, layers=config.layers[0], data_dim=definition.dim,
                       entangled=config.entangled)

    start = time.perf_counter()
    classifier, result = train_classifier(
        spec, config.objective(), definition.num_classes, train,
        restarts=config.restarts, base_seed=config.init_seed, minimizer=config.minimizer,
        lbfgs=config.lbfgs, sgd=config.sgd, progress=progress,
    )
    wall = time.perf_counter() - start

    out_dir = Path(config.output_dir) / config.cell_name
    model_path = save_model(classifier, out_dir / "model.json",
                            extra={"problem": config.problem, "data_seed": config.data_seed,
                                   "test_size": config.test_size})
    report_path = out_dir / "report.json"
    alpha = classifier.params.alpha
    report = TrainReport(
        config=config.to_dict(),
        problem=config.problem,
        qubits=spec.qubits,
        layers=spec.layers,
        entangled=spec.entangled,
        cost=config.cost,
        core_params=core_param_count(spec),
        alpha_params=0 if alpha is None else int(alpha.size),
        restart_costs=[float(c) for c in result.restart_costs],
        cost_trace=[float(c) for c in result.trace],
        best_cost=float(result.cost),
        cost_per_point=float(result.cost) / len(train),
        train_success=success_rate(classifier, train),
        test_success=success_rate(classifier, test),
        converged=result.converged,
        message=result.message,
        iterations=result.iterations,
        best_seed=result.seed,
        train_balance=class_balance(train).tolist(),
        test_balance=class_balance(test).tolist(),
        confusion=confusion_matrix(classifier, test).tolist(),
        wall_seconds=wall,
        model_path=str(model_path),
        report_path=str(report_path),
        created_at=datetime.now().isoformat(timespec="seconds"),
    )
    _write_json(report_path, report.to_dict())
    logger.info("%s: train %.3f, test %.3f (%.1fs)", config.cell_name,
                report.train_success, report.test_success, wall)
    return report


def _run_cell(config: ExperimentConfig) -> Dict:
    """One sweep row; failures become a row with the error filled in."""
    try:
        return run_experiment(config).row()
    except (ReuploadError, OSError, ArithmeticError) as e:
        logger.warning("%s failed: %s", config.cell_name, e)
        return {
            "problem": config.problem,
            "qubits": config.qubits,
            "layers": config.layers[0],
            "entangled": config.entangled,
            "cost": COST_SHORT[config.cost],
            "minimizer": config.minimizer,
            "restarts": config.restarts,
            "core_params": "",
            "alpha_params": "",
            "best_cost": "",
            "train_success": "",
            "test_success": "",
            "converged": False,
            "wall_seconds": "",
            "error": str(e),
        }


def _row_key(row: Dict):
    return (row["problem"], row["cost"], row["qubits"], row["entangled"], row["layers"])


def table_preset(base: ExperimentConfig) -> List[ExperimentConfig]:
    """The eight (cost, qubits, entanglement) columns of a benchmark table, over base.layers."""
    return [replace(base, cost=cost, qubits=qubits, entangled=entangled, measured_qubits=None)
            for cost, qubits, entangled in TABLE_COLUMNS]


def sweep(configs: Sequence[ExperimentConfig], workers: int = 1, progress: bool = False,
          output_dir: Optional[str] = None) -> List[Dict]:
    """
    Run every (config, layer count) cell and write sweep.csv and sweep.md.

    Rows come back sorted by (problem, cost, qubits, entangled, layers)
    whatever order the cells finish in.
    """
    if not configs:
        raise InvalidArgumentError("sweep needs at least one config")
    cells = [cell for config in configs for cell in config.cells()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(tqdm(pool.map(_run_cell, cells), total=len(cells), desc="sweep", disable=not progress))
    else:
        rows = [_run_cell(cell) for cell in tqdm(cells, desc="sweep", disable=not progress)]
    rows.sort(key=_row_key)

    out_dir = Path(output_dir or configs[0].output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    with open(out_dir / "sweep.md", "w", encoding="utf-8") as f:
        f.write(format_table(rows))
    return rows


def format_table(rows: Sequence[Dict]) -> str:
    """
    Markdown tables of test success, one per problem: a row per layer count
    and a column per (cost, qubits, entanglement) combination present.
    """
    out = []
    for problem in sorted({r["problem"] for r in rows}):
        subset = [r for r in rows if r["problem"] == problem]
        columns = sorted({(r["cost"], r["qubits"], r["entangled"]) for r in subset},
                         key=lambda c: (c[0] != "f", c[1], c[2]))
        header = [f"{'χ²_f' if cost == 'f' else 'χ²_wf'} {q}q {'Ent.' if ent else 'No Ent.'}"
                  for cost, q, ent in columns]
        out.append(f"### {problem}\n")
        out.append("| Layers | " + " | ".join(header) + " |")
        out.append("|---" * (len(header) + 1) + "|")
        cells = {(r["cost"], r["qubits"], r["entangled"], r["layers"]): r for r in subset}
        for layers in sorted({r["layers"] for r in subset}):
            values = []
            for cost, q, ent in columns:
                row = cells.get((cost, q, ent, layers))
                if row is None or row["error"] or row["test_success"] == "":
                    values.append("--")
                else:
                    values.append(f"{float(row['test_success']):.2f}")
            out.append(f"| {layers} | " + " | ".join(values) + " |")
        out.append("")
    return "\n".join(out)


# ============ Decision Boundaries ============

def boundary_grid(model: Union[Classifier, str, Path], resolution: int,
                  slice_values: Optional[Sequence[float]] = None,
                  out_path=None) -> np.ndarray:
    """
    Predicted class over an R x R grid of [-1, 1]^2.

    Args:
        model: a Classifier or a model file path
        resolution: grid points per axis (>= 2)
        slice_values: fixed values of x3..xd for models with d > 2
        out_path: optional CSV destination (columns x1, x2, class, fidelity)

    Returns:
        Array of shape (R*R, 4) ordered with x1 outer and x2 inner. The last
        column is the largest raw label fidelity, not the weighted score.
    """
    if not isinstance(model, Classifier):
        model = load_model(model)
    if resolution < 2:
        raise InvalidArgumentError(f"resolution must be >= 2, got {resolution}")
    extra = model.spec.data_dim - 2
    slice_values = list(slice_values or [])
    if extra < 0:
        raise InvalidArgumentError("boundary grids need a model of dimension >= 2")
    if len(slice_values) != extra:
        raise InvalidArgumentError(
            f"a {model.spec.data_dim}-d model needs {extra} slice values, got {len(slice_values)}"
        )

    axis = np.linspace(-1.0, 1.0, resolution)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    X = np.column_stack([x1.ravel(), x2.ravel()] + [np.full(x1.size, v) for v in slice_values])
    classes = model.predict(X)
    grid = np.column_stack([X[:, 0], X[:, 1], classes, model.fidelities(X).max(axis=1)])

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x1", "x2", "class", "fidelity"])
            for a, b, c, fid in grid:
                writer.writerow([repr(float(a)), repr(float(b)), int(c), repr(float(fid))])
    return grid


def boundary_agreement(grid: np.ndarray, problem: str, slice_values: Optional[Sequence[float]] = None) -> float:
    """Fraction of grid cells whose predicted class matches the labeling rule."""
    slice_values = list(slice_values or [])
    X = np.column_stack([grid[:, 0], grid[:, 1]] + [np.full(len(grid), v) for v in slice_values])
    return float(np.mean(label_points(problem, X) == grid[:, 2].astype(int)))
