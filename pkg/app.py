"""
Re-uploading classifier - command line

Verbs:
    generate   write a seeded dataset (CSV + JSON manifest)
    train      train one or more cells and write model.json / report.json
    evaluate   score a saved model on a generated or stored dataset
    sweep      run a grid of cells, write sweep.csv and sweep.md
    boundary   export the predicted class over a grid of the plane

Usage:
    python app.py train --problem circle --layers 4 --cost wf --restarts 5
    python app.py sweep --problem circle --preset table --restarts 2 --workers 4
    python app.py boundary --model results/circle_q1_l4_noent_wf/model.json --resolution 100

Errors are written to stderr as one JSON object and the exit status is 1.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from src import config as defaults
from src.bench import ExperimentConfig, boundary_grid, load_config, run_experiment, sweep, table_preset
from src.errors import InvalidArgumentError, ReuploadError
from src.model_io import load_model, model_metadata
from src.objective import ObjectiveConfig, confusion_matrix, success_rate
from src.problems import (
    PROBLEMS,
    class_balance,
    dataset_filename,
    generate_dataset,
    get_problem,
    load_dataset,
    save_dataset,
)

logger = logging.getLogger("reupload")


# ============ Config Assembly ============

def _flag_overrides(args) -> dict:
    """Config keys set on the command line (None means 'not given')."""
    overrides = {
        "problem": getattr(args, "problem", None),
        "qubits": getattr(args, "qubits", None),
        "layers": getattr(args, "layers", None),
        "entangled": getattr(args, "entangled", None),
        "cost": getattr(args, "cost", None),
        "minimizer": getattr(args, "minimizer", None),
        "restarts": getattr(args, "restarts", None),
        "data_seed": getattr(args, "seed", None),
        "init_seed": getattr(args, "init_seed", None),
        "train_size": getattr(args, "train_size", None),
        "test_size": getattr(args, "test_size", None),
        "measured_qubits": getattr(args, "measured", None),
        "thresholds": getattr(args, "thresholds", None),
        "output_dir": getattr(args, "out", None),
        "train_file": getattr(args, "train_file", None),
        "test_file": getattr(args, "test_file", None),
    }
    return {k: v for k, v in overrides.items() if v is not None}


def build_configs(args) -> list:
    """Experiment configs from the optional --config file, with flags applied on top."""
    documents = [{}]
    if args.config:
        raw = load_config(args.config)
        if isinstance(raw, dict) and "experiments" in raw:
            raw = raw["experiments"]
        documents = raw if isinstance(raw, list) else [raw]
        if not documents or not all(isinstance(d, dict) for d in documents):
            raise InvalidArgumentError("config must be an object or a non-empty list of objects", path=args.config)

    overrides = _flag_overrides(args)
    configs = []
    for document in documents:
        data = dict(document)
        data.update(overrides)
        if "problem" not in data:
            raise InvalidArgumentError("no problem given (use --problem or a config file)")
        configs.append(ExperimentConfig.from_dict(data))
    return configs


# ============ Verbs ============

def cmd_generate(args) -> int:
    definition = get_problem(args.problem)
    n = args.n or definition.default_train_size
    seed = args.seed if args.seed is not None else defaults.DATA_SEED
    dataset = generate_dataset(args.problem, n, seed)
    out_dir = Path(args.out or Path(defaults.OUTPUT_DIR) / "data")
    path = save_dataset(dataset, out_dir / dataset_filename(args.problem, n, seed))
    balance = ", ".join(f"{b:.3f}" for b in class_balance(dataset))
    print(f"[OK] {n} {args.problem} points (seed {seed}) -> {path}  balance: {balance}")
    return 0


def cmd_train(args) -> int:
    progress = not args.quiet and sys.stderr.isatty()
    for config in build_configs(args):
        for cell in config.cells():
            report = run_experiment(cell, progress=progress)
            tag = "[OK]" if report.converged else "[WARNING]"
            print(f"{tag} {cell.cell_name}: train {report.train_success:.3f}, "
                  f"test {report.test_success:.3f}, cost {report.best_cost:.4f}, "
                  f"{report.core_params}+{report.alpha_params} params -> {report.report_path}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    if args.thresholds is not None:
        model = replace(model, objective=ObjectiveConfig(
            cost_kind=model.objective.cost_kind,
            multiqubit_strategy=model.objective.multiqubit_strategy,
            measured_qubits=model.objective.measured_qubits,
            thresholds=tuple(args.thresholds),
        ))

    if args.dataset:
        dataset = load_dataset(args.dataset, problem=args.problem)
    else:
        meta = model_metadata(args.model)
        problem = args.problem or meta.get("problem")
        if problem is None:
            raise InvalidArgumentError("model file names no problem; pass --problem or --dataset")
        data_seed = args.seed if args.seed is not None else meta.get("data_seed", defaults.DATA_SEED)
        n = args.n or meta.get("test_size") or defaults.TEST_SIZE
        dataset = generate_dataset(problem, n, data_seed + defaults.TEST_SEED_OFFSET)
    if dataset.X.shape[1] != model.spec.data_dim:
        raise InvalidArgumentError(
            f"model expects dimension {model.spec.data_dim}, dataset has {dataset.X.shape[1]}"
        )

    result = {
        "model": str(args.model),
        "problem": dataset.problem,
        "n": len(dataset),
        "seed": dataset.seed,
        "success": success_rate(model, dataset),
        "confusion": confusion_matrix(model, dataset).tolist(),
        "thresholds": list(model.objective.thresholds) if model.objective.thresholds else None,
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(result, f, indent=2)
    print(f"[OK] success {result['success']:.4f} on {result['n']} {dataset.problem} points")
    return 0


def cmd_sweep(args) -> int:
    configs = build_configs(args)
    if args.preset == "table":
        configs = [cell for config in configs for cell in table_preset(config)]
    workers = args.workers if args.workers is not None else defaults.WORKERS
    rows = sweep(configs, workers=workers, progress=not args.quiet and sys.stderr.isatty(),
                 output_dir=args.out)
    failed = [r for r in rows if r["error"]]
    out_dir = args.out or configs[0].output_dir
    print(f"[OK] {len(rows)} cells -> {Path(out_dir) / 'sweep.csv'}")
    if failed:
        print(f"[WARNING] {len(failed)} cells failed; see the error column")
    return 0


def cmd_boundary(args) -> int:
    out = args.out or Path(args.model).with_name("boundary.csv")
    grid = boundary_grid(args.model, args.resolution, args.slice, out_path=out)
    print(f"[OK] {len(grid)} grid points -> {out}")
    return 0


# ============ Parser ============

def _add_experiment_flags(parser):
    parser.add_argument("--config", help="experiment JSON (object, list, or {\"experiments\": [...]})")
    parser.add_argument("--problem", choices=sorted(PROBLEMS))
    parser.add_argument("--qubits", type=int)
    parser.add_argument("--layers", type=int, nargs="+")
    parser.add_argument("--entangled", action="store_true", default=None)
    parser.add_argument("--cost", choices=["f", "wf"])
    parser.add_argument("--minimizer", choices=["lbfgs", "lbfgsb", "sgd"])
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--seed", type=int, help="data seed (the test set uses seed + offset)")
    parser.add_argument("--init-seed", type=int, help="first parameter-initialization seed")
    parser.add_argument("--train-size", type=int)
    parser.add_argument("--test-size", type=int)
    parser.add_argument("--measured", type=int, nargs="+", help="qubits entering the multi-qubit cost")
    parser.add_argument("--thresholds", type=float, nargs="+", help="P(0) thresholds, ascending")
    parser.add_argument("--train-file", help="stored training set instead of generating one")
    parser.add_argument("--test-file", help="stored test set instead of generating one")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--quiet", action="store_true", help="no progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.py", description="Data re-uploading quantum classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded dataset")
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("--n", type=int, help="number of points (default: the problem's training size)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train classifiers")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--dataset", help="stored dataset CSV")
    p.add_argument("--n", type=int, help="generated test-set size (default: the size used at training time)")
    p.add_argument("--seed", type=int, help="data seed (default: the one stored in the model file)")
    p.add_argument("--thresholds", type=float, nargs="+")
    p.add_argument("--out", help="write the evaluation as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a grid of cells")
    _add_experiment_flags(p)
    p.add_argument("--preset", choices=["table"], help="expand to the eight benchmark table columns")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("boundary", help="export a decision-boundary grid")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--slice", type=float, nargs="+", help="fixed values of x3..xd")
    p.add_argument("--out", help="CSV path (default: boundary.csv next to the model)")
    p.set_defaults(func=cmd_boundary)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, defaults.LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger.debug("running %s", args.command)
    try:
        return args.func(args)
    except ReuploadError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
    except OSError as e:
        payload = {"error": "io-error", "message": e.strerror or str(e)}
        if e.filename:
            payload["path"] = str(e.filename)
        print(json.dumps(payload), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
