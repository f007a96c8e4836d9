"""
Trainer module for the re-uploading classifier

Connects the objective and gradient code to the minimizers: flattens model
parameters into one vector, builds the (cost, gradient) closure, runs one
seeded initialization and keeps the best of several restarts.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.circuit import COST_WEIGHTED, CircuitSpec, ModelParams, alpha_shape, init_params
from src.errors import InvalidArgumentError
from src.grad import cost_and_gradient
from src.objective import STRATEGY_BASIS, Classifier, LabelSet, ObjectiveConfig, label_states
from src.optimize import (
    LbfgsConfig,
    SgdConfig,
    TrainResult,
    lbfgs_minimize,
    lbfgsb_minimize,
    multi_restart,
    sgd_minimize,
)

logger = logging.getLogger(__name__)

MINIMIZERS = ("lbfgs", "lbfgsb", "sgd")


@dataclass
class TrainingProblem:
    """Everything the cost closure needs, fixed for the whole run."""
    spec: CircuitSpec
    objective: ObjectiveConfig
    labels: LabelSet
    X: np.ndarray
    y: np.ndarray
    alpha_shape: Optional[Tuple[int, ...]]

    @property
    def measured_qubits(self) -> Tuple[int, ...]:
        return self.objective.measured_for(self.spec.qubits)

    def unflatten(self, vector: np.ndarray) -> ModelParams:
        return ModelParams.from_vector(self.spec, vector, self.alpha_shape)

    def fun_grad(self, vector: np.ndarray, indices=None) -> Tuple[float, np.ndarray]:
        """Summed cost and flat gradient over all points, or over `indices`."""
        X, y = (self.X, self.y) if indices is None else (self.X[indices], self.y[indices])
        params = self.unflatten(vector)
        cost, grad = cost_and_gradient(self.objective.cost_kind, self.spec, params, (X, y),
                                       self.labels, self.measured_qubits)
        return cost, grad.to_vector(self.spec)


def build_problem(spec: CircuitSpec, objective: ObjectiveConfig, num_classes: int, dataset) -> TrainingProblem:
    X, y = (dataset.X, dataset.y) if hasattr(dataset, "X") else dataset
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    strategy = objective.strategy_for(spec.qubits)
    labels = label_states(num_classes, spec.qubits, strategy)
    shape = None
    if objective.cost_kind == COST_WEIGHTED:
        if strategy == STRATEGY_BASIS and spec.qubits > 1:
            shape = (num_classes,)
        else:
            shape = alpha_shape(spec, objective.cost_kind, num_classes, len(objective.measured_for(spec.qubits)))
    return TrainingProblem(spec, objective, labels, X, y, shape)


def train_once(problem: TrainingProblem, seed: int, minimizer: str = "lbfgs",
               lbfgs: Optional[LbfgsConfig] = None, sgd: Optional[SgdConfig] = None) -> TrainResult:
    """One seeded initialization followed by the chosen minimizer; params come back as ModelParams."""
    x0 = init_params(problem.spec, seed, problem.alpha_shape).to_vector(problem.spec)
    if minimizer == "lbfgs":
        result = lbfgs_minimize(problem.fun_grad, x0, lbfgs)
    elif minimizer == "lbfgsb":
        result = lbfgsb_minimize(problem.fun_grad, x0, lbfgs)
    elif minimizer == "sgd":
        sgd = sgd or SgdConfig()
        if sgd.batch_size > len(problem.y):
            raise InvalidArgumentError(f"batch size {sgd.batch_size} exceeds {len(problem.y)} training points")
        result = sgd_minimize(problem.fun_grad, x0, len(problem.y), SgdConfig(
            learning_rate=sgd.learning_rate, batch_size=sgd.batch_size, epochs=sgd.epochs, seed=sgd.seed + seed,
        ))
    else:
        raise InvalidArgumentError(f"unknown minimizer '{minimizer}' (use one of {', '.join(MINIMIZERS)})")
    result.params = problem.unflatten(result.params)
    result.seed = seed
    return result


def train_classifier(spec: CircuitSpec, objective: ObjectiveConfig, num_classes: int, dataset,
                     restarts: int = 1, base_seed: int = 0, minimizer: str = "lbfgs",
                     lbfgs: Optional[LbfgsConfig] = None, sgd: Optional[SgdConfig] = None,
                     progress: bool = False) -> Tuple[Classifier, TrainResult]:
    """
    Train with `restarts` seeded initializations (seeds base_seed, base_seed + 1, ...).

    Returns:
        (classifier built from the lowest-cost run, that run's TrainResult)
    """
    problem = build_problem(spec, objective, num_classes, dataset)
    logger.info("training %d-qubit, %d-layer circuit (%s, %s), %d restarts",
                spec.qubits, spec.layers, objective.cost_kind, minimizer, restarts)
    best = multi_restart(lambda seed: train_once(problem, seed, minimizer, lbfgs, sgd),
                         restarts, base_seed, progress=progress)
    if not best.converged:
        logger.warning("best restart did not converge: %s", best.message)
    classifier = Classifier(spec=spec, params=best.params, num_classes=num_classes,
                            objective=objective, seed=best.seed)
    return classifier, best
