"""
Objective module for the re-uploading classifier

Label-state geometry, the expected-fidelity matrix Y, the fidelity and
weighted fidelity costs (single- and multi-qubit forms) and the prediction
rules. Also holds Classifier, the bundle of circuit, parameters and
objective settings that gets trained, saved and scored.

Two multi-qubit strategies are supported:
    - basis-state: compare the whole register with one computational basis
      state per class (used with the fidelity cost)
    - measured-qubits: compare the reduced state of each measured qubit with
      single-qubit label states on the Bloch sphere (used with the weighted
      fidelity cost)
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.circuit import (
    COST_FIDELITY,
    COST_WEIGHTED,
    CircuitSpec,
    ModelParams,
    forward_batch,
    normalize_cost_kind,
)
from src.errors import InvalidArgumentError
from src.qmath import fidelity_mixed, reduced_density

STRATEGY_BASIS = "basis-state"
STRATEGY_MEASURED = "measured-qubits"

# Scores this close to the maximum count as a tie (lowest class index wins)
TIE_TOL = 1e-12

# Polar angle of the three lower tetrahedron vertices: cos(beta) = -1/3
TETRAHEDRON_BETA = math.acos(-1.0 / 3.0)


@dataclass(frozen=True)
class LabelSet:
    """Target state per class plus overlaps Y[s][c] = |<psi_c|psi_s>|^2."""
    states: np.ndarray
    overlaps: np.ndarray
    strategy: str

    @property
    def num_classes(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def expected(self, y: np.ndarray) -> np.ndarray:
        """Expected fidelity vectors Y(x) for class indices y, shape (M, C)."""
        return self.overlaps[np.asarray(y, dtype=int)]


def bloch_state(polar: float, azimuth: float = 0.0) -> np.ndarray:
    """cos(polar/2)|0> + e^{i azimuth} sin(polar/2)|1>"""
    return np.array([math.cos(polar / 2), np.exp(1j * azimuth) * math.sin(polar / 2)], dtype=complex)


def _bloch_labels(num_classes: int) -> np.ndarray:
    if num_classes == 2:
        return np.array([[1, 0], [0, 1]], dtype=complex)
    if num_classes == 3:
        # Great circle through the poles, 120 degrees apart
        return np.stack([bloch_state(2 * math.pi * m / 3) for m in range(3)])
    if num_classes == 4:
        lower = [bloch_state(TETRAHEDRON_BETA, 2 * math.pi * m / 3) for m in range(3)]
        return np.stack([bloch_state(0.0)] + lower)
    if num_classes == 6:
        r = 1 / math.sqrt(2)
        return np.array([
            [1, 0],
            [0, 1],
            [r, r],
            [r, -r],
            [r, 1j * r],
            [r, -1j * r],
        ], dtype=complex)
    raise InvalidArgumentError(
        f"no maximally orthogonal single-qubit label set for {num_classes} classes (use 2, 3, 4 or 6)"
    )


def label_states(num_classes: int, qubits: int = 1, strategy: str = STRATEGY_MEASURED) -> LabelSet:
    """
    Label states for a classification problem.

    Args:
        num_classes: number of classes C >= 2
        qubits: register size Q
        strategy: basis-state (first C computational basis states of the
            register) or measured-qubits (single-qubit Bloch-sphere set)

    Returns:
        LabelSet whose overlap matrix has an exact unit diagonal
    """
    if num_classes < 2:
        raise InvalidArgumentError(f"need at least 2 classes, got {num_classes}")
    if strategy == STRATEGY_BASIS:
        if num_classes > 2 ** qubits:
            raise InvalidArgumentError(f"{num_classes} classes do not fit in {qubits} qubit basis states")
        states = np.eye(2 ** qubits, dtype=complex)[:num_classes]
    elif strategy == STRATEGY_MEASURED:
        states = _bloch_labels(num_classes)
    else:
        raise InvalidArgumentError(f"unknown label strategy '{strategy}'")

    overlaps = np.abs(states.conj() @ states.T) ** 2
    np.fill_diagonal(overlaps, 1.0)
    return LabelSet(states=states, overlaps=overlaps, strategy=strategy)


@dataclass
class ObjectiveConfig:
    """Cost, multi-qubit strategy, measured qubits and optional P(0) thresholds."""
    cost_kind: str = COST_WEIGHTED
    multiqubit_strategy: Optional[str] = None
    measured_qubits: Optional[Tuple[int, ...]] = None
    thresholds: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        self.cost_kind = normalize_cost_kind(self.cost_kind)
        if self.multiqubit_strategy not in (None, STRATEGY_BASIS, STRATEGY_MEASURED):
            raise InvalidArgumentError(f"unknown strategy '{self.multiqubit_strategy}'")
        if self.measured_qubits is not None:
            self.measured_qubits = tuple(int(q) for q in self.measured_qubits)
            if not self.measured_qubits or len(set(self.measured_qubits)) != len(self.measured_qubits):
                raise InvalidArgumentError("measured qubits must be a non-empty list without repeats")
        if self.thresholds is not None:
            self.thresholds = tuple(float(t) for t in self.thresholds)
            check_thresholds(self.thresholds)

    def strategy_for(self, qubits: int) -> str:
        if self.multiqubit_strategy is not None:
            return self.multiqubit_strategy
        if qubits > 1 and self.cost_kind == COST_FIDELITY:
            return STRATEGY_BASIS
        return STRATEGY_MEASURED

    def measured_for(self, qubits: int) -> Tuple[int, ...]:
        measured = self.measured_qubits if self.measured_qubits is not None else tuple(range(qubits))
        for q in measured:
            if not 0 <= q < qubits:
                raise InvalidArgumentError(f"measured qubit {q} out of range for {qubits} qubits")
        return measured

    def to_dict(self) -> Dict:
        return {
            "cost_kind": self.cost_kind,
            "multiqubit_strategy": self.multiqubit_strategy,
            "measured_qubits": list(self.measured_qubits) if self.measured_qubits is not None else None,
            "thresholds": list(self.thresholds) if self.thresholds is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ObjectiveConfig":
        return cls(
            cost_kind=data.get("cost_kind", COST_WEIGHTED),
            multiqubit_strategy=data.get("multiqubit_strategy"),
            measured_qubits=data.get("measured_qubits"),
            thresholds=data.get("thresholds"),
        )


def check_thresholds(thresholds: Sequence[float]):
    lam = np.asarray(thresholds, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise InvalidArgumentError("thresholds must be a non-empty list")
    if np.any(lam < 0) or np.any(lam > 1):
        raise InvalidArgumentError("thresholds must lie in [0, 1]")
    if np.any(np.diff(lam) <= 0):
        raise InvalidArgumentError(f"thresholds must be strictly ascending, got {list(lam)}")


# ============ Fidelities ============

def _unpack(dataset) -> Tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "X") and hasattr(dataset, "y"):
        X, y = dataset.X, dataset.y
    else:
        X, y = dataset
    return np.asarray(X, dtype=float), np.asarray(y, dtype=int)


def fidelities_from_states(states: np.ndarray, labels: LabelSet,
                           measured_qubits: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Fidelities of final states with every label state.

    Returns:
        (M, C) when labels span the register, or (M, C, m) with one column
        per measured qubit when labels are single-qubit states
    """
    dim = states.shape[-1]
    if labels.dim == dim:
        return np.abs(states @ labels.states.conj().T) ** 2
    if labels.dim != 2:
        raise InvalidArgumentError(f"label dimension {labels.dim} does not fit a register of dimension {dim}")
    qubits = dim.bit_length() - 1
    measured = tuple(range(qubits)) if measured_qubits is None else tuple(measured_qubits)
    per_qubit = []
    for q in measured:
        rho = reduced_density(states, q)
        per_qubit.append(np.stack([fidelity_mixed(label, rho) for label in labels.states], axis=-1))
    return np.stack(per_qubit, axis=-1)


def class_fidelities(spec: CircuitSpec, params: ModelParams, X, labels: LabelSet,
                     measured_qubits: Optional[Sequence[int]] = None) -> np.ndarray:
    return fidelities_from_states(forward_batch(spec, params, X), labels, measured_qubits)


def _check_classes(y: np.ndarray, labels: LabelSet):
    if y.size and (y.min() < 0 or y.max() >= labels.num_classes):
        raise InvalidArgumentError(
            f"class indices must be in [0, {labels.num_classes}), got range [{y.min()}, {y.max()}]"
        )


def _check_alpha(alpha: np.ndarray, fidelities: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != fidelities.shape[1:]:
        raise InvalidArgumentError(f"alpha has shape {alpha.shape}, expected {fidelities.shape[1:]}")
    return alpha


# ============ Costs ============

def fidelity_cost_from(fidelities: np.ndarray, y: np.ndarray) -> float:
    if fidelities.ndim != 2:
        raise InvalidArgumentError("the fidelity cost needs label states spanning the whole register")
    return float(np.sum(1.0 - fidelities[np.arange(len(y)), y]))


def weighted_residuals(fidelities: np.ndarray, alpha: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """alpha * F - Y, broadcast over measured qubits when present."""
    if fidelities.ndim == 3:
        return alpha[None] * fidelities - expected[:, :, None]
    return alpha[None] * fidelities - expected


def cost_fidelity(dataset, spec: CircuitSpec, params: ModelParams, labels: LabelSet) -> float:
    """Sum over points of 1 - |<label of true class|psi(x)>|^2."""
    X, y = _unpack(dataset)
    _check_classes(y, labels)
    return fidelity_cost_from(class_fidelities(spec, params, X, labels), y)


def cost_weighted(dataset, spec: CircuitSpec, params: ModelParams, alpha, labels: LabelSet,
                  measured_qubits: Optional[Sequence[int]] = None) -> float:
    """
    Weighted fidelity cost: (1/2) sum over points, classes (and measured
    qubits) of (alpha * F - Y)^2.
    """
    X, y = _unpack(dataset)
    _check_classes(y, labels)
    fidelities = class_fidelities(spec, params, X, labels, measured_qubits)
    alpha = _check_alpha(alpha, fidelities)
    residuals = weighted_residuals(fidelities, alpha, labels.expected(y))
    return float(0.5 * np.sum(residuals ** 2))


# ============ Prediction ============

def scores_from_fidelities(fidelities: np.ndarray, alpha: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-class score: F, alpha * F, or the (weighted) sum over measured qubits."""
    if alpha is not None:
        fidelities = np.asarray(alpha)[None] * fidelities
    if fidelities.ndim == 3:
        return fidelities.sum(axis=-1)
    return fidelities


def argmax_lowest(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax where near-ties resolve to the lowest class index."""
    best = scores.max(axis=1, keepdims=True)
    return np.argmax(scores >= best - TIE_TOL, axis=1)


def predict_batch(spec: CircuitSpec, params: ModelParams, X, labels: LabelSet,
                  alpha=None, measured_qubits: Optional[Sequence[int]] = None) -> np.ndarray:
    fidelities = class_fidelities(spec, params, X, labels, measured_qubits)
    if alpha is not None:
        alpha = _check_alpha(alpha, fidelities)
    return argmax_lowest(scores_from_fidelities(fidelities, alpha))


def predict(spec: CircuitSpec, params: ModelParams, x, labels: LabelSet,
            alpha=None, measured_qubits: Optional[Sequence[int]] = None) -> int:
    """Class with the highest fidelity score for a single point."""
    X = np.asarray(x, dtype=float)[None]
    return int(predict_batch(spec, params, X, labels, alpha, measured_qubits)[0])


def threshold_classes(p0: np.ndarray, thresholds: Sequence[float]) -> np.ndarray:
    """Sector of P(0): class 0 above the top threshold, one class per sector going down."""
    check_thresholds(thresholds)
    lam = np.asarray(thresholds, dtype=float)
    return np.sum(lam[None, :] >= np.asarray(p0)[:, None], axis=1)


def predict_threshold(spec: CircuitSpec, params: ModelParams, x, thresholds: Sequence[float]) -> int:
    """Classify a single-qubit output by comparing P(0) with ascending thresholds."""
    if spec.qubits != 1:
        raise InvalidArgumentError("threshold prediction is defined for single-qubit models")
    check_thresholds(thresholds)
    state = forward_batch(spec, params, np.asarray(x, dtype=float)[None])
    p0 = np.abs(state[:, 0]) ** 2
    return int(threshold_classes(p0, thresholds)[0])


# ============ Classifier ============

@dataclass
class Classifier:
    """A circuit, its parameters and the objective it was trained for."""
    spec: CircuitSpec
    params: ModelParams
    num_classes: int
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    seed: Optional[int] = None

    def __post_init__(self):
        self.params.validate(self.spec)
        if self.objective.thresholds is not None and self.spec.qubits != 1:
            raise InvalidArgumentError("threshold prediction is defined for single-qubit models")

    @property
    def labels(self) -> LabelSet:
        return label_states(self.num_classes, self.spec.qubits, self.objective.strategy_for(self.spec.qubits))

    @property
    def measured_qubits(self) -> Tuple[int, ...]:
        return self.objective.measured_for(self.spec.qubits)

    def fidelities(self, X) -> np.ndarray:
        """Raw fidelity with each label state, averaged over measured qubits; shape (M, C)."""
        fidelities = class_fidelities(self.spec, self.params, X, self.labels, self.measured_qubits)
        return fidelities.mean(axis=-1) if fidelities.ndim == 3 else fidelities

    def scores(self, X) -> np.ndarray:
        """Prediction scores, shape (M, C)."""
        labels = self.labels
        fidelities = class_fidelities(self.spec, self.params, X, labels, self.measured_qubits)
        alpha = self.params.alpha if self.objective.cost_kind == COST_WEIGHTED else None
        return scores_from_fidelities(fidelities, alpha)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.objective.thresholds is not None:
            p0 = np.abs(forward_batch(self.spec, self.params, X)[:, 0]) ** 2
            return threshold_classes(p0, self.objective.thresholds)
        return argmax_lowest(self.scores(X))


def success_rate(model: Classifier, dataset) -> float:
    """Fraction of points whose predicted class equals the stored class."""
    X, y = _unpack(dataset)
    if len(y) == 0:
        raise InvalidArgumentError("cannot score an empty dataset")
    return float(np.mean(model.predict(X) == y))


def confusion_matrix(model: Classifier, dataset) -> np.ndarray:
    """Counts[true class][predicted class]."""
    X, y = _unpack(dataset)
    counts = np.zeros((model.num_classes, model.num_classes), dtype=int)
    np.add.at(counts, (y, model.predict(X)), 1)
    return counts
