"""
Gradient module for the re-uploading classifier

Three ways to differentiate the costs:
    - backpropagation through single-qubit circuits for the fidelity cost,
      carrying forward states |psi_l> and backward states <Delta_l|
    - the parameter-shift rule, valid for every circuit and both costs, with
      the class weights alpha differentiated in closed form
    - central finite differences, used as a test oracle

Gate derivatives are only ever used inside inner products: dU/dphi is not
unitary and is never applied to a state that gets carried forward.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.circuit import (
    COST_FIDELITY,
    COST_WEIGHTED,
    CircuitSpec,
    ModelParams,
    forward_batch,
    layer_angles,
    normalize_cost_kind,
    sublayer_split,
)
from src.errors import InvalidArgumentError, UnsupportedError
from src.objective import (
    LabelSet,
    fidelities_from_states,
    fidelity_cost_from,
    weighted_residuals,
)
from src.qmath import su2_from_angles

# Shift for the expectation-value rule: dF/dphi = (F(phi + s) - F(phi - s)) / 2
PARAMETER_SHIFT = math.pi / 2

FD_STEP_RANGE = (1e-7, 1e-3)


@dataclass
class Gradient:
    """Partial derivatives laid out like ModelParams."""
    theta: np.ndarray
    weights: np.ndarray
    alpha: Optional[np.ndarray] = None

    def to_vector(self, spec: CircuitSpec) -> np.ndarray:
        return ModelParams(self.theta, self.weights, self.alpha).to_vector(spec)


def _accumulate(spec: CircuitSpec, per_point: np.ndarray, chunks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sum angle derivatives over points into theta and weight gradients.

    per_point: (M, Q, N, k, 3) derivative of the cost wrt each gate angle
    chunks: (M, k, 3) sublayer-split data
    """
    theta = per_point.sum(axis=0)
    weights = np.einsum("mqnki,mki->qnki", per_point, chunks)
    weights[~spec.weight_mask()] = 0.0
    return theta, weights


def shifted_unitary_derivative(phi: Sequence[float], i: int) -> np.ndarray:
    """
    dU/dphi_i = (1/2) U(phi + pi e_i).

    Args:
        phi: angle triple
        i: component index, 1, 2 or 3
    """
    if i not in (1, 2, 3):
        raise InvalidArgumentError(f"component index must be 1, 2 or 3, got {i}")
    shifted = np.array(phi, dtype=float)
    shifted[i - 1] += math.pi
    return 0.5 * su2_from_angles(shifted)


# ============ Backpropagation ============

def backprop_fidelity_batch(spec: CircuitSpec, params: ModelParams, X,
                            targets: np.ndarray) -> Tuple[float, Gradient]:
    """
    Fidelity cost sum(1 - |<target|psi(x)>|^2) and its exact gradient.

    Args:
        spec: single-qubit circuit
        params: trainable values
        X: points, shape (M, d)
        targets: label state of each point's class, shape (M, 2)

    Returns:
        (cost, Gradient) summed over the points
    """
    if spec.qubits != 1:
        raise UnsupportedError("backpropagation is implemented for single-qubit circuits")
    X = np.asarray(X, dtype=float)
    angles = layer_angles(spec, params, X)[:, 0]            # (M, N, k, 3)
    M = angles.shape[0]
    seq = angles.reshape(M, -1, 3)                          # gates in application order
    gates = su2_from_angles(seq)                            # (M, K, 2, 2)
    K = gates.shape[1]

    # Forward pass: psi[j] is the state before gate j
    psi = [np.zeros((M, 2), dtype=complex)]
    psi[0][:, 0] = 1.0
    for j in range(K):
        psi.append(np.einsum("mij,mj->mi", gates[:, j], psi[j]))

    targets = np.asarray(targets, dtype=complex)
    overlap = np.einsum("mi,mi->m", targets.conj(), psi[K])
    cost = float(np.sum(1.0 - np.abs(overlap) ** 2))

    # Backward pass: delta is G_{j+1}^dag ... G_{K-1}^dag |target>
    derivs = 0.5 * su2_from_angles(seq[:, :, None, :] + math.pi * np.eye(3)[None, None])  # (M, K, 3, 2, 2)
    per_gate = np.empty((M, K, 3))
    delta = targets
    for j in reversed(range(K)):
        inner = np.einsum("mi,mcij,mj->mc", delta.conj(), derivs[:, j], psi[j])
        per_gate[:, j] = -2.0 * np.real(inner * overlap.conj()[:, None])
        delta = np.einsum("mji,mj->mi", gates[:, j].conj(), delta)

    per_point = per_gate.reshape((M,) + spec.shape)
    theta, weights = _accumulate(spec, per_point, sublayer_split(X, spec.sublayers))
    return cost, Gradient(theta=theta, weights=weights)


def grad_fidelity_backprop(spec: CircuitSpec, params: ModelParams, x, label) -> Gradient:
    """Gradient of 1 - |<label|psi(x)>|^2 for one point of a single-qubit model."""
    X = np.asarray(x, dtype=float)[None]
    targets = np.asarray(label, dtype=complex)[None]
    return backprop_fidelity_batch(spec, params, X, targets)[1]


# ============ Parameter Shift ============

def _cost_and_sensitivity(cost_kind: str, fidelities: np.ndarray, y: np.ndarray,
                          labels: LabelSet, alpha: Optional[np.ndarray]):
    """Cost, dcost/dF (same shape as F) and dcost/dalpha."""
    if cost_kind == COST_FIDELITY:
        cost = fidelity_cost_from(fidelities, y)
        sensitivity = np.zeros_like(fidelities)
        sensitivity[np.arange(len(y)), y] = -1.0
        return cost, sensitivity, None
    if alpha is None:
        raise InvalidArgumentError("the weighted fidelity cost needs class weights alpha")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != fidelities.shape[1:]:
        raise InvalidArgumentError(f"alpha has shape {alpha.shape}, expected {fidelities.shape[1:]}")
    residuals = weighted_residuals(fidelities, alpha, labels.expected(y))
    cost = float(0.5 * np.sum(residuals ** 2))
    return cost, residuals * alpha[None], np.sum(residuals * fidelities, axis=0)


def cost_and_grad_parameter_shift(cost_kind: str, spec: CircuitSpec, params: ModelParams, dataset,
                                  labels: LabelSet, alpha=None,
                                  measured_qubits: Optional[Sequence[int]] = None) -> Tuple[float, Gradient]:
    """
    Cost and gradient by shifting every rotation angle by +-pi/2.

    Two batched forward passes per angle component; CZ gates carry no
    parameters and are never shifted.
    """
    cost_kind = normalize_cost_kind(cost_kind)
    X, y = (dataset.X, dataset.y) if hasattr(dataset, "X") else dataset
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if alpha is None:
        alpha = params.alpha

    def fids(shift=None):
        return fidelities_from_states(forward_batch(spec, params, X, shift), labels, measured_qubits)

    base = fids()
    cost, sensitivity, alpha_grad = _cost_and_sensitivity(cost_kind, base, y, labels, alpha)
    reduce_axes = tuple(range(1, base.ndim))

    per_point = np.zeros((len(X),) + spec.shape)
    shift = np.zeros(spec.shape)
    for index in np.ndindex(*spec.shape):
        shift[index] = PARAMETER_SHIFT
        plus = fids(shift)
        shift[index] = -PARAMETER_SHIFT
        minus = fids(shift)
        shift[index] = 0.0
        per_point[(slice(None),) + index] = np.sum(sensitivity * (plus - minus) / 2, axis=reduce_axes)

    theta, weights = _accumulate(spec, per_point, sublayer_split(X, spec.sublayers))
    return cost, Gradient(theta=theta, weights=weights, alpha=alpha_grad)


def grad_parameter_shift(cost_kind: str, spec: CircuitSpec, params: ModelParams, dataset,
                         labels: LabelSet, alpha=None,
                         measured_qubits: Optional[Sequence[int]] = None) -> Gradient:
    return cost_and_grad_parameter_shift(cost_kind, spec, params, dataset, labels, alpha, measured_qubits)[1]


def cost_and_gradient(cost_kind: str, spec: CircuitSpec, params: ModelParams, dataset,
                      labels: LabelSet, measured_qubits: Optional[Sequence[int]] = None) -> Tuple[float, Gradient]:
    """Backpropagation where it applies (one qubit, fidelity cost), parameter shift otherwise."""
    cost_kind = normalize_cost_kind(cost_kind)
    if cost_kind == COST_FIDELITY and spec.qubits == 1:
        X, y = (dataset.X, dataset.y) if hasattr(dataset, "X") else dataset
        targets = labels.states[np.asarray(y, dtype=int)]
        return backprop_fidelity_batch(spec, params, X, targets)
    alpha = params.alpha if cost_kind == COST_WEIGHTED else None
    return cost_and_grad_parameter_shift(cost_kind, spec, params, dataset, labels, alpha, measured_qubits)


# ============ Finite Differences ============

def grad_finite_difference(cost: Callable[[np.ndarray], float], params, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(p + h e_j) - f(p - h e_j)) / 2h for every coordinate of a flat vector."""
    if not FD_STEP_RANGE[0] <= h <= FD_STEP_RANGE[1]:
        raise InvalidArgumentError(f"step h must be in [{FD_STEP_RANGE[0]}, {FD_STEP_RANGE[1]}], got {h}")
    p = np.array(params, dtype=float)
    grad = np.empty_like(p)
    for j in range(p.size):
        orig = p.flat[j]
        p.flat[j] = orig + h
        up = cost(p)
        p.flat[j] = orig - h
        down = cost(p)
        p.flat[j] = orig
        grad.flat[j] = (up - down) / (2 * h)
    return grad
