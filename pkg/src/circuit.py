"""
Circuit module for the re-uploading classifier

Builds and evaluates data re-uploading circuits. Every layer applies, on each
qubit, the gate U(theta + w * x) once per three-component chunk of the data
point; entangled multi-qubit circuits put a fixed CZ pattern between layers
(never after the last one).

Parameter tensors are indexed [qubit][layer][sublayer][component].
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import InvalidArgumentError
from src.qmath import MAX_QUBITS, apply_cz, apply_single_qubit, su2_from_angles, zero_state

# ============ Cost Kinds ============
COST_FIDELITY = "fidelity"
COST_WEIGHTED = "weighted-fidelity"

COST_ALIASES = {
    "f": COST_FIDELITY,
    "fidelity": COST_FIDELITY,
    "wf": COST_WEIGHTED,
    "weighted": COST_WEIGHTED,
    "weighted-fidelity": COST_WEIGHTED,
}


def normalize_cost_kind(cost_kind: str) -> str:
    """Map 'f' / 'wf' and long names onto the canonical cost kind."""
    try:
        return COST_ALIASES[str(cost_kind).lower()]
    except KeyError:
        raise InvalidArgumentError(f"unknown cost kind '{cost_kind}' (use f or wf)") from None


@dataclass(frozen=True)
class CircuitSpec:
    """Architecture of a classifier circuit."""
    qubits: int
    layers: int
    data_dim: int
    entangled: bool = False

    def __post_init__(self):
        if not 1 <= self.qubits <= MAX_QUBITS:
            raise InvalidArgumentError(f"qubits must be in [1, {MAX_QUBITS}], got {self.qubits}")
        if self.layers < 1:
            raise InvalidArgumentError(f"layers must be >= 1, got {self.layers}")
        if self.data_dim < 1:
            raise InvalidArgumentError(f"data_dim must be >= 1, got {self.data_dim}")
        if self.entangled and self.qubits < 2:
            raise InvalidArgumentError("entanglement needs at least 2 qubits")

    @property
    def sublayers(self) -> int:
        return -(-self.data_dim // 3)

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.qubits, self.layers, self.sublayers, 3)

    @property
    def dim(self) -> int:
        return 2 ** self.qubits

    def weight_mask(self) -> np.ndarray:
        """True for weight entries that multiply a real data component."""
        component = np.arange(self.sublayers * 3).reshape(self.sublayers, 3)
        mask = component < self.data_dim
        return np.broadcast_to(mask, self.shape).copy()

    def to_dict(self) -> Dict:
        return {
            "qubits": self.qubits,
            "layers": self.layers,
            "data_dim": self.data_dim,
            "entangled": self.entangled,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CircuitSpec":
        return cls(
            qubits=int(data["qubits"]),
            layers=int(data["layers"]),
            data_dim=int(data["data_dim"]),
            entangled=bool(data.get("entangled", False)),
        )


@dataclass
class ModelParams:
    """Trainable values: rotation offsets theta, data weights w, class weights alpha."""
    theta: np.ndarray
    weights: np.ndarray
    alpha: Optional[np.ndarray] = None

    def validate(self, spec: CircuitSpec):
        if self.theta.shape != spec.shape or self.weights.shape != spec.shape:
            raise InvalidArgumentError(
                f"parameter shapes {self.theta.shape}/{self.weights.shape} do not match {spec.shape}"
            )
        if np.any(self.weights[~spec.weight_mask()] != 0):
            raise InvalidArgumentError("padded weight entries must be zero")

    def to_vector(self, spec: CircuitSpec) -> np.ndarray:
        """Flatten to the optimizer's layout: theta, free weights, alpha."""
        parts = [self.theta.ravel(), self.weights[spec.weight_mask()]]
        if self.alpha is not None:
            parts.append(self.alpha.ravel())
        return np.concatenate(parts).astype(float)

    @classmethod
    def from_vector(cls, spec: CircuitSpec, vector: np.ndarray,
                    alpha_shape: Optional[Tuple[int, ...]] = None) -> "ModelParams":
        vector = np.asarray(vector, dtype=float)
        mask = spec.weight_mask()
        n_theta = int(np.prod(spec.shape))
        n_weights = int(mask.sum())
        n_alpha = int(np.prod(alpha_shape)) if alpha_shape is not None else 0
        if vector.shape != (n_theta + n_weights + n_alpha,):
            raise InvalidArgumentError(
                f"vector of length {vector.size} does not match {n_theta + n_weights + n_alpha} parameters"
            )
        theta = vector[:n_theta].reshape(spec.shape).copy()
        weights = np.zeros(spec.shape)
        weights[mask] = vector[n_theta:n_theta + n_weights]
        alpha = None
        if alpha_shape is not None:
            alpha = vector[n_theta + n_weights:].reshape(alpha_shape).copy()
        return cls(theta=theta, weights=weights, alpha=alpha)

    def copy(self) -> "ModelParams":
        return ModelParams(
            theta=self.theta.copy(),
            weights=self.weights.copy(),
            alpha=None if self.alpha is None else self.alpha.copy(),
        )


def init_params(spec: CircuitSpec, seed: int,
                alpha_shape: Optional[Tuple[int, ...]] = None) -> ModelParams:
    """
    Seeded initialization: theta ~ U[0, 2pi), w ~ U[-1, 1] (padding zeroed), alpha = 1.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * math.pi, size=spec.shape)
    weights = rng.uniform(-1.0, 1.0, size=spec.shape) * spec.weight_mask()
    alpha = np.ones(alpha_shape) if alpha_shape is not None else None
    return ModelParams(theta=theta, weights=weights, alpha=alpha)


# ============ Encoding ============

def sublayer_split(x, k: int) -> np.ndarray:
    """
    Split data into k chunks of three components, zero-padding the tail.

    Args:
        x: data point of length d, or a batch of shape (M, d)
        k: number of sublayers, ceil(d / 3)

    Returns:
        Array of shape (k, 3), or (M, k, 3) for a batch
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if k != -(-d // 3):
        raise InvalidArgumentError(f"k={k} does not match ceil({d}/3)")
    padded = np.zeros(x.shape[:-1] + (3 * k,))
    padded[..., :d] = x
    return padded.reshape(x.shape[:-1] + (k, 3))


def _check_points(spec: CircuitSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.data_dim:
        raise InvalidArgumentError(f"expected points of dimension {spec.data_dim}, got shape {X.shape}")
    return X


def layer_angles(spec: CircuitSpec, params: ModelParams, X: np.ndarray,
                 angle_shift: Optional[np.ndarray] = None) -> np.ndarray:
    """Rotation angles theta + w * x for every point, shape (M, Q, N, k, 3)."""
    params.validate(spec)
    chunks = sublayer_split(_check_points(spec, X), spec.sublayers)
    theta = params.theta if angle_shift is None else params.theta + angle_shift
    return theta[None] + params.weights[None] * chunks[:, None, None, :, :]


def layer_unitaries(spec: CircuitSpec, params: ModelParams, layer: int, qubit: int, x) -> List[np.ndarray]:
    """One gate per sublayer of (layer, qubit), in application order."""
    if not 0 <= layer < spec.layers or not 0 <= qubit < spec.qubits:
        raise InvalidArgumentError(f"layer {layer} / qubit {qubit} out of range")
    angles = layer_angles(spec, params, np.asarray(x, dtype=float)[None])[0, qubit, layer]
    return list(su2_from_angles(angles))


# ============ Entanglement ============

def entangling_pairs(qubits: int, layer: int) -> List[Tuple[int, int]]:
    """
    CZ pairs applied after 0-based `layer`.

    Two qubits get CZ(0,1) every time. Four qubits alternate {(0,1),(2,3)} and
    {(1,2),(0,3)}, starting with the first. Other sizes alternate even and odd
    nearest-neighbour pairs without closing the ring (experimental).
    """
    if qubits < 2:
        return []
    if qubits == 2:
        return [(0, 1)]
    if qubits == 4:
        return [(0, 1), (2, 3)] if layer % 2 == 0 else [(1, 2), (0, 3)]
    start = 0 if layer % 2 == 0 else 1
    return [(i, i + 1) for i in range(start, qubits - 1, 2)]


# ============ Evaluation ============

def _apply_layer(spec: CircuitSpec, state: np.ndarray, gates: np.ndarray, layer: int) -> np.ndarray:
    # gates: (M, Q, k, 2, 2) for this layer
    for q in range(spec.qubits):
        for s in range(spec.sublayers):
            state = apply_single_qubit(state, q, gates[:, q, s])
    if spec.entangled and layer < spec.layers - 1:
        for a, b in entangling_pairs(spec.qubits, layer):
            state = apply_cz(state, a, b)
    return state


def forward_batch(spec: CircuitSpec, params: ModelParams, X,
                  angle_shift: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Final states for a batch of points.

    Args:
        spec: circuit architecture
        params: trainable values
        X: points, shape (M, d)
        angle_shift: optional offset added to theta, shape (Q, N, k, 3)

    Returns:
        Complex array of shape (M, 2**Q)
    """
    gates = su2_from_angles(layer_angles(spec, params, X, angle_shift))
    state = zero_state(spec.qubits, batch=gates.shape[0])
    for layer in range(spec.layers):
        state = _apply_layer(spec, state, gates[:, :, layer], layer)
    return state


def forward(spec: CircuitSpec, params: ModelParams, x) -> np.ndarray:
    """Final state U(x)|0...0> for a single point."""
    return forward_batch(spec, params, np.asarray(x, dtype=float)[None])[0]


def forward_trace(spec: CircuitSpec, params: ModelParams, x) -> List[np.ndarray]:
    """States |psi_0> = |0...0>, ..., |psi_N>, one layer (with its CZ pattern) per step."""
    gates = su2_from_angles(layer_angles(spec, params, np.asarray(x, dtype=float)[None]))
    state = zero_state(spec.qubits, batch=1)
    trace = [state[0]]
    for layer in range(spec.layers):
        state = _apply_layer(spec, state, gates[:, :, layer], layer)
        trace.append(state[0])
    return trace


# ============ Parameter Accounting ============

def core_param_count(spec: CircuitSpec) -> int:
    """theta plus unpadded weights: Q * N * (3k + d)."""
    return spec.qubits * spec.layers * (3 * spec.sublayers + spec.data_dim)


def alpha_shape(spec: CircuitSpec, cost_kind: str, num_classes: int,
                measured_count: int = 1) -> Optional[Tuple[int, ...]]:
    """Shape of the class-weight array, or None when the cost has no alpha."""
    if normalize_cost_kind(cost_kind) != COST_WEIGHTED:
        return None
    if spec.qubits == 1:
        return (num_classes,)
    return (num_classes, measured_count)


def param_count(spec: CircuitSpec, cost_kind: str, num_classes: int, measured_count: int = 1) -> int:
    """
    Total trainable parameters.

    The default measured_count=1 reproduces the totals quoted for the
    multi-qubit weighted classifiers (one alpha per class).
    """
    shape = alpha_shape(spec, cost_kind, num_classes, measured_count)
    n_alpha = int(np.prod(shape)) if shape is not None else 0
    return core_param_count(spec) + n_alpha
