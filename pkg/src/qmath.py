"""
Quantum math module

Exact complex linear algebra for small registers: the SU(2) layer gate, its
axis-angle form, single-qubit and CZ gate application, partial trace and
fidelities.

Conventions:
    - qubit 0 is the most significant bit of the basis index, so wires drawn
      top-to-bottom map to the Kronecker product left-to-right
    - states are complex numpy vectors of length 2**Q; every function also
      accepts leading batch axes, so a whole dataset evolves in one call
    - equality of unitaries is only meaningful up to a global phase

Usage:
    from src.qmath import su2_from_angles, zero_state, apply_single_qubit

    psi = apply_single_qubit(zero_state(2), 0, su2_from_angles([np.pi, 0, 0]))
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from src.errors import InvalidArgumentError

# Tuned and tested up to 4; generic code paths accept up to 8
MAX_QUBITS = 8

# cos^2(d) above 1 - SINGULAR_TOL is treated as the +-identity limit
SINGULAR_TOL = 1e-12

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])


@dataclass(frozen=True)
class AxisAngle:
    """Axis-angle form of an SU(2) gate: U = exp(i omega . sigma)."""
    omega: np.ndarray
    angle_d: float
    norm_factor: float  # inf at the singular (+-identity) limit


def _check_angles(phi) -> np.ndarray:
    arr = np.asarray(phi, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 3:
        raise InvalidArgumentError(f"expected angle triples, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("angles must be finite")
    return arr


def num_qubits(dim: int) -> int:
    """Number of qubits of a state vector with `dim` amplitudes."""
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim or n > MAX_QUBITS:
        raise InvalidArgumentError(f"state dimension {dim} is not 2**Q with 1 <= Q <= {MAX_QUBITS}")
    return n


def _check_qubit(qubit: int, n: int):
    if not isinstance(qubit, (int, np.integer)) or not 0 <= qubit < n:
        raise InvalidArgumentError(f"qubit index {qubit} out of range for a {n}-qubit register")


def zero_state(qubits: int, batch: int = None) -> np.ndarray:
    """|0...0>, optionally repeated along a leading batch axis."""
    if not 1 <= qubits <= MAX_QUBITS:
        raise InvalidArgumentError(f"qubits must be in [1, {MAX_QUBITS}], got {qubits}")
    shape = (2 ** qubits,) if batch is None else (batch, 2 ** qubits)
    state = np.zeros(shape, dtype=complex)
    state[..., 0] = 1.0
    return state


# ============ SU(2) Gates ============

def su2_from_angles(phi) -> np.ndarray:
    """
    Layer gate U(phi1, phi2, phi3).

        [[ cos(p1/2) e^{ i(p2+p3)/2}, -sin(p1/2) e^{-i(p2-p3)/2}],
         [ sin(p1/2) e^{ i(p2-p3)/2},  cos(p1/2) e^{-i(p2+p3)/2}]]

    Args:
        phi: angle triple, or an array of triples with shape (..., 3)

    Returns:
        Complex array of shape (..., 2, 2)
    """
    phi = _check_angles(phi)
    half = phi[..., 0] / 2
    plus = (phi[..., 1] + phi[..., 2]) / 2
    minus = (phi[..., 1] - phi[..., 2]) / 2
    c = np.cos(half)
    s = np.sin(half)

    u = np.empty(phi.shape[:-1] + (2, 2), dtype=complex)
    u[..., 0, 0] = c * np.exp(1j * plus)
    u[..., 0, 1] = -s * np.exp(-1j * minus)
    u[..., 1, 0] = s * np.exp(1j * minus)
    u[..., 1, 1] = c * np.exp(-1j * plus)
    return u


def axis_angle(phi: Sequence[float]) -> AxisAngle:
    """
    Rotation vector omega with exp(i omega . sigma) = su2_from_angles(phi).

    Writing U = cos(d) I + i sin(d) (n . sigma), the rotation angle d follows
    cos d = cos((p2+p3)/2) cos(p1/2) and omega = d * n. The y component has
    the sign that makes the exponential reproduce U exactly; flipping it only
    reproduces U for special angles.
    """
    phi = _check_angles(phi)
    if phi.shape != (3,):
        raise InvalidArgumentError("axis_angle takes a single angle triple")
    half = phi[0] / 2
    plus = (phi[1] + phi[2]) / 2
    minus = (phi[1] - phi[2]) / 2

    cos_d = math.cos(half) * math.cos(plus)
    # sin(d) * n
    b = np.array([
        math.sin(half) * math.sin(minus),
        -math.sin(half) * math.cos(minus),
        math.cos(half) * math.sin(plus),
    ])

    if cos_d * cos_d >= 1.0 - SINGULAR_TOL:
        if cos_d > 0:
            return AxisAngle(np.zeros(3), 0.0, math.inf)
        return AxisAngle(np.array([math.pi, 0.0, 0.0]), math.pi, math.inf)

    sin_d = float(np.linalg.norm(b))
    d = math.atan2(sin_d, cos_d)
    norm_factor = 1.0 / math.sqrt(1.0 - cos_d * cos_d)
    return AxisAngle(d * b / sin_d, d, norm_factor)


def unitary_from_axis_angle(aa: Union[AxisAngle, Sequence[float]]) -> np.ndarray:
    """exp(i omega . sigma) = cos|w| I + i sin|w| (w_hat . sigma), in closed form."""
    omega = np.asarray(aa.omega if isinstance(aa, AxisAngle) else aa, dtype=float)
    if omega.shape != (3,) or not np.all(np.isfinite(omega)):
        raise InvalidArgumentError("omega must be a finite 3-vector")
    angle = float(np.linalg.norm(omega))
    if angle == 0.0:
        return IDENTITY.copy()
    n_dot_sigma = np.tensordot(omega / angle, PAULIS, axes=1)
    return math.cos(angle) * IDENTITY + 1j * math.sin(angle) * n_dot_sigma


def equal_up_to_global_phase(u: np.ndarray, v: np.ndarray, atol: float = 1e-10) -> bool:
    """True when v = e^{i g} u entrywise within atol for some real g."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        return False
    k = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    if abs(u[k]) < atol:
        return bool(np.allclose(v, 0, atol=atol))
    phase = v[k] / u[k]
    if abs(abs(phase) - 1.0) > 1e-6:
        return False
    phase /= abs(phase)
    return bool(np.allclose(phase * u, v, atol=atol, rtol=0))


def is_unitary(u: np.ndarray, atol: float = 1e-12) -> bool:
    u = np.asarray(u, dtype=complex)
    eye = np.eye(u.shape[-1])
    return bool(np.allclose(np.swapaxes(u.conj(), -1, -2) @ u, eye, atol=atol, rtol=0))


# ============ Gate Application ============

def apply_single_qubit(state: np.ndarray, qubit: int, u: np.ndarray) -> np.ndarray:
    """
    Apply a 2x2 gate to one tensor factor of the register.

    Args:
        state: amplitudes, shape (..., 2**Q)
        qubit: target qubit (0 = most significant bit)
        u: gate, shape (2, 2) or batched (..., 2, 2) matching the state batch

    Returns:
        New state array; the input is not modified
    """
    state = np.asarray(state, dtype=complex)
    n = num_qubits(state.shape[-1])
    _check_qubit(qubit, n)
    u = np.asarray(u, dtype=complex)
    if u.shape[-2:] != (2, 2):
        raise InvalidArgumentError(f"gate must be 2x2, got shape {u.shape}")

    batch = state.shape[:-1]
    psi = state.reshape(batch + (2 ** qubit, 2, 2 ** (n - qubit - 1)))
    out = np.einsum("...ij,...ajb->...aib", u, psi)
    return out.reshape(batch + (2 ** n,))


def _basis_bits(n: int, qubit: int) -> np.ndarray:
    return (np.arange(2 ** n) >> (n - 1 - qubit)) & 1


def apply_cz(state: np.ndarray, a: int, b: int) -> np.ndarray:
    """Controlled-Z between qubits a and b: negates amplitudes where both bits are 1."""
    state = np.asarray(state, dtype=complex)
    n = num_qubits(state.shape[-1])
    _check_qubit(a, n)
    _check_qubit(b, n)
    if a == b:
        raise InvalidArgumentError("CZ needs two distinct qubits")
    mask = (_basis_bits(n, a) & _basis_bits(n, b)).astype(bool)
    out = state.copy()
    out[..., mask] *= -1
    return out


# ============ Measurement ============

def reduced_density(state: np.ndarray, qubit: int) -> np.ndarray:
    """Partial trace over every qubit except `qubit`; returns shape (..., 2, 2)."""
    state = np.asarray(state, dtype=complex)
    n = num_qubits(state.shape[-1])
    _check_qubit(qubit, n)
    batch = state.shape[:-1]
    psi = state.reshape(batch + (2 ** qubit, 2, 2 ** (n - qubit - 1)))
    return np.einsum("...aib,...ajb->...ij", psi, psi.conj())


def fidelity_pure(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|<a|b>|^2 along the last axis (broadcasts over batch axes)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[-1] != b.shape[-1]:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    overlap = np.sum(a.conj() * b, axis=-1)
    return np.abs(overlap) ** 2


def fidelity_mixed(label: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """<label|rho|label> for a single-qubit label state and density matrices (..., 2, 2)."""
    label = np.asarray(label, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if label.shape != (2,) or rho.shape[-2:] != (2, 2):
        raise InvalidArgumentError("fidelity_mixed takes a qubit label and 2x2 density matrices")
    value = np.einsum("i,...ij,j->...", label.conj(), rho, label)
    return value.real
