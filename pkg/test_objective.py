"""
Tests for label states, both costs and the prediction rules
"""

import math

import numpy as np
import pytest

from src.circuit import CircuitSpec, ModelParams, init_params
from src.errors import InvalidArgumentError
from src.objective import (
    STRATEGY_BASIS,
    Classifier,
    ObjectiveConfig,
    confusion_matrix,
    cost_fidelity,
    cost_weighted,
    label_states,
    predict,
    predict_batch,
    predict_threshold,
    success_rate,
)
from src.qmath import fidelity_pure

ONE_QUBIT = CircuitSpec(qubits=1, layers=1, data_dim=2)
ORIGIN = np.zeros((1, 2))


def constant_params(polar: float, azimuth: float = 0.0) -> ModelParams:
    """Single-layer, zero-weight model whose output is the Bloch state (polar, azimuth) up to phase."""
    theta = np.zeros(ONE_QUBIT.shape)
    theta[0, 0, 0] = [polar, 0.0, -azimuth]
    return ModelParams(theta=theta, weights=np.zeros(ONE_QUBIT.shape))


# ============ Label States ============

def test_binary_labels_are_orthogonal():
    labels = label_states(2)
    assert np.array_equal(labels.overlaps, np.eye(2))


def test_three_labels_on_great_circle():
    labels = label_states(3)
    off = labels.overlaps[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.25, atol=1e-12)


def test_tetrahedron_labels():
    labels = label_states(4)
    assert np.all(np.diag(labels.overlaps) == 1.0)
    assert np.allclose(labels.overlaps[~np.eye(4, dtype=bool)], 1 / 3, atol=1e-12)
    assert np.allclose(labels.overlaps, labels.overlaps.T)


def test_octahedron_labels():
    labels = label_states(6)
    for c in range(0, 6, 2):
        assert labels.overlaps[c, c + 1] == pytest.approx(0.0, abs=1e-12)
    assert labels.overlaps[0, 2] == pytest.approx(0.5)


def test_overlaps_match_pairwise_fidelities():
    for classes in (2, 3, 4, 6):
        labels = label_states(classes)
        for s in range(classes):
            for c in range(classes):
                expected = fidelity_pure(labels.states[c], labels.states[s])
                assert labels.overlaps[s, c] == pytest.approx(expected, abs=1e-12)


def test_basis_labels():
    labels = label_states(4, qubits=2, strategy=STRATEGY_BASIS)
    assert labels.dim == 4
    assert np.array_equal(labels.overlaps, np.eye(4))
    with pytest.raises(InvalidArgumentError):
        label_states(5, qubits=2, strategy=STRATEGY_BASIS)


def test_unsupported_label_counts():
    for classes in (1, 5, 7):
        with pytest.raises(InvalidArgumentError):
            label_states(classes)


def test_thresholds_must_ascend():
    with pytest.raises(InvalidArgumentError):
        ObjectiveConfig(thresholds=(0.5, 0.25))
    with pytest.raises(InvalidArgumentError):
        ObjectiveConfig(thresholds=(0.5, 1.5))


# ============ Costs ============

def test_fidelity_cost_examples():
    labels = label_states(2)
    assert cost_fidelity((ORIGIN, [0]), ONE_QUBIT, constant_params(0.0), labels) == pytest.approx(0.0, abs=1e-15)
    assert cost_fidelity((ORIGIN, [1]), ONE_QUBIT, constant_params(0.0), labels) == pytest.approx(1.0)

    tetra = label_states(4)
    # Output at the vertex of class 0, scored against class 2
    assert cost_fidelity((ORIGIN, [2]), ONE_QUBIT, constant_params(0.0), tetra) == pytest.approx(2 / 3)


def test_fidelity_cost_rejects_unknown_class():
    with pytest.raises(InvalidArgumentError):
        cost_fidelity((ORIGIN, [2]), ONE_QUBIT, constant_params(0.0), label_states(2))


def test_weighted_cost_examples():
    labels = label_states(2)
    alpha = np.ones(2)
    assert cost_weighted((ORIGIN, [0]), ONE_QUBIT, constant_params(0.0), alpha, labels) == pytest.approx(0.0, abs=1e-15)
    assert cost_weighted((ORIGIN, [0]), ONE_QUBIT, constant_params(math.pi), alpha, labels) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        cost_weighted((ORIGIN, [0]), ONE_QUBIT, constant_params(0.0), np.ones(3), labels)


def test_weighted_cost_zero_when_alpha_matches_targets():
    # Output between |0> and |1>: F = (1/2, 1/2); alpha = (2, 0) gives alpha*F = (1, 0) = Y for class 0
    labels = label_states(2)
    cost = cost_weighted((ORIGIN, [0]), ONE_QUBIT, constant_params(math.pi / 2), np.array([2.0, 0.0]), labels)
    assert cost == pytest.approx(0.0, abs=1e-12)


def test_weighted_cost_multi_qubit_uses_reduced_states():
    spec = CircuitSpec(qubits=2, layers=1, data_dim=2)
    theta = np.zeros(spec.shape)
    theta[1, 0, 0] = [math.pi, 0, 0]          # qubit 1 flipped: |01>
    params = ModelParams(theta=theta, weights=np.zeros(spec.shape))
    labels = label_states(2)
    alpha = np.ones((2, 2))
    # Class 0: qubit 0 matches (residuals 0), qubit 1 is |1> (residuals -1 and +1)
    assert cost_weighted((ORIGIN, [0]), spec, params, alpha, labels) == pytest.approx(1.0)
    assert cost_weighted((ORIGIN, [0]), spec, params, alpha[:, :1], labels, measured_qubits=[0]) == pytest.approx(0.0)
    with pytest.raises(InvalidArgumentError):
        cost_weighted((ORIGIN, [0]), spec, params, np.ones(2), labels)


def test_costs_invariant_under_permutation():
    spec = CircuitSpec(qubits=1, layers=3, data_dim=2)
    params = init_params(spec, seed=1, alpha_shape=(2,))
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(30, 2))
    y = rng.integers(0, 2, size=30)
    order = rng.permutation(30)
    labels = label_states(2)
    assert cost_fidelity((X, y), spec, params, labels) == pytest.approx(
        cost_fidelity((X[order], y[order]), spec, params, labels), rel=1e-12)
    assert cost_weighted((X, y), spec, params, params.alpha, labels) == pytest.approx(
        cost_weighted((X[order], y[order]), spec, params, params.alpha, labels), rel=1e-12)


# ============ Prediction ============

def test_predict_examples():
    assert predict(ONE_QUBIT, constant_params(0.0), [0, 0], label_states(2)) == 0
    assert predict(ONE_QUBIT, constant_params(math.pi), [0, 0], label_states(2)) == 1

    tetra = label_states(4)
    beta = math.acos(-1 / 3)
    for m in range(3):
        params = constant_params(beta, 2 * math.pi * m / 3)
        assert predict(ONE_QUBIT, params, [0, 0], tetra) == m + 1


def test_predict_tie_goes_to_lowest_class():
    labels = label_states(3)
    # Halfway between the labels at polar 0 and 2pi/3, opposite the third
    assert predict(ONE_QUBIT, constant_params(math.pi / 3), [0, 0], labels) == 0


def test_predict_invariant_under_alpha_scaling():
    spec = CircuitSpec(qubits=1, layers=2, data_dim=2)
    params = init_params(spec, seed=4)
    X = np.random.default_rng(2).uniform(-1, 1, size=(50, 2))
    labels = label_states(4)
    alpha = np.array([0.7, 1.3, 0.9, 1.1])
    assert np.array_equal(predict_batch(spec, params, X, labels, alpha),
                          predict_batch(spec, params, X, labels, 3.5 * alpha))


def test_predict_threshold_examples():
    assert predict_threshold(ONE_QUBIT, constant_params(0.0), [0, 0], [0.5]) == 0
    assert predict_threshold(ONE_QUBIT, constant_params(math.pi), [0, 0], [0.5]) == 1
    # P(0) = cos^2(polar/2) = 0.6 falls between 0.5 and 0.75
    polar = 2 * math.acos(math.sqrt(0.6))
    assert predict_threshold(ONE_QUBIT, constant_params(polar), [0, 0], [0.25, 0.5, 0.75]) == 1
    with pytest.raises(InvalidArgumentError):
        predict_threshold(ONE_QUBIT, constant_params(0.0), [0, 0], [0.75, 0.5])


def test_threshold_agrees_with_argmax_for_binary_models():
    spec = CircuitSpec(qubits=1, layers=3, data_dim=2)
    params = init_params(spec, seed=8)
    labels = label_states(2)
    for x in np.random.default_rng(3).uniform(-1, 1, size=(40, 2)):
        assert predict(spec, params, x, labels) == predict_threshold(spec, params, x, [0.5])


# ============ Classifier ============

def test_success_rate_and_confusion():
    model = Classifier(spec=ONE_QUBIT, params=constant_params(0.0), num_classes=2,
                       objective=ObjectiveConfig(cost_kind="f"))
    X = np.zeros((3, 2))
    assert success_rate(model, (X, [0, 0, 0])) == 1.0
    assert success_rate(model, (X, [0, 1, 0])) == pytest.approx(2 / 3)
    assert confusion_matrix(model, (X, [0, 1, 0])).tolist() == [[2, 0], [1, 0]]
    with pytest.raises(InvalidArgumentError):
        success_rate(model, (np.zeros((0, 2)), []))


def test_constant_classifier_scores_half_on_balanced_set():
    model = Classifier(spec=ONE_QUBIT, params=constant_params(0.3), num_classes=2,
                       objective=ObjectiveConfig(cost_kind="f"))
    X = np.random.default_rng(4).uniform(-1, 1, size=(200, 2))
    y = np.array([0, 1] * 100)
    assert success_rate(model, (X, y)) == 0.5


def test_classifier_threshold_mode():
    model = Classifier(spec=ONE_QUBIT, params=constant_params(math.pi), num_classes=2,
                       objective=ObjectiveConfig(cost_kind="f", thresholds=(0.5,)))
    assert model.predict(np.zeros((2, 2))).tolist() == [1, 1]
    spec = CircuitSpec(qubits=2, layers=1, data_dim=2)
    with pytest.raises(InvalidArgumentError):
        Classifier(spec=spec, params=init_params(spec, 0), num_classes=2,
                   objective=ObjectiveConfig(thresholds=(0.5,)))


def test_multi_qubit_fidelity_classifier_uses_basis_states():
    spec = CircuitSpec(qubits=2, layers=1, data_dim=2)
    model = Classifier(spec=spec, params=init_params(spec, 0), num_classes=4,
                       objective=ObjectiveConfig(cost_kind="f"))
    assert model.labels.strategy == STRATEGY_BASIS
    assert model.scores(np.zeros((5, 2))).shape == (5, 4)
