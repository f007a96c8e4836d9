"""
Model files for the re-uploading classifier

A trained Classifier is stored as one JSON document:

    {
      "format_version": 1,
      "spec": {"qubits": 1, "layers": 4, "data_dim": 2, "entangled": false},
      "num_classes": 2,
      "objective": {"cost_kind": "weighted-fidelity", ...},
      "theta": [...], "weights": [...], "alpha": [...] | null,
      "seed": 0,
      ...extra metadata
    }

Floats are written with full precision, so a loaded model reproduces the
saved model's predictions bitwise.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src.circuit import CircuitSpec, ModelParams
from src.config import MODEL_FORMAT_VERSION
from src.errors import ModelFormatError, ReuploadError
from src.objective import Classifier, ObjectiveConfig

CORE_KEYS = {"format_version", "spec", "num_classes", "objective", "theta", "weights", "alpha", "seed"}


def model_to_dict(model: Classifier, extra: Optional[Dict] = None) -> Dict:
    data = dict(extra or {})
    data.update({
        "format_version": MODEL_FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "num_classes": model.num_classes,
        "objective": model.objective.to_dict(),
        "theta": model.params.theta.tolist(),
        "weights": model.params.weights.tolist(),
        "alpha": None if model.params.alpha is None else model.params.alpha.tolist(),
        "seed": model.seed,
    })
    return data


def model_from_dict(data: Dict, path=None) -> Classifier:
    if not isinstance(data, dict):
        raise ModelFormatError("model file must hold a JSON object", path=path)
    version = data.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {version}, expected {MODEL_FORMAT_VERSION}",
            path=path, kind="version-mismatch",
        )
    try:
        spec = CircuitSpec.from_dict(data["spec"])
        alpha = data.get("alpha")
        params = ModelParams(
            theta=np.array(data["theta"], dtype=float),
            weights=np.array(data["weights"], dtype=float),
            alpha=None if alpha is None else np.array(alpha, dtype=float),
        )
        return Classifier(
            spec=spec,
            params=params,
            num_classes=int(data["num_classes"]),
            objective=ObjectiveConfig.from_dict(data.get("objective", {})),
            seed=data.get("seed"),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, ReuploadError) as e:
        raise ModelFormatError(f"invalid model: {e}", path=path) from None


def save_model(model: Classifier, path, extra: Optional[Dict] = None) -> Path:
    """Write atomically: a temporary file in the same directory replaces the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(model_to_dict(model, extra), indent=2)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def load_model(path) -> Classifier:
    """Read a model file; any defect raises ModelFormatError and nothing partial is returned."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid JSON: {e}", path=path) from None
    return model_from_dict(data, path=path)


def model_metadata(path) -> Dict:
    """Extra keys stored alongside the model (problem, data seed, ...)."""
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"invalid JSON: {e}", path=path) from None
    return {k: v for k, v in data.items() if k not in CORE_KEYS} if isinstance(data, dict) else {}
