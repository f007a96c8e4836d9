"""
Problems module for the re-uploading classifier

The nine benchmark problems: exact labeling rules, seeded generation of
uniform points on [-1, 1]^d and dataset files (CSV plus a JSON manifest).

Points come from xoshiro256** seeded through splitmix64, so a given
(problem, n, seed) produces the same dataset on every platform. Boundary
points go to the outer or intermediate class (strict inequalities).

Usage:
    from src.problems import generate_dataset, class_balance

    train = generate_dataset("circle", 200, seed=0)
    print(class_balance(train))
"""

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config import TEST_SIZE, TRAIN_SIZE_BY_DIM
from src.errors import DatasetFormatError, InvalidArgumentError

GENERATOR_NAME = "xoshiro256**/splitmix64"

MASK64 = (1 << 64) - 1

# ============ Geometry Constants ============

# Circle and hypersphere: |x|^2 < 2/pi
CIRCLE_R2 = 2 / math.pi

# Annulus radii: r1^2 = 0.8 - 2/pi, r2^2 = 0.8 (the ring has area 2 of 4)
ANNULUS_R1_SQ = 0.8 - 2 / math.pi
ANNULUS_R2_SQ = 0.8

# Sphere of radius (3/pi)^(1/3): volume 4 of 8
SPHERE_R2 = (3 / math.pi) ** (2 / 3)

# 3-circles: (center, radius) of classes 1..3, first match wins, rest is class 0.
# Reconstructed geometry: only the layout of the three disks is fixed, not the constants.
THREE_CIRCLES: List[Tuple[Tuple[float, float], float]] = [
    ((-1.0, 1.0), 1.0),
    ((1.0, 0.0), math.sqrt(6 / math.pi - 1)),
    ((-0.5, -0.5), 0.5),
]


@dataclass(frozen=True)
class ProblemDef:
    id: str
    dim: int
    num_classes: int
    description: str = ""
    train_size: Optional[int] = None
    test_size: int = TEST_SIZE

    @property
    def default_train_size(self) -> int:
        return self.train_size or TRAIN_SIZE_BY_DIM[self.dim]


PROBLEMS: Dict[str, ProblemDef] = {
    p.id: p for p in [
        ProblemDef("circle", 2, 2, "inside/outside a circle of half the square's area"),
        ProblemDef("3-circles", 2, 4, "three disks and the space between them"),
        ProblemDef("hypersphere", 4, 2, "inside/outside a 4-d ball with |x|^2 < 2/pi"),
        ProblemDef("annulus", 2, 3, "inner disk, ring and outside"),
        ProblemDef("non-convex", 2, 2, "either side of x2 = -2 x1 + 1.5 sin(pi x1)"),
        ProblemDef("binary-annulus", 2, 2, "inside/outside the ring"),
        ProblemDef("sphere", 3, 2, "inside/outside a ball of half the cube's volume", train_size=500),
        ProblemDef("squares", 2, 4, "the four quadrants"),
        ProblemDef("wavy-lines", 2, 4, "sign patterns of x2 - sin(pi x1) -+ x1"),
    ]
}


def get_problem(problem: str) -> ProblemDef:
    try:
        return PROBLEMS[problem]
    except KeyError:
        known = ", ".join(PROBLEMS)
        raise InvalidArgumentError(f"unknown problem '{problem}' (known: {known})") from None


# ============ Labeling ============

def _radius_sq(X: np.ndarray) -> np.ndarray:
    return np.sum(X * X, axis=1)


def _label_circle(X):
    return np.where(_radius_sq(X) < CIRCLE_R2, 0, 1)


def _label_three_circles(X):
    labels = np.zeros(len(X), dtype=int)
    for cls, ((cx, cy), radius) in enumerate(THREE_CIRCLES, start=1):
        inside = (X[:, 0] - cx) ** 2 + (X[:, 1] - cy) ** 2 < radius ** 2
        labels = np.where((labels == 0) & inside, cls, labels)
    return labels


def _label_annulus(X):
    r2 = _radius_sq(X)
    return np.where(r2 < ANNULUS_R1_SQ, 0, np.where(r2 < ANNULUS_R2_SQ, 1, 2))


def _label_binary_annulus(X):
    r2 = _radius_sq(X)
    return np.where((r2 >= ANNULUS_R1_SQ) & (r2 < ANNULUS_R2_SQ), 0, 1)


def _label_non_convex(X):
    border = -2 * X[:, 0] + 1.5 * np.sin(math.pi * X[:, 0])
    return np.where(X[:, 1] < border, 0, 1)


def _label_sphere(X):
    return np.where(_radius_sq(X) < SPHERE_R2, 0, 1)


def _label_squares(X):
    # Counter-clockwise from (+,+); zero counts as negative
    right = X[:, 0] > 0
    up = X[:, 1] > 0
    return np.select([right & up, ~right & up, ~right & ~up], [0, 1, 2], default=3)


def _label_wavy_lines(X):
    wave = X[:, 1] - np.sin(math.pi * X[:, 0])
    above_first = wave - X[:, 0] > 0
    above_second = wave + X[:, 0] > 0
    return 2 * above_first.astype(int) + above_second.astype(int)


LABELERS = {
    "circle": _label_circle,
    "3-circles": _label_three_circles,
    "hypersphere": _label_circle,
    "annulus": _label_annulus,
    "non-convex": _label_non_convex,
    "binary-annulus": _label_binary_annulus,
    "sphere": _label_sphere,
    "squares": _label_squares,
    "wavy-lines": _label_wavy_lines,
}


def label_points(problem: str, X) -> np.ndarray:
    """Class index of every row of X."""
    definition = get_problem(problem)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != definition.dim:
        raise InvalidArgumentError(f"{problem} points have dimension {definition.dim}, got shape {X.shape}")
    return LABELERS[problem](X).astype(int)


def label_point(problem: str, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"expected a single point, got shape {x.shape}")
    return int(label_points(problem, x[None])[0])


# ============ PRNG ============

def splitmix64(state: int) -> Tuple[int, int]:
    """One splitmix64 step: returns (new state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    """xoshiro256** with its 256-bit state filled from splitmix64(seed)."""

    def __init__(self, seed: int):
        state = int(seed) & MASK64
        self.s = []
        for _ in range(4):
            state, value = splitmix64(state)
            self.s.append(value)

    def next_uint64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_double(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * 2.0 ** -53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.next_double()


# ============ Datasets ============

@dataclass(frozen=True)
class DataPoint:
    x: Tuple[float, ...]
    class_index: int


@dataclass
class Dataset:
    """Labeled points of one problem; X has shape (n, d), y shape (n,)."""
    problem: str
    X: np.ndarray
    y: np.ndarray
    seed: Optional[int] = None
    generator: str = GENERATOR_NAME

    def __len__(self) -> int:
        return len(self.y)

    @property
    def points(self) -> List[DataPoint]:
        return [DataPoint(tuple(float(v) for v in row), int(c)) for row, c in zip(self.X, self.y)]

    @property
    def num_classes(self) -> int:
        return get_problem(self.problem).num_classes

    def manifest(self) -> Dict:
        return {"problem": self.problem, "n": len(self), "seed": self.seed, "generator": self.generator}


def generate_dataset(problem: str, n: int, seed: int) -> Dataset:
    """
    n points uniform on [-1, 1]^d, labeled by the problem's rule.

    Coordinates are drawn point by point, component by component, from one
    xoshiro256** stream, so the first k points of a larger set equal the
    k-point set with the same seed.
    """
    definition = get_problem(problem)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = Xoshiro256StarStar(seed)
    X = np.array([[rng.uniform(-1.0, 1.0) for _ in range(definition.dim)] for _ in range(n)])
    return Dataset(problem=problem, X=X, y=label_points(problem, X), seed=seed)


def class_balance(dataset: Dataset) -> np.ndarray:
    """Fraction of points in each class."""
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot compute the class balance of an empty dataset")
    counts = np.bincount(dataset.y, minlength=dataset.num_classes)
    return counts / counts.sum()


def dataset_filename(problem: str, n: int, seed: int) -> str:
    return f"{problem}_n{n}_s{seed}.csv"


def _manifest_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def save_dataset(dataset: Dataset, path) -> Path:
    """Write the CSV (header x1..xd,class) and its JSON manifest next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = dataset.X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{i + 1}" for i in range(d)] + ["class"])
        for row, c in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [int(c)])
    with open(_manifest_path(path), "w", encoding="utf-8") as f:
        json.dump(dataset.manifest(), f, indent=2)
    return path


def load_dataset(path, problem: Optional[str] = None, verify: bool = False) -> Dataset:
    """
    Read a dataset CSV. The problem comes from the manifest when present,
    otherwise from the `problem` argument.

    Args:
        path: CSV file written by save_dataset
        problem: problem id, required without a manifest
        verify: check every stored label against the labeling rule
    """
    path = Path(path)
    manifest = {}
    manifest_path = _manifest_path(path)
    if os.path.exists(manifest_path):
        try:
            with open(manifest_path, encoding="utf-8") as f:
                manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid manifest: {e}", path=manifest_path) from None
    problem = manifest.get("problem", problem)
    if problem is None:
        raise DatasetFormatError("dataset has no manifest and no problem was given", path=path)
    definition = get_problem(problem)

    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    expected_header = [f"x{i + 1}" for i in range(definition.dim)] + ["class"]
    if not rows or rows[0] != expected_header:
        raise DatasetFormatError(f"expected header {','.join(expected_header)}", path=path)
    try:
        X = np.array([[float(v) for v in row[:-1]] for row in rows[1:]], dtype=float)
        y = np.array([int(row[-1]) for row in rows[1:]], dtype=int)
    except (ValueError, IndexError) as e:
        raise DatasetFormatError(f"malformed row: {e}", path=path) from None
    if len(y) == 0:
        raise DatasetFormatError("dataset has no rows", path=path)
    if X.shape != (len(y), definition.dim):
        raise DatasetFormatError(f"rows must have {definition.dim} coordinates and a class", path=path)
    if np.any(np.abs(X) > 1) or np.any(y < 0) or np.any(y >= definition.num_classes):
        raise DatasetFormatError("coordinates or classes out of range", path=path)
    if "n" in manifest and manifest["n"] != len(y):
        raise DatasetFormatError(f"manifest says {manifest['n']} rows, file has {len(y)}", path=path)
    if verify and not np.array_equal(y, label_points(problem, X)):
        raise DatasetFormatError("stored labels disagree with the labeling rule", path=path)
    return Dataset(problem=problem, X=X, y=y, seed=manifest.get("seed"),
                   generator=manifest.get("generator", GENERATOR_NAME))
