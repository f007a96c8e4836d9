"""
Tests for the benchmark problems, the point generator and dataset files
"""

import json
import math
from functools import lru_cache

import numpy as np
import pytest

from src.errors import DatasetFormatError, InvalidArgumentError
from src.problems import (
    ANNULUS_R1_SQ,
    PROBLEMS,
    Xoshiro256StarStar,
    class_balance,
    dataset_filename,
    generate_dataset,
    label_point,
    label_points,
    load_dataset,
    save_dataset,
    splitmix64,
)


def uniform_cloud(dim: int, n: int = 100_000) -> np.ndarray:
    return np.random.default_rng(2024).uniform(-1, 1, size=(n, dim))


@lru_cache(maxsize=None)
def generated_balance(problem: str, n: int = 100_000, seed: int = 11) -> tuple:
    return tuple(class_balance(generate_dataset(problem, n, seed)).tolist())


# ============ Labeling Rules ============

def test_label_examples():
    assert label_point("circle", [0, 0]) == 0
    assert label_point("circle", [1, 1]) == 1
    assert label_point("annulus", [math.sqrt(0.8 - 1 / math.pi), 0]) == 1
    assert label_point("annulus", [0, 0]) == 0
    assert label_point("annulus", [0.95, 0.95]) == 2
    assert label_point("binary-annulus", [math.sqrt(0.8 - 1 / math.pi), 0]) == 0
    assert label_point("wavy-lines", [0, 0]) == 0
    assert label_point("squares", [0.5, 0.5]) == 0
    assert label_point("squares", [-0.5, 0.5]) == 1
    assert label_point("squares", [-0.5, -0.5]) == 2
    assert label_point("squares", [0.5, -0.5]) == 3
    assert label_point("3-circles", [-0.8, 0.8]) == 1
    assert label_point("3-circles", [0.9, 0.0]) == 2
    assert label_point("non-convex", [0.0, -0.5]) == 0
    assert label_point("sphere", [0, 0, 0]) == 0
    assert label_point("hypersphere", [0.9, 0.9, 0.0, 0.0]) == 1


def test_squares_axis_counts_as_negative():
    assert label_point("squares", [0.0, 0.5]) == 1
    assert label_point("squares", [0.5, 0.0]) == 3


def test_wrong_dimension_rejected():
    with pytest.raises(InvalidArgumentError):
        label_point("circle", [0.1, 0.2, 0.3])
    with pytest.raises(InvalidArgumentError):
        label_points("sphere", np.zeros((4, 2)))
    with pytest.raises(InvalidArgumentError):
        label_point("moons", [0, 0])


@pytest.mark.parametrize("problem, cls, expected", [
    ("circle", 0, 0.5),
    ("sphere", 0, 0.5),
    ("annulus", 1, 0.5),
    ("binary-annulus", 0, 0.5),
    ("hypersphere", 0, 0.125),
    ("squares", 0, 0.25),
    ("squares", 2, 0.25),
])
def test_class_areas(problem, cls, expected):
    assert generated_balance(problem)[cls] == pytest.approx(expected, abs=0.01)


def test_annulus_inner_disk_area():
    assert generated_balance("annulus")[0] == pytest.approx(math.pi * ANNULUS_R1_SQ / 4, abs=0.01)


def test_every_class_occurs():
    for problem, definition in PROBLEMS.items():
        labels = label_points(problem, uniform_cloud(definition.dim, 20_000))
        assert set(labels.tolist()) == set(range(definition.num_classes)), problem


# ============ Generator ============

def test_splitmix64_reference_output():
    _, value = splitmix64(0)
    assert value == 0xE220A8397B1DCDAF


def test_xoshiro_seeding_fills_state_from_splitmix64():
    assert Xoshiro256StarStar(0).s == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
                                       0x06C45D188009454F, 0xF88BB8A8724C81EC]


def test_xoshiro_reference_outputs():
    rng = Xoshiro256StarStar(0)
    rng.s = [1, 2, 3, 4]
    assert [rng.next_uint64() for _ in range(3)] == [11520, 0, 1509978240]


def test_xoshiro_is_deterministic_and_in_range():
    a, b = Xoshiro256StarStar(7), Xoshiro256StarStar(7)
    draws = [a.next_double() for _ in range(1000)]
    assert draws == [b.next_double() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in draws)
    assert draws != [Xoshiro256StarStar(8).next_double() for _ in range(1000)]


def test_generate_dataset_is_deterministic():
    first = generate_dataset("squares", 100, seed=3)
    second = generate_dataset("squares", 100, seed=3)
    assert np.array_equal(first.X, second.X)
    assert np.array_equal(first.y, second.y)
    assert not np.array_equal(first.X, generate_dataset("squares", 100, seed=4).X)


def test_generate_dataset_prefix_property():
    small = generate_dataset("sphere", 10, seed=5)
    large = generate_dataset("sphere", 50, seed=5)
    assert np.array_equal(large.X[:10], small.X)


def test_generated_labels_follow_rule():
    for problem in PROBLEMS:
        data = generate_dataset(problem, 200, seed=1)
        assert data.X.shape == (200, PROBLEMS[problem].dim)
        assert np.all(np.abs(data.X) <= 1)
        assert np.array_equal(data.y, label_points(problem, data.X))
        assert data.points[0].class_index == data.y[0]


def test_class_balance():
    data = generate_dataset("wavy-lines", 400, seed=2)
    balance = class_balance(data)
    assert balance.shape == (4,)
    assert balance.sum() == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        generate_dataset("circle", 0, seed=0)


# ============ Files ============

def test_dataset_round_trip(tmp_path):
    data = generate_dataset("annulus", 60, seed=11)
    path = save_dataset(data, tmp_path / dataset_filename("annulus", 60, 11))
    assert path.name == "annulus_n60_s11.csv"
    loaded = load_dataset(path, verify=True)
    assert loaded.problem == "annulus"
    assert loaded.seed == 11
    assert np.array_equal(loaded.X, data.X)
    assert np.array_equal(loaded.y, data.y)


def test_load_without_manifest_needs_problem(tmp_path):
    path = save_dataset(generate_dataset("circle", 5, seed=0), tmp_path / "c.csv")
    path.with_suffix(".json").unlink()
    with pytest.raises(DatasetFormatError):
        load_dataset(path)
    assert len(load_dataset(path, problem="circle")) == 5


def test_corrupted_files_rejected(tmp_path):
    path = save_dataset(generate_dataset("circle", 5, seed=0), tmp_path / "c.csv")
    lines = path.read_text().splitlines()

    path.write_text("\n".join(["a,b,class"] + lines[1:]) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)

    path.write_text("\n".join(lines[:1] + ["0.1,not-a-number,0"] + lines[2:]) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)

    path.write_text("\n".join(lines[:1] + ["1.5,0.0,1"] + lines[2:]) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)

    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetFormatError) as excinfo:
        load_dataset(path)
    assert "manifest" in str(excinfo.value)


def test_verify_catches_wrong_labels(tmp_path):
    data = generate_dataset("circle", 20, seed=0)
    data.y = 1 - data.y
    path = save_dataset(data, tmp_path / "flipped.csv")
    assert len(load_dataset(path)) == 20
    with pytest.raises(DatasetFormatError):
        load_dataset(path, verify=True)


def test_manifest_contents(tmp_path):
    path = save_dataset(generate_dataset("squares", 8, seed=9), tmp_path / "s.csv")
    manifest = json.loads(path.with_suffix(".json").read_text())
    assert manifest == {"problem": "squares", "n": 8, "seed": 9, "generator": "xoshiro256**/splitmix64"}
