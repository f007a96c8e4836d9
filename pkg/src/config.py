"""
Configuration for the re-uploading classifier

Module-level defaults, each overridable from the environment. app.py calls
load_dotenv() before importing this module, so a local .env file works too.
"""

import os
from typing import Dict, Tuple


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


# ============ Output & Runtime ============
OUTPUT_DIR = os.environ.get("REUPLOAD_OUTPUT_DIR", "results")
LOG_LEVEL = os.environ.get("REUPLOAD_LOG_LEVEL", "INFO").upper()

# Sweep cells run in a process pool when > 1
WORKERS = _env_int("REUPLOAD_WORKERS", 1)

# Best-of-N random initializations per trained cell
RESTARTS = _env_int("REUPLOAD_RESTARTS", 5)

# Seed used for the training set; the test set uses DATA_SEED + TEST_SEED_OFFSET
DATA_SEED = _env_int("REUPLOAD_DATA_SEED", 0)
TEST_SEED_OFFSET = 1_000_003

# ============ Benchmark Grid ============
DEFAULT_LAYERS: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 8, 10)
TEST_SIZE = 4000

# Training-set size by data dimension
TRAIN_SIZE_BY_DIM: Dict[int, int] = {
    2: 200,
    3: 500,
    4: 1000,
}

# ============ Minimizer Defaults ============
LBFGS_DEFAULTS = {
    "memory": 10,
    "max_iterations": 500,
    "gtol": 1e-6,
    "ftol": 1e-12,
    "c1": 1e-4,
    "c2": 0.9,
}

SGD_DEFAULTS = {
    "learning_rate": 0.05,
    "batch_size": 20,
    "epochs": 100,
}

# ============ Model Files ============
MODEL_FORMAT_VERSION = 1
