"""
Optimize module for the re-uploading classifier

Classical minimizers over a flat parameter vector:
    - lbfgs_minimize: limited-memory BFGS (two-loop recursion) with a strong
      Wolfe line search (bracketing phase plus zoom with cubic/quadratic
      interpolation)
    - lbfgsb_minimize: scipy's L-BFGS-B, unbounded, as a cross-check
    - sgd_minimize: mini-batch gradient descent with per-epoch shuffles
    - multi_restart: best of R seeded runs

Objectives are callables returning (value, gradient); they never raise on
divergence, a non-finite value simply fails the Armijo test.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from src.config import LBFGS_DEFAULTS, SGD_DEFAULTS
from src.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

FunGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]
BatchFunGrad = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]

# Curvature pairs with s.y below this (relative) are skipped
CURVATURE_EPS = 1e-10


@dataclass
class LbfgsConfig:
    memory: int = LBFGS_DEFAULTS["memory"]
    max_iterations: int = LBFGS_DEFAULTS["max_iterations"]
    gtol: float = LBFGS_DEFAULTS["gtol"]
    ftol: float = LBFGS_DEFAULTS["ftol"]
    c1: float = LBFGS_DEFAULTS["c1"]
    c2: float = LBFGS_DEFAULTS["c2"]
    max_line_search: int = 20

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise InvalidArgumentError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.memory < 1:
            raise InvalidArgumentError(f"memory must be >= 1, got {self.memory}")
        if self.max_iterations < 0 or self.gtol < 0 or self.ftol < 0:
            raise InvalidArgumentError("iteration limit and tolerances must be non-negative")


@dataclass
class SgdConfig:
    learning_rate: float = SGD_DEFAULTS["learning_rate"]
    batch_size: int = SGD_DEFAULTS["batch_size"]
    epochs: int = SGD_DEFAULTS["epochs"]
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidArgumentError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class TrainResult:
    """Outcome of one minimization (or the best of several)."""
    params: Any
    cost: float
    trace: List[float]
    iterations: int
    converged: bool
    message: str = ""
    evaluations: int = 0
    seed: Optional[int] = None
    restart_costs: List[float] = field(default_factory=list)


# ============ Strong Wolfe Line Search ============

class _LineFunction:
    """phi(a) = f(x + a d), caching the gradient that comes with every value."""

    def __init__(self, fun_grad: FunGrad, x: np.ndarray, direction: np.ndarray):
        self.fun_grad = fun_grad
        self.x = x
        self.direction = direction
        self.evaluations = 0
        self._cache = {}

    def __call__(self, a: float) -> float:
        return self._eval(a)[0]

    def slope(self, a: float) -> float:
        return float(self._eval(a)[1] @ self.direction)

    def gradient(self, a: float) -> np.ndarray:
        return self._eval(a)[1]

    def _eval(self, a: float):
        if a not in self._cache:
            value, grad = self.fun_grad(self.x + a * self.direction)
            self.evaluations += 1
            value = float(value)
            if not math.isfinite(value):
                value = math.inf
            self._cache[a] = (value, np.asarray(grad, dtype=float))
        return self._cache[a]


def _cubicmin(a, fa, fpa, b, fb, c, fc) -> Optional[float]:
    """Minimizer of the cubic through (a,fa), (b,fb), (c,fc) with slope fpa at a."""
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            db = b - a
            dc = c - a
            denom = (db * dc) ** 2 * (db - dc)
            rhs = np.array([fb - fa - fpa * db, fc - fa - fpa * dc])
            A, B = np.array([[dc ** 2, -db ** 2], [-dc ** 3, db ** 3]]) @ rhs / denom
            xmin = a + (-B + np.sqrt(B * B - 3 * A * fpa)) / (3 * A)
        except ArithmeticError:
            return None
    return float(xmin) if np.isfinite(xmin) else None


def _quadmin(a, fa, fpa, b, fb) -> Optional[float]:
    """Minimizer of the quadratic through (a,fa), (b,fb) with slope fpa at a."""
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            db = b - a
            B = (fb - fa - fpa * db) / (db * db)
            xmin = a - fpa / (2.0 * B)
        except ArithmeticError:
            return None
    return float(xmin) if np.isfinite(xmin) else None


def _zoom(phi: _LineFunction, a_lo, a_hi, phi_lo, phi_hi, dphi_lo,
          phi0, dphi0, c1, c2, max_iter) -> Optional[float]:
    a_rec, phi_rec = 0.0, phi0
    for i in range(max_iter):
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        width = hi - lo
        a_j = None
        if i > 0:
            a_j = _cubicmin(a_lo, phi_lo, dphi_lo, a_hi, phi_hi, a_rec, phi_rec)
        if a_j is None or a_j > hi - 0.2 * width or a_j < lo + 0.2 * width:
            a_j = _quadmin(a_lo, phi_lo, dphi_lo, a_hi, phi_hi)
            if a_j is None or a_j > hi - 0.1 * width or a_j < lo + 0.1 * width:
                a_j = a_lo + 0.5 * (a_hi - a_lo)
        if a_j == a_lo or a_j == a_hi:
            return None

        phi_j = phi(a_j)
        if phi_j > phi0 + c1 * a_j * dphi0 or phi_j >= phi_lo:
            a_rec, phi_rec = a_hi, phi_hi
            a_hi, phi_hi = a_j, phi_j
            continue
        dphi_j = phi.slope(a_j)
        if abs(dphi_j) <= -c2 * dphi0:
            return a_j
        if dphi_j * (a_hi - a_lo) >= 0:
            a_rec, phi_rec = a_hi, phi_hi
            a_hi, phi_hi = a_lo, phi_lo
        else:
            a_rec, phi_rec = a_lo, phi_lo
        a_lo, phi_lo, dphi_lo = a_j, phi_j, dphi_j
    return None


def strong_wolfe_search(phi: _LineFunction, phi0: float, dphi0: float, alpha1: float,
                        c1: float, c2: float, max_iter: int) -> Optional[float]:
    """
    Step length satisfying the strong Wolfe conditions, or None.

    Starts at alpha1 and doubles until a bracket is found, then zooms.
    """
    a_prev, phi_prev, dphi_prev = 0.0, phi0, dphi0
    a = alpha1
    for i in range(max_iter):
        phi_a = phi(a)
        if phi_a > phi0 + c1 * a * dphi0 or (i > 0 and phi_a >= phi_prev):
            return _zoom(phi, a_prev, a, phi_prev, phi_a, dphi_prev, phi0, dphi0, c1, c2, max_iter)
        dphi_a = phi.slope(a)
        if abs(dphi_a) <= -c2 * dphi0:
            return a
        if dphi_a >= 0:
            return _zoom(phi, a, a_prev, phi_a, phi_prev, dphi_a, phi0, dphi0, c1, c2, max_iter)
        a_prev, phi_prev, dphi_prev = a, phi_a, dphi_a
        a = 2.0 * a
    return None


# ============ L-BFGS ============

def two_loop_direction(grad: np.ndarray, pairs) -> np.ndarray:
    """H_k * grad by the two-loop recursion over (s, y, rho) pairs, oldest first."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += s * (a - b)
    return q


def lbfgs_minimize(fun_grad: FunGrad, x0, config: Optional[LbfgsConfig] = None,
                   callback: Optional[Callable[[int, np.ndarray, float], None]] = None) -> TrainResult:
    """
    Minimize with L-BFGS and a strong Wolfe line search.

    Args:
        fun_grad: returns (value, gradient) at a flat parameter vector
        x0: starting point
        config: memory, tolerances, Wolfe constants
        callback: called as callback(iteration, x, value) after each accepted step

    Returns:
        TrainResult; converged is False when the iteration limit is hit or the
        line search fails, and params is then the best point reached
    """
    config = config or LbfgsConfig()
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    f = float(f)
    g = np.asarray(g, dtype=float)
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        raise InvalidArgumentError("objective is not finite at the initial point")

    pairs = deque(maxlen=config.memory)
    trace = [f]
    evaluations = 1
    message = "maximum iterations reached"
    converged = False
    iteration = 0

    for iteration in range(1, config.max_iterations + 1):
        if np.max(np.abs(g)) <= config.gtol:
            converged, message, iteration = True, "gradient norm below tolerance", iteration - 1
            break

        direction = -two_loop_direction(g, list(pairs))
        slope = float(g @ direction)
        if slope >= 0:
            pairs.clear()
            direction = -g
            slope = float(g @ direction)
        alpha1 = 1.0 if pairs else min(1.0, 1.0 / float(np.linalg.norm(g)))

        phi = _LineFunction(fun_grad, x, direction)
        step = strong_wolfe_search(phi, f, slope, alpha1, config.c1, config.c2, config.max_line_search)
        evaluations += phi.evaluations
        if step is None and pairs:
            logger.debug("line search failed at iteration %d, restarting from steepest descent", iteration)
            pairs.clear()
            direction = -g
            phi = _LineFunction(fun_grad, x, direction)
            step = strong_wolfe_search(phi, f, float(g @ direction), min(1.0, 1.0 / float(np.linalg.norm(g))),
                                       config.c1, config.c2, config.max_line_search)
            evaluations += phi.evaluations
        if step is None:
            message = "line search failed"
            iteration -= 1
            break

        f_new = phi(step)
        g_new = phi.gradient(step)
        s = step * direction
        y = g_new - g
        sy = float(s @ y)
        if sy > CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))

        reduction = f - f_new
        x, f, g = x + s, f_new, g_new
        trace.append(f)
        if callback is not None:
            callback(iteration, x, f)
        if reduction <= config.ftol * max(abs(f), abs(f + reduction), 1.0):
            converged, message = True, "relative reduction below ftol"
            break
    else:
        if np.max(np.abs(g)) <= config.gtol:
            converged, message = True, "gradient norm below tolerance"

    logger.debug("lbfgs finished: %s after %d iterations, cost %.6g", message, iteration, f)
    return TrainResult(params=x, cost=f, trace=trace, iterations=iteration,
                       converged=converged, message=message, evaluations=evaluations)


def lbfgsb_minimize(fun_grad: FunGrad, x0, config: Optional[LbfgsConfig] = None) -> TrainResult:
    """scipy's L-BFGS-B without bounds, mapped into a TrainResult."""
    config = config or LbfgsConfig()
    x0 = np.array(x0, dtype=float)
    f0, g0 = fun_grad(x0)
    if not math.isfinite(float(f0)) or not np.all(np.isfinite(g0)):
        raise InvalidArgumentError("objective is not finite at the initial point")

    last = {"x": x0, "f": float(f0)}
    trace = [float(f0)]

    def wrapped(x):
        value, grad = fun_grad(x)
        last["x"], last["f"] = np.array(x), float(value)
        return float(value), np.asarray(grad, dtype=float)

    def record(xk):
        trace.append(last["f"] if np.array_equal(xk, last["x"]) else float(fun_grad(xk)[0]))

    result = minimize(wrapped, x0, jac=True, method="L-BFGS-B", callback=record,
                      options={"maxiter": config.max_iterations, "maxcor": config.memory,
                               "gtol": config.gtol, "ftol": config.ftol})
    return TrainResult(params=np.asarray(result.x, dtype=float), cost=float(result.fun), trace=trace,
                       iterations=int(result.nit), converged=bool(result.success),
                       message=str(result.message), evaluations=int(result.nfev))


# ============ Mini-batch SGD ============

def epoch_batches(n_samples: int, batch_size: int, seed: int, epoch: int) -> List[np.ndarray]:
    """Shuffled partition of range(n_samples) for one epoch; the last batch may be short."""
    order = np.random.default_rng([seed, epoch]).permutation(n_samples)
    return [order[start:start + batch_size] for start in range(0, n_samples, batch_size)]


def sgd_minimize(batch_fun_grad: BatchFunGrad, x0, n_samples: int,
                 config: Optional[SgdConfig] = None) -> TrainResult:
    """
    Mini-batch gradient descent.

    Args:
        batch_fun_grad: returns (summed cost, summed gradient) over the given
            sample indices
        x0: starting point
        n_samples: training-set size
        config: learning rate, batch size, epochs and shuffle seed

    Returns:
        TrainResult whose trace holds the full-set cost before training and
        after every epoch
    """
    config = config or SgdConfig()
    if n_samples < 1 or config.batch_size > n_samples:
        raise InvalidArgumentError(
            f"batch size {config.batch_size} must not exceed the training-set size {n_samples}"
        )
    x = np.array(x0, dtype=float)
    everything = np.arange(n_samples)
    trace = [float(batch_fun_grad(x, everything)[0])]
    evaluations = 1

    for epoch in range(config.epochs):
        for batch in epoch_batches(n_samples, config.batch_size, config.seed, epoch):
            _, grad = batch_fun_grad(x, batch)
            x = x - config.learning_rate * np.asarray(grad, dtype=float) / len(batch)
            evaluations += 1
        trace.append(float(batch_fun_grad(x, everything)[0]))
        evaluations += 1

    cost = trace[-1]
    converged = math.isfinite(cost)
    return TrainResult(params=x, cost=cost, trace=trace, iterations=config.epochs,
                       converged=converged, message="epochs completed" if converged else "cost diverged",
                       evaluations=evaluations, seed=config.seed)


# ============ Restarts ============

def _rank(cost: float) -> float:
    return cost if math.isfinite(cost) else math.inf


def multi_restart(trainer: Callable[[int], TrainResult], restarts: int, base_seed: int = 0,
                  progress: bool = False) -> TrainResult:
    """
    Run trainer(base_seed + r) for r < restarts and keep the lowest final cost.

    Ties keep the earliest seed and a non-finite cost never wins. The returned
    result lists every restart's cost.
    """
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be >= 1, got {restarts}")
    best = None
    costs = []
    for r in tqdm(range(restarts), desc="restarts", disable=not progress, leave=False):
        seed = base_seed + r
        result = trainer(seed)
        result.seed = seed
        costs.append(result.cost)
        logger.debug("restart %d (seed %d): cost %.6g", r, seed, result.cost)
        if best is None or _rank(result.cost) < _rank(best.cost):
            best = result
    best.restart_costs = costs
    return best
