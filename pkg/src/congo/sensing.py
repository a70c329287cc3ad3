"""Measurement-matrix draws and the two finite-difference measurement schemes.

Both schemes probe an unknown function around a base point and return a vector
y that approximates (matrix @ gradient). The single-row scheme perturbs along
one matrix row per query; the combined scheme perturbs along random signed
combinations of all rows and averages several draws, so its per-round query
count is decoupled from the number of rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigurationError, MeasurementError

log = logging.getLogger(__name__)

_DISTRIBUTIONS = ("gaussian", "rademacher", "sphere")
_MAX_REDRAWS = 64


class ValueOracle:
    """Wraps a scalar-valued function and counts how many times it is queried."""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self._fn = fn
        self.queries = 0

    def __call__(self, point: np.ndarray) -> float:
        self.queries += 1
        return float(self._fn(point))


@dataclass(frozen=True)
class MeasurementMatrix:
    entries: np.ndarray
    distribution: str

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    def max_row_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.entries, axis=1)))


@dataclass(frozen=True)
class MeasurementVector:
    values: np.ndarray
    queries_used: int


def draw_matrix(m: int, d: int, distribution: str, rng: np.random.Generator) -> MeasurementMatrix:
    """Draw a fresh m x d measurement matrix.

    gaussian and rademacher rows have iid entries. sphere rows are gaussian
    draws normalized to unit length: same directions, but the probe radius in
    measure_single_row becomes exactly delta instead of delta over the row
    norm, which keeps finite differences above the noise floor when function
    values are themselves stochastic. Rows that come out identically zero are
    redrawn so the perturbation directions below are always well defined.
    """
    if m < 1 or d < 1:
        raise ConfigurationError(f"matrix dimensions must be >= 1, got {m}x{d}")
    if distribution not in _DISTRIBUTIONS:
        raise ConfigurationError(f"unknown distribution {distribution!r}")
    entries = _draw_rows(m, d, distribution, rng)
    for _ in range(_MAX_REDRAWS):
        bad = np.linalg.norm(entries, axis=1) == 0.0
        if not bad.any():
            break
        log.debug("redrawing %d zero measurement rows", int(bad.sum()))
        entries[bad] = _draw_rows(int(bad.sum()), d, distribution, rng)
    if distribution == "sphere":
        entries /= np.linalg.norm(entries, axis=1, keepdims=True)
    return MeasurementMatrix(entries=entries, distribution=distribution)


def _draw_rows(m: int, d: int, distribution: str, rng: np.random.Generator) -> np.ndarray:
    if distribution in ("gaussian", "sphere"):
        return rng.standard_normal((m, d))
    return rng.integers(0, 2, size=(m, d)).astype(float) * 2.0 - 1.0


def measure_single_row(
    oracle: ValueOracle, x: np.ndarray, matrix: MeasurementMatrix, delta: float
) -> MeasurementVector:
    """One forward difference per matrix row; m+1 queries total.

    Row i probes x + (delta/||a_i||^2) a_i, so for twice-differentiable f each
    entry satisfies |y_i - <grad f(x), a_i>| <= (L/2) delta with L the Hessian
    norm bound.
    """
    _check_delta(delta)
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.d,):
        raise ConfigurationError(f"point has shape {x.shape}, matrix expects ({matrix.d},)")
    before = oracle.queries
    base = oracle(x)
    _check_value(base, "base query")
    norms_sq = np.sum(matrix.entries**2, axis=1)
    values = np.empty(matrix.m)
    for i in range(matrix.m):
        scale = norms_sq[i]
        probe = oracle(x + (delta / scale) * matrix.entries[i])
        _check_value(probe, f"row {i} query")
        values[i] = (probe - base) * scale / delta
    return MeasurementVector(values=values, queries_used=oracle.queries - before)


def measure_combined(
    oracle: ValueOracle,
    x: np.ndarray,
    matrix: MeasurementMatrix,
    delta: float,
    k: int,
    rng: np.random.Generator,
) -> MeasurementVector:
    """Average of k signed-combination probes; k+1 queries total.

    Each draw perturbs along A^T D for a Rademacher sign vector D, giving a
    one-query estimate of every entry of (A grad f) at once; averaging over k
    draws shrinks the cross-row interference, which has zero mean.
    """
    _check_delta(delta)
    if k < 1:
        raise ConfigurationError(f"averaging count must be >= 1, got {k}")
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.d,):
        raise ConfigurationError(f"point has shape {x.shape}, matrix expects ({matrix.d},)")
    before = oracle.queries
    base = oracle(x)
    _check_value(base, "base query")
    acc = np.zeros(matrix.m)
    for draw in range(k):
        signs, combo, norm_sq = _nonzero_combination(matrix, rng)
        probe = oracle(x + (delta / norm_sq) * combo)
        _check_value(probe, f"draw {draw} query")
        # 1/sign_i == sign_i for signs in {-1, +1}
        acc += (probe - base) * (norm_sq / delta) * signs
    return MeasurementVector(values=acc / k, queries_used=oracle.queries - before)


def _nonzero_combination(matrix: MeasurementMatrix, rng: np.random.Generator):
    for _ in range(_MAX_REDRAWS):
        signs = rng.integers(0, 2, size=matrix.m).astype(float) * 2.0 - 1.0
        combo = matrix.entries.T @ signs
        norm_sq = float(np.dot(combo, combo))
        if norm_sq > 0.0:
            return signs, combo, norm_sq
        log.debug("redrawing sign vector: combined direction was zero")
    raise MeasurementError("could not draw a nonzero combined perturbation direction")


def prescribe_m(
    s: int, d: int, mode: str = "practical", horizon: int | None = None, variant: str = "e"
) -> int:
    """Row count for an s-sparse target in d dimensions, clamped to [1, d].

    practical: ceil(2 s ln(d/s)). theoretical: the horizon-dependent guarantee
    expression (leading constant taken as 1), which differs between the
    single-row and combined-scheme optimizers.
    """
    if not 1 <= s <= d:
        raise ConfigurationError(f"need 1 <= s <= d, got s={s}, d={d}")
    if mode == "practical":
        raw = 2.0 * s * math.log(d / s)
    elif mode == "theoretical":
        if horizon is None or horizon < 1:
            raise ConfigurationError("theoretical mode needs a horizon >= 1")
        if variant in ("e", "z"):
            raw = 4.0 * s * math.log(math.e * d / (4.0 * s)) + math.log(2.0 * horizon)
        elif variant == "b":
            raw = 2.0 * s * math.log(math.e * d / (2.0 * s)) + math.log(4.0 * horizon)
        else:
            raise ConfigurationError(f"unknown variant {variant!r}")
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return int(min(d, max(1, math.ceil(raw))))


def prescribe_k(
    m: int,
    lipschitz: float,
    smoothness: float,
    delta: float,
    row_norm_bound: float,
    horizon: int,
) -> int:
    """Averaging count that keeps the combined scheme's interference noise in check.

    ceil(4 (m-1)^2 L_f^2 G^2 ln(2 m T) / (L^2 delta^2)), clamped to >= 1.
    """
    if m < 1:
        raise ConfigurationError(f"row count must be >= 1, got {m}")
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
    if smoothness <= 0 or delta <= 0:
        raise ConfigurationError("prescribe_k needs smoothness > 0 and delta > 0")
    raw = (
        4.0
        * (m - 1) ** 2
        * lipschitz**2
        * row_norm_bound**2
        * math.log(2.0 * m * horizon)
        / (smoothness**2 * delta**2)
    )
    return max(1, math.ceil(raw))


def _check_delta(delta: float):
    if not (delta > 0 and math.isfinite(delta)):
        raise ConfigurationError(f"perturbation size must be finite and > 0, got {delta}")


def _check_value(value: float, what: str):
    if not math.isfinite(value):
        raise MeasurementError(f"oracle returned non-finite value on {what}")
