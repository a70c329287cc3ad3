"""Synthetic online environment: random sparse quadratics over a ball.

Each round draws f(x) = x^T D x + b^T x + c with diagonal PSD D whose nonzero
pattern matches b. The optimizer sees (optionally noisy) value queries; the
environment also exposes exact values and gradients for baselines and error
tracking, and can reproduce the whole round sequence from a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import Ball, ConfigurationError, SmoothnessProfile
from .sensing import ValueOracle

_ROUND_STREAM = 0
_NOISE_STREAM = 1


@dataclass(frozen=True)
class QuadraticFunction:
    """f(x) = sum_i diag_i x_i^2 + linear . x + constant, diag >= 0."""

    diag: np.ndarray
    linear: np.ndarray
    constant: float

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.diag * x) + self.linear @ x + self.constant)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.diag * np.asarray(x, dtype=float) + self.linear


@dataclass(frozen=True)
class QuadraticAdversaryConfig:
    dimension: int
    sparsity: int
    radius: float
    noise_sigma: float = 0.0
    fixed_constant: float | None = None  # None: draw |N(0,1)| each round
    approx_scale: float = 0.0  # >0: off-support entries get this relative size
    fixed_support: bool = False  # reuse one support for every round
    start_fraction: float = 0.9  # starting-point norm as a fraction of the radius

    def __post_init__(self):
        if not 1 <= self.sparsity <= self.dimension:
            raise ConfigurationError(
                f"need 1 <= sparsity <= dimension, got {self.sparsity}/{self.dimension}"
            )
        if self.radius <= 0 or self.noise_sigma < 0 or self.approx_scale < 0:
            raise ConfigurationError("radius must be > 0; sigma and approx_scale >= 0")
        if not 0.0 <= self.start_fraction <= 1.0:
            raise ConfigurationError("start_fraction must lie in [0, 1]")


def smoothness_bounds(radius: float, sparsity: int) -> SmoothnessProfile:
    """Gradient/Hessian norm bounds for the adversary's draw distribution.

    Uses sqrt(2 ln s) as the high-probability scale of the s sampled diagonal
    entries; for s < 2 the formula is evaluated at s = 2.
    """
    s_eff = max(sparsity, 2)
    hess = math.sqrt(2.0 * math.log(s_eff))
    grad = radius * hess + 2.0 * math.sqrt(s_eff)
    return SmoothnessProfile(lipschitz=grad, smoothness=hess)


class QuadraticAdversary:
    """Round-indexed stream of sparse quadratics, seeded and replayable."""

    def __init__(self, cfg: QuadraticAdversaryConfig):
        self.cfg = cfg
        self.constraint_set = Ball(center=np.zeros(cfg.dimension), radius=cfg.radius)
        self.functions: list[QuadraticFunction] = []
        self._round_rng: np.random.Generator | None = None
        self._noise_rng: np.random.Generator | None = None
        self._support: np.ndarray | None = None
        self.current: QuadraticFunction | None = None

    @property
    def dim(self) -> int:
        return self.cfg.dimension

    def reset(self, seed: int) -> np.ndarray:
        """Rewind to round 0 and return the starting point for this seed.

        The start is drawn uniformly from the sphere at start_fraction of
        the radius, so every run opens far from the optimum; it comes from the
        round stream, so all optimizers sharing a seed start from the same
        point and see the same functions.
        """
        self._round_rng = np.random.default_rng([seed, _ROUND_STREAM])
        self._noise_rng = np.random.default_rng([seed, _NOISE_STREAM])
        self._support = None
        self.functions = []
        self.current = None
        direction = self._round_rng.normal(size=self.cfg.dimension)
        direction /= np.linalg.norm(direction)
        return direction * (self.cfg.start_fraction * self.cfg.radius)

    def begin_round(self, t: int) -> None:
        assert self._round_rng is not None, "reset() must run before begin_round()"
        self.current = self._sample()
        self.functions.append(self.current)

    def _sample(self) -> QuadraticFunction:
        cfg = self.cfg
        rng = self._round_rng
        if cfg.fixed_support:
            if self._support is None:
                self._support = rng.choice(cfg.dimension, size=cfg.sparsity, replace=False)
            support = self._support
        else:
            support = rng.choice(cfg.dimension, size=cfg.sparsity, replace=False)
        diag = np.zeros(cfg.dimension)
        linear = np.zeros(cfg.dimension)
        linear[support] = rng.normal(-1.0, 1.0, size=cfg.sparsity)
        diag[support] = np.abs(rng.normal(-1.0, 1.0, size=cfg.sparsity))
        if cfg.fixed_constant is None:
            constant = float(abs(rng.normal(0.0, 1.0)))
        else:
            constant = float(cfg.fixed_constant)
        if cfg.approx_scale > 0.0:
            rest = np.setdiff1d(np.arange(cfg.dimension), support)
            linear[rest] = rng.normal(-1.0, 1.0, size=rest.size) * cfg.approx_scale
            diag[rest] = np.abs(rng.normal(-1.0, 1.0, size=rest.size)) * cfg.approx_scale
        return QuadraticFunction(diag=diag, linear=linear, constant=constant)

    def incur(self, x: np.ndarray) -> float:
        """Exact cost of the current round at x (regret is against true values)."""
        return self.current.value(x)

    def oracle(self) -> ValueOracle:
        """Query channel for the current round; adds observation noise if configured."""
        fn = self.current
        sigma = self.cfg.noise_sigma
        if sigma == 0.0:
            return ValueOracle(fn.value)
        noise_rng = self._noise_rng
        return ValueOracle(lambda x: fn.value(x) + noise_rng.normal(0.0, sigma))

    def exact_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.current.gradient(x)

    def gradient_offset(self) -> None:
        return None

    def instability_correction(self, x: np.ndarray) -> None:
        raise ConfigurationError("quadratic environment has no instability correction")


def hindsight_optimum(
    functions: list[QuadraticFunction], ball: Ball
) -> tuple[np.ndarray, float]:
    """Best fixed point in the ball against the summed round functions.

    The sum is a diagonal quadratic, so the constrained minimizer follows the
    one-parameter KKT path x(mu) and a scalar root-find pins mu.
    """
    if not functions:
        raise ConfigurationError("need at least one round function")
    diag = np.sum([f.diag for f in functions], axis=0)
    linear = np.sum([f.linear for f in functions], axis=0)
    constant = float(np.sum([f.constant for f in functions]))
    x_star = _minimize_diag_quadratic(diag, linear, ball.center, ball.radius)
    value = float(x_star @ (diag * x_star) + linear @ x_star + constant)
    return x_star, value


def _minimize_diag_quadratic(
    diag: np.ndarray, linear: np.ndarray, center: np.ndarray, radius: float
) -> np.ndarray:
    grad_center = 2.0 * diag * center + linear
    free = (diag == 0.0) & (grad_center == 0.0)

    def point(mu: float) -> np.ndarray:
        denom = 2.0 * (diag + mu)
        step = np.divide(grad_center, denom, out=np.zeros_like(denom), where=denom > 0)
        return np.where(free, center, center - step)

    def excess(mu: float) -> float:
        return float(np.linalg.norm(point(mu) - center)) - radius

    if np.all(diag[~free] > 0.0):
        x0 = point(0.0)
        if np.linalg.norm(x0 - center) <= radius:
            return x0
        lo = 0.0
    else:
        lo = 1e-18  # mu -> 0+ blows up on zero-curvature coordinates
    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 10.0
        if hi > 1e18:  # pragma: no cover
            raise ConfigurationError("could not bracket the ball-constraint multiplier")
    mu = brentq(excess, lo, hi, xtol=1e-14)
    return point(mu)
