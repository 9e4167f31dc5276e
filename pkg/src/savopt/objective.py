"""Objective abstraction plus gradient-noise and mini-batch wrappers.

An objective exposes ``value``, ``gradient``, a lower-bound shift ``shift_C``
(with ``f + C > 0`` everywhere) and optionally ``directional_quartic`` for
objectives that are polynomials of degree <= 4 along every ray.

The module-level ``evaluate``/``gradient`` helpers are what optimizers call:
they validate the input and turn non-finite results into ``DivergenceError``
so a blow-up is reported instead of propagating NaNs.

Gaussian draws come from ``numpy.random.default_rng(seed)`` (PCG64 bit
generator, ziggurat normal sampler). A run is fully determined by its seeds.
"""

from __future__ import annotations

import numpy as np


class ObjectiveError(ValueError):
    """Bad input to an objective (shape, non-finite entries, empty batch)."""


class DivergenceError(FloatingPointError):
    """The objective or its gradient became non-finite."""


class CapabilityError(TypeError):
    """The objective does not provide the requested capability."""


class Objective:
    """Base class. Subclasses set ``dimension`` and ``shift_C`` and override
    ``value`` and ``gradient``."""

    dimension: int = 0
    shift_C: float = 1.0
    supports_quartic: bool = False

    def value(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def directional_quartic(self, theta, d):
        raise CapabilityError(
            f"{type(self).__name__} does not provide exact quartic rays")

    def hessian_diagonal(self):
        """Diagonal of the Hessian when it is constant, else None."""
        return None

    def operator_blocks(self) -> tuple[int, ...]:
        """Block layout for Laplacian operators (empty: one block)."""
        return ()


class FunctionObjective(Objective):
    """Objective built from plain callables."""

    def __init__(self, value_fn, grad_fn, dimension, shift_C=1.0, quartic_fn=None):
        self._f = value_fn
        self._g = grad_fn
        self._q = quartic_fn
        self.dimension = int(dimension)
        self.shift_C = float(shift_C)
        self.supports_quartic = quartic_fn is not None

    def value(self, theta):
        return float(self._f(theta))

    def gradient(self, theta):
        return np.asarray(self._g(theta), dtype=float)

    def directional_quartic(self, theta, d):
        if self._q is None:
            return super().directional_quartic(theta, d)
        return tuple(float(c) for c in self._q(theta, d))


def _check_theta(obj, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (obj.dimension,):
        raise ObjectiveError(
            f"expected parameter vector of length {obj.dimension}, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise DivergenceError("parameter vector has non-finite entries")
    return theta


def evaluate(obj: Objective, theta) -> float:
    theta = _check_theta(obj, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        f = obj.value(theta)
    if not np.isfinite(f):
        raise DivergenceError(f"objective value is {f}")
    return float(f)


def gradient(obj: Objective, theta) -> np.ndarray:
    theta = _check_theta(obj, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        g = obj.gradient(theta)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("gradient has non-finite entries")
    return g


def directional_quartic(obj: Objective, theta, d) -> tuple:
    """Coefficients (c0..c4) with f(theta + a*d) = sum_j c_j a^j."""
    theta = _check_theta(obj, theta)
    d = np.asarray(d, dtype=float)
    if d.shape != theta.shape:
        raise ObjectiveError("direction shape does not match parameters")
    if not obj.supports_quartic:
        raise CapabilityError(
            f"{type(obj).__name__} does not provide exact quartic rays")
    c = obj.directional_quartic(theta, d)
    if not np.all(np.isfinite(c)):
        raise DivergenceError("quartic coefficients are non-finite")
    return tuple(float(x) for x in c)


class NoisyGradient(Objective):
    """Adds ``epsilon * N(0, I)`` to every gradient call.

    The value is passed through untouched, so SAV energies use the exact f.
    Each instance owns its generator; two instances with the same seed give
    the same sequence of draws.
    """

    def __init__(self, base: Objective, epsilon: float, seed: int):
        if not (epsilon >= 0):
            raise ObjectiveError("epsilon must be >= 0")
        self.base = base
        self.epsilon = float(epsilon)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.dimension = base.dimension
        self.shift_C = base.shift_C
        self.supports_quartic = base.supports_quartic

    def value(self, theta):
        return self.base.value(theta)

    def gradient(self, theta):
        g = self.base.gradient(theta)
        if self.epsilon == 0.0:
            return g
        return g + self.epsilon * self.rng.standard_normal(self.dimension)

    def directional_quartic(self, theta, d):
        return self.base.directional_quartic(theta, d)

    def hessian_diagonal(self):
        return self.base.hessian_diagonal()

    def operator_blocks(self):
        return self.base.operator_blocks()


def noisy_grad(w: NoisyGradient, theta) -> np.ndarray:
    return gradient(w, theta)


class MiniBatchObjective:
    """Splits a data-defined objective into shuffled mini-batches.

    ``full`` must expose ``n_samples`` and ``batch(indices) -> Objective``.
    Each call to ``epoch()`` draws a fresh permutation from the owned
    generator and cuts it into consecutive batches; the last one may be
    shorter.
    """

    def __init__(self, full, batch_size: int, seed: int):
        if batch_size < 1:
            raise ObjectiveError("batch_size must be positive")
        if full.n_samples < 1:
            raise ObjectiveError("no training samples")
        self.full = full
        self.batch_size = int(batch_size)
        self.rng = np.random.default_rng(seed)

    @property
    def batches_per_epoch(self) -> int:
        return -(-self.full.n_samples // self.batch_size)

    def epoch(self) -> list[np.ndarray]:
        order = self.rng.permutation(self.full.n_samples)
        bs = self.batch_size
        return [order[s:s + bs] for s in range(0, order.size, bs)]

    def batch(self, indices) -> Objective:
        return self.full.batch(indices)
