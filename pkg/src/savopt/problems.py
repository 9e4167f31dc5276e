"""Benchmark objectives.

quadratic            sum of theta_odd^2 + theta_even^2 / 100 (n = 100)
rastrigin            10 n + sum(x^2 - 10 cos(2 pi x))
rosenbrock           2-D (a - x)^2 + b (y - x^2)^2, or the n-D chained form
phase retrieval      0.5 * sum (|F(M_i z)|^2 - b_i)^2 with coded masks
matrix factorization mean squared rating error plus ridge terms
least squares        0.5 * |A theta - b|^2 (closed-form step-size checks)
separable polynomial sum_i p(theta_i - center), e.g. theta^2 + 0.1 theta^4

All benchmarks with minimum value 0 default to ``shift_C = DEFAULT_C``.
Phase retrieval defaults to C = 1.
"""

from __future__ import annotations

from math import comb
from pathlib import Path

import numpy as np

from .objective import Objective, ObjectiveError

DEFAULT_C = 1e-8


class ProblemError(ValueError):
    """Invalid problem definition or data file."""


def _poly_ray(p0, p1, p2):
    """Coefficients of sum((p0 + p1 a + p2 a^2)^2) as (c0..c4)."""
    return (
        float(np.sum(p0 * p0)),
        float(2.0 * np.sum(p0 * p1)),
        float(np.sum(p1 * p1 + 2.0 * p0 * p2)),
        float(2.0 * np.sum(p1 * p2)),
        float(np.sum(p2 * p2)),
    )


class QuadraticProblem(Objective):
    """Ill-conditioned separable quadratic with alternating weights (1, 1/100)."""

    supports_quartic = True

    def __init__(self, n: int = 100, weights=(1.0, 0.01), shift_C: float = DEFAULT_C):
        if n < 1:
            raise ProblemError("dimension must be positive")
        self.dimension = int(n)
        self.weights = np.resize(np.asarray(weights, dtype=float), n)
        self.shift_C = float(shift_C)

    def value(self, theta):
        return float(np.dot(self.weights, theta * theta))

    def gradient(self, theta):
        return 2.0 * self.weights * theta

    def directional_quartic(self, theta, d):
        w = self.weights
        return (float(np.dot(w, theta * theta)), float(2.0 * np.dot(w, theta * d)),
                float(np.dot(w, d * d)), 0.0, 0.0)

    def hessian_diagonal(self):
        return 2.0 * self.weights


class RastriginProblem(Objective):
    def __init__(self, n: int = 2, A: float = 10.0, shift_C: float = DEFAULT_C):
        self.dimension = int(n)
        self.A = float(A)
        self.shift_C = float(shift_C)
        self.domain = (-5.12, 5.12)

    def value(self, theta):
        return float(self.A * self.dimension
                     + np.sum(theta * theta - self.A * np.cos(2.0 * np.pi * theta)))

    def gradient(self, theta):
        return 2.0 * theta + 2.0 * np.pi * self.A * np.sin(2.0 * np.pi * theta)


class RosenbrockProblem(Objective):
    """Rosenbrock function.

    n = 2 uses the classic (a - x)^2 + b (y - x^2)^2. Other n use
    sum_{i=1}^{n} (a - t_i)^2 + b sum_{i=1}^{n-1} (t_{i+1} - t_i^2)^2.
    """

    supports_quartic = True

    def __init__(self, n: int = 2, a: float = 1.0, b: float = 100.0,
                 shift_C: float = DEFAULT_C):
        if n < 1:
            raise ProblemError("dimension must be positive")
        self.dimension = int(n)
        self.a = float(a)
        self.b = float(b)
        self.shift_C = float(shift_C)

    def _linear_part(self, theta):
        # entries entering the (a - t)^2 sum
        return theta[:1] if self.dimension == 2 else theta

    def value(self, theta):
        lin = self.a - self._linear_part(theta)
        q = theta[1:] - theta[:-1] ** 2
        return float(np.sum(lin * lin) + self.b * np.sum(q * q))

    def gradient(self, theta):
        g = np.zeros_like(theta)
        m = 1 if self.dimension == 2 else self.dimension
        g[:m] = -2.0 * (self.a - theta[:m])
        q = theta[1:] - theta[:-1] ** 2
        g[:-1] += -4.0 * self.b * theta[:-1] * q
        g[1:] += 2.0 * self.b * q
        return g

    def directional_quartic(self, theta, d):
        m = 1 if self.dimension == 2 else self.dimension
        lin = _poly_ray(self.a - theta[:m], -d[:m], np.zeros(m))
        p0 = theta[1:] - theta[:-1] ** 2
        p1 = d[1:] - 2.0 * theta[:-1] * d[:-1]
        p2 = -d[:-1] ** 2
        quad = _poly_ray(p0, p1, p2)
        return tuple(x + self.b * y for x, y in zip(lin, quad))


def complex_gaussian(rng, shape):
    """Entries (x + i y)/sqrt(2) with x, y standard normal."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class PhaseRetrievalProblem(Objective):
    """Coded-diffraction phase retrieval on a 1-D or 2-D complex signal.

    The complex unknown z of shape ``shape`` is stored as the real vector
    [Re z, Im z] (each part flattened row-major), so the Euclidean inner
    product on theta is the real part of the Hermitian one on z.
    Measurements are b_i = |F(M_i * z_true)|^2 with the unitary DFT F.
    """

    supports_quartic = True

    def __init__(self, shape=(64,), masks: int = 6, seed: int = 0,
                 signal: str = "complex", shift_C: float = 1.0):
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if len(shape) not in (1, 2) or min(shape) < 1:
            raise ProblemError("phase retrieval supports 1-D and 2-D signals")
        if masks < 1:
            raise ProblemError("need at least one mask")
        rng = np.random.default_rng(seed)
        if signal == "complex":
            truth = complex_gaussian(rng, shape)
        elif signal == "real":
            truth = rng.uniform(0.0, 1.0, shape) + 0j
        else:
            raise ProblemError(f"unknown signal kind {signal!r}")
        mask_arr = complex_gaussian(rng, (masks,) + shape)
        self._setup(mask_arr, truth, shift_C)
        self.seed = seed

    @classmethod
    def from_arrays(cls, masks, truth, shift_C: float = 1.0):
        self = cls.__new__(cls)
        truth = np.asarray(truth, dtype=complex)
        masks = np.asarray(masks, dtype=complex)
        if masks.shape[1:] != truth.shape:
            raise ProblemError("mask shape does not match signal shape")
        self._setup(masks, truth, shift_C)
        self.seed = None
        return self

    def _setup(self, masks, truth, shift_C):
        self.shape = truth.shape
        self.N = truth.size
        self.masks = masks
        self.truth = truth
        self.dimension = 2 * self.N
        self.shift_C = float(shift_C)
        self._axes = tuple(range(1, 1 + truth.ndim))
        self.measurements = self.measure(truth)

    def fft(self, x):
        return np.fft.fftn(x, axes=self._axes, norm="ortho")

    def ifft(self, x):
        return np.fft.ifftn(x, axes=self._axes, norm="ortho")

    def measure(self, z):
        return np.abs(self.fft(self.masks * z)) ** 2

    def to_complex(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (theta[:self.N] + 1j * theta[self.N:]).reshape(self.shape)

    def to_real(self, z):
        z = np.asarray(z, dtype=complex).ravel()
        return np.concatenate([z.real, z.imag])

    def value_complex(self, z):
        res = np.abs(self.fft(self.masks * z)) ** 2 - self.measurements
        return 0.5 * float(np.sum(res * res))

    def gradient_complex(self, z):
        y = self.fft(self.masks * z)
        w = (np.abs(y) ** 2 - self.measurements) * y
        return 2.0 * np.sum(np.conj(self.masks) * self.ifft(w), axis=0)

    def value(self, theta):
        return self.value_complex(self.to_complex(theta))

    def gradient(self, theta):
        return self.to_real(self.gradient_complex(self.to_complex(theta)))

    def directional_quartic(self, theta, d):
        y0 = self.fft(self.masks * self.to_complex(theta))
        yd = self.fft(self.masks * self.to_complex(d))
        p0 = np.abs(y0) ** 2 - self.measurements
        p1 = 2.0 * np.real(np.conj(y0) * yd)
        p2 = np.abs(yd) ** 2
        # 0.5 * sum (p0 + p1 a + p2 a^2)^2
        return tuple(0.5 * c for c in _poly_ray(p0, p1, p2))

    def random_init(self, seed: int, scale: float = 1.0) -> np.ndarray:
        """Complex Gaussian start, ``scale`` times the RMS magnitude of the truth."""
        rng = np.random.default_rng(seed)
        scale = scale * np.sqrt(np.mean(np.abs(self.truth) ** 2))
        return self.to_real(scale * complex_gaussian(rng, self.shape))


class LeastSquaresProblem(Objective):
    """f = 0.5 * |A theta - b|^2."""

    supports_quartic = True

    def __init__(self, A, b, shift_C: float = DEFAULT_C):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ProblemError("A must be 2-D and b must match its rows")
        self.dimension = self.A.shape[1]
        self.shift_C = float(shift_C)

    def value(self, theta):
        r = self.A @ theta - self.b
        return 0.5 * float(r @ r)

    def gradient(self, theta):
        return self.A.T @ (self.A @ theta - self.b)

    def directional_quartic(self, theta, d):
        r = self.A @ theta - self.b
        ad = self.A @ d
        return (0.5 * float(r @ r), float(r @ ad), 0.5 * float(ad @ ad), 0.0, 0.0)


class SeparablePolynomial(Objective):
    """f(theta) = sum_i p(theta_i - center) with p(x) = sum_j coeffs[j] x^j.

    The caller supplies ``shift_C`` making f + C positive.
    """

    def __init__(self, coeffs, n: int = 1, center: float = 0.0,
                 shift_C: float = DEFAULT_C):
        self.coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if self.coeffs.size == 0:
            self.coeffs = np.zeros(1)
        self.dimension = int(n)
        self.center = float(center)
        self.shift_C = float(shift_C)
        self.supports_quartic = self.coeffs.size <= 5
        self._dcoeffs = np.polynomial.polynomial.polyder(self.coeffs)

    def value(self, theta):
        x = theta - self.center
        return float(np.sum(np.polynomial.polynomial.polyval(x, self.coeffs)))

    def gradient(self, theta):
        return np.polynomial.polynomial.polyval(theta - self.center, self._dcoeffs)

    def directional_quartic(self, theta, d):
        if not self.supports_quartic:
            return super().directional_quartic(theta, d)
        x = theta - self.center
        out = np.zeros(5)
        for j, c in enumerate(self.coeffs):
            for k in range(j + 1):
                out[k] += c * comb(j, k) * np.sum(x ** (j - k) * d ** k)
        return tuple(float(v) for v in out)

    def hessian_diagonal(self):
        if self.coeffs.size <= 3:
            c2 = self.coeffs[2] if self.coeffs.size == 3 else 0.0
            return np.full(self.dimension, 2.0 * c2)
        return None


# ---------------------------------------------------------------- ratings


class FactorizationObjective(Objective):
    """Mean squared error over a fixed set of ratings plus ridge terms.

    theta = concat(X.ravel(), Y.ravel()) with X (users x d), Y (items x d).
    """

    def __init__(self, problem: "MatrixFactorizationProblem", rows):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            raise ObjectiveError("empty rating batch")
        self.problem = problem
        self.rows = rows
        self.dimension = problem.dimension
        self.shift_C = problem.shift_C
        self._u = problem.users[rows]
        self._i = problem.items[rows]
        self._r = problem.ratings[rows]

    def _residual(self, X, Y):
        return self._r - np.einsum("kd,kd->k", X[self._u], Y[self._i])

    def value(self, theta):
        p = self.problem
        X, Y = p.split(theta)
        e = self._residual(X, Y)
        return float(np.mean(e * e) + p.lam_u * np.sum(X * X) + p.lam_i * np.sum(Y * Y))

    def gradient(self, theta):
        p = self.problem
        X, Y = p.split(theta)
        e = self._residual(X, Y)
        w = (-2.0 / e.size) * e[:, None]
        gX = 2.0 * p.lam_u * X
        gY = 2.0 * p.lam_i * Y
        np.add.at(gX, self._u, w * Y[self._i])
        np.add.at(gY, self._i, w * X[self._u])
        return np.concatenate([gX.ravel(), gY.ravel()])

    def operator_blocks(self):
        return self.problem.operator_blocks()


class MatrixFactorizationProblem:
    """Ratings data with a seeded train/test split.

    ``objective()`` is the full-batch training loss; ``batch(idx)`` is the
    loss over ``train[idx]``, normalized by the batch size.
    """

    def __init__(self, users, items, ratings, n_users=None, n_items=None,
                 d: int = 8, lam_u: float = 1e-4, lam_i: float = 1e-4,
                 seed: int = 0, train_fraction: float = 0.8,
                 shift_C: float = DEFAULT_C):
        self.users = np.asarray(users, dtype=np.int64)
        self.items = np.asarray(items, dtype=np.int64)
        self.ratings = np.asarray(ratings, dtype=float)
        if not (self.users.shape == self.items.shape == self.ratings.shape):
            raise ProblemError("users, items and ratings must have equal length")
        if self.ratings.size == 0:
            raise ProblemError("no ratings")
        self.n_users = int(n_users if n_users is not None else self.users.max() + 1)
        self.n_items = int(n_items if n_items is not None else self.items.max() + 1)
        if self.users.min() < 0 or self.users.max() >= self.n_users \
                or self.items.min() < 0 or self.items.max() >= self.n_items:
            raise ProblemError("user or item id out of range")
        self.d = int(d)
        self.lam_u = float(lam_u)
        self.lam_i = float(lam_i)
        self.shift_C = float(shift_C)
        self.dimension = (self.n_users + self.n_items) * self.d
        perm = np.random.default_rng(seed).permutation(self.ratings.size)
        n_train = int(round(train_fraction * self.ratings.size))
        self.train = np.sort(perm[:n_train])
        self.test = np.sort(perm[n_train:])
        self.truth = None

    @property
    def n_samples(self) -> int:
        return self.train.size

    def split(self, theta):
        k = self.n_users * self.d
        return (theta[:k].reshape(self.n_users, self.d),
                theta[k:].reshape(self.n_items, self.d))

    def join(self, X, Y):
        return np.concatenate([np.ravel(X), np.ravel(Y)])

    def operator_blocks(self):
        return (self.n_users * self.d, self.n_items * self.d)

    def objective(self) -> FactorizationObjective:
        return FactorizationObjective(self, self.train)

    def batch(self, indices) -> FactorizationObjective:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise ObjectiveError("empty rating batch")
        return FactorizationObjective(self, self.train[indices])

    def test_error(self, theta) -> float:
        """Mean squared error on the held-out ratings (no ridge terms)."""
        if self.test.size == 0:
            return float("nan")
        X, Y = self.split(theta)
        rows = self.test
        e = self.ratings[rows] - np.einsum("kd,kd->k", X[self.users[rows]],
                                           Y[self.items[rows]])
        return float(np.mean(e * e))

    def random_init(self, seed: int, scale: float = 0.1) -> np.ndarray:
        return scale * np.random.default_rng(seed).standard_normal(self.dimension)


def load_ratings(path, **kwargs) -> MatrixFactorizationProblem:
    """Read ``user item rating [timestamp]`` rows (tab or space separated,
    1-based ids) and remap ids to dense 0-based indices in order of first
    appearance. Extra keyword arguments go to MatrixFactorizationProblem."""
    path = Path(path)
    users, items, ratings = [], [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (3, 4):
                raise ProblemError(f"{path}:{lineno}: expected 3 or 4 fields")
            try:
                u, i, r = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ProblemError(f"{path}:{lineno}: {exc}") from None
            if u < 1 or i < 1 or not np.isfinite(r):
                raise ProblemError(f"{path}:{lineno}: ids must be >= 1, rating finite")
            users.append(u)
            items.append(i)
            ratings.append(r)
    if not ratings:
        raise ProblemError(f"{path}: no ratings found")
    uid = {u: k for k, u in enumerate(dict.fromkeys(users))}
    iid = {i: k for k, i in enumerate(dict.fromkeys(items))}
    return MatrixFactorizationProblem([uid[u] for u in users], [iid[i] for i in items],
                                      ratings, len(uid), len(iid), **kwargs)


def synth_ratings(m: int, n: int, d_true: int, seed: int, *, n_ratings=None,
                  density: float = 0.06, noise: float = 0.1,
                  mean_rating: float = 3.5, d=None, **kwargs) -> MatrixFactorizationProblem:
    """Synthetic ratings from random rank-``d_true`` factors.

    Factor entries are mu * (1 + 0.5 z) with mu = sqrt(mean_rating / d_true),
    so ratings center near ``mean_rating`` like a 1-5 star scale. The
    generating parameters are kept in ``problem.truth`` when d == d_true.
    """
    rng = np.random.default_rng(seed)
    mu = np.sqrt(mean_rating / d_true)
    Xt = mu * (1.0 + 0.5 * rng.standard_normal((m, d_true)))
    Yt = mu * (1.0 + 0.5 * rng.standard_normal((n, d_true)))
    total = int(n_ratings if n_ratings is not None else round(density * m * n))
    if not 1 <= total <= m * n:
        raise ProblemError("number of ratings must be in [1, m*n]")
    cells = rng.choice(m * n, total, replace=False)
    u, i = cells // n, cells % n
    r = np.einsum("kd,kd->k", Xt[u], Yt[i])
    if noise > 0:
        r = r + noise * rng.standard_normal(total)
    d = d_true if d is None else int(d)
    kwargs.setdefault("seed", seed)
    p = MatrixFactorizationProblem(u, i, r, m, n, d=d, **kwargs)
    if d == d_true:
        p.truth = p.join(Xt, Yt)
    return p
