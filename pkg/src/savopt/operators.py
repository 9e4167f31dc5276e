"""Non-negative self-adjoint linear operators and their shifted solves.

Every SAV-type step needs ``(I + dt*L)^{-1} b`` for a fixed operator ``L``.
The operators here are chosen so that this solve is exact: componentwise for
the diagonal family, and in the Fourier basis for the periodic Laplacian
family (a circulant matrix is diagonalized by the DFT).

Variants
--------
zero          L = 0
identity      L = lam * I
diagonal      L = diag(d), d >= 0
laplacian     L = -sigma * Delta, periodic 1-D stencil
composite     L = lam * I - sigma * Delta

The Laplacian variants accept ``blocks``: a tuple of contiguous block sizes
summing to the dimension. Each block gets its own periodic stencil, which is
how flattened embedding matrices are handled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("zero", "identity", "diagonal", "laplacian", "composite")


class OperatorError(ValueError):
    """Invalid operator construction or call."""


@dataclass(frozen=True, eq=False)
class LinearOperator:
    kind: str
    dimension: int
    lam: float = 0.0
    sigma: float = 0.0
    diag: np.ndarray | None = None
    blocks: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise OperatorError("dimension must be a positive integer")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise OperatorError("lambda must be a finite nonnegative number")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise OperatorError("sigma must be a finite nonnegative number")
        if self.kind == "diagonal":
            d = np.array(self.diag, dtype=float).ravel()
            if d.shape != (self.dimension,):
                raise OperatorError("diagonal length does not match dimension")
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise OperatorError("diagonal entries must be finite and >= 0")
            d.setflags(write=False)
            object.__setattr__(self, "diag", d)
        blocks = tuple(int(b) for b in self.blocks) or (int(self.dimension),)
        if any(b < 1 for b in blocks) or sum(blocks) != self.dimension:
            raise OperatorError("blocks must be positive and sum to dimension")
        object.__setattr__(self, "blocks", blocks)

    # eigenvalues of L in the basis where the solve is diagonal
    def _block_symbol(self, n: int) -> np.ndarray:
        j = np.arange(n // 2 + 1)
        lap = self.sigma * (2.0 - 2.0 * np.cos(2.0 * np.pi * j / n))
        if self.kind == "composite":
            return self.lam + lap
        return lap

    def symbol(self) -> np.ndarray:
        """Full list of eigenvalues of L (with multiplicity), for inspection."""
        if self.kind == "zero":
            return np.zeros(self.dimension)
        if self.kind == "identity":
            return np.full(self.dimension, float(self.lam))
        if self.kind == "diagonal":
            return self.diag.copy()
        out = []
        for n in self.blocks:
            j = np.arange(n)
            lap = self.sigma * (2.0 - 2.0 * np.cos(2.0 * np.pi * j / n))
            out.append(lap + (self.lam if self.kind == "composite" else 0.0))
        return np.concatenate(out)

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise OperatorError(
                f"expected vector of length {self.dimension}, got shape {v.shape}"
            )
        return v

    def apply(self, v) -> np.ndarray:
        v = self._check(v)
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "identity":
            return self.lam * v
        if self.kind == "diagonal":
            return self.diag * v
        out = np.empty_like(v)
        start = 0
        for n in self.blocks:
            x = v[start:start + n]
            # -Delta x = 2x_i - x_{i-1} - x_{i+1}, periodic
            lap = 2.0 * x - np.roll(x, 1) - np.roll(x, -1)
            out[start:start + n] = self.sigma * lap
            if self.kind == "composite":
                out[start:start + n] += self.lam * x
            start += n
        return out

    def apply_shift(self, dt: float, v) -> np.ndarray:
        """(I + dt*L) v."""
        v = self._check(v)
        return v + dt * self.apply(v)

    def solve_shifted(self, dt: float, b) -> np.ndarray:
        """Exact solution of (I + dt*L) x = b."""
        if not (np.isfinite(dt) and dt > 0):
            raise OperatorError(f"dt must be positive and finite, got {dt}")
        b = self._check(b)
        if not np.all(np.isfinite(b)):
            raise OperatorError("right-hand side has non-finite entries")
        if self.kind == "zero":
            return b.copy()
        if self.kind == "identity":
            return b / (1.0 + dt * self.lam)
        if self.kind == "diagonal":
            return b / (1.0 + dt * self.diag)
        out = np.empty_like(b)
        start = 0
        for n in self.blocks:
            bh = np.fft.rfft(b[start:start + n])
            bh /= 1.0 + dt * self._block_symbol(n)
            out[start:start + n] = np.fft.irfft(bh, n)
            start += n
        return out

    def __repr__(self):
        extra = ""
        if self.kind in ("identity", "composite"):
            extra += f", lam={self.lam}"
        if self.kind in ("laplacian", "composite"):
            extra += f", sigma={self.sigma}"
            if len(self.blocks) > 1:
                extra += f", blocks={self.blocks}"
        return f"LinearOperator({self.kind}, n={self.dimension}{extra})"


def zero(n: int) -> LinearOperator:
    return LinearOperator("zero", n)


def scaled_identity(lam: float, n: int) -> LinearOperator:
    return LinearOperator("identity", n, lam=float(lam))


def diagonal(d) -> LinearOperator:
    d = np.asarray(d, dtype=float).ravel()
    return LinearOperator("diagonal", d.size, diag=d)


def periodic_laplacian(sigma: float, n: int, blocks=()) -> LinearOperator:
    """The operator -sigma*Delta (non-negative), periodic in each block."""
    return LinearOperator("laplacian", n, sigma=float(sigma), blocks=tuple(blocks))


def composite(lam: float, sigma: float, n: int, blocks=()) -> LinearOperator:
    """lam*I - sigma*Delta."""
    return LinearOperator("composite", n, lam=float(lam), sigma=float(sigma),
                          blocks=tuple(blocks))


def apply(op: LinearOperator, v) -> np.ndarray:
    return op.apply(v)


def apply_shift(op: LinearOperator, dt: float, v) -> np.ndarray:
    return op.apply_shift(dt, v)


def solve_shifted(op: LinearOperator, dt: float, b) -> np.ndarray:
    return op.solve_shifted(dt, b)


def from_spec(spec: dict | None, n: int, *, hessian_diag=None, blocks=()) -> LinearOperator:
    """Build an operator from a config mapping ``{kind, lambda, sigma, diag}``.

    ``kind: hessian_diag`` takes the diagonal from ``hessian_diag`` (the
    problem supplies it). ``blocks`` is forwarded to the Laplacian variants.
    """
    spec = dict(spec or {"kind": "zero"})
    kind = spec.pop("kind", "zero")
    lam = float(spec.pop("lambda", 0.0))
    sigma = float(spec.pop("sigma", 0.0))
    diag = spec.pop("diag", None)
    if spec:
        raise OperatorError(f"unknown operator keys: {sorted(spec)}")
    if kind == "zero":
        return zero(n)
    if kind == "identity":
        return scaled_identity(lam, n)
    if kind == "diagonal":
        if diag is None:
            raise OperatorError("diagonal operator needs 'diag'")
        return LinearOperator("diagonal", n, diag=np.asarray(diag, dtype=float))
    if kind == "hessian_diag":
        if hessian_diag is None:
            raise OperatorError("problem has no diagonal Hessian")
        return LinearOperator("diagonal", n, diag=np.asarray(hessian_diag, dtype=float))
    if kind == "laplacian":
        return periodic_laplacian(sigma, n, blocks)
    if kind == "composite":
        return composite(lam, sigma, n, blocks)
    raise OperatorError(f"unknown operator kind {kind!r}")
