"""Comparison optimizers: (preconditioned) GD, NAG, ADAM and exact steepest
descent on objectives that are quartic along rays."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .objective import Objective, directional_quartic, gradient
from .operators import LinearOperator


def gd_step(theta, obj: Objective, op: LinearOperator | None, dt: float) -> np.ndarray:
    """theta - dt (I + dt L)^{-1} grad f(theta); op=None means L = 0."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = gradient(obj, theta)
    if op is not None:
        g = op.solve_shifted(dt, g)
    return theta - dt * g


@dataclass
class NagState:
    theta: np.ndarray
    velocity: np.ndarray
    lr: float
    gamma: float = 0.9

    @classmethod
    def start(cls, theta, lr, gamma=0.9):
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), float(lr), float(gamma))


def nag_step(s: NagState, obj: Objective) -> NagState:
    """Look-ahead form: v <- gamma v + lr grad f(theta - gamma v); theta <- theta - v."""
    v = s.gamma * s.velocity + s.lr * gradient(obj, s.theta - s.gamma * s.velocity)
    return replace(s, theta=s.theta - v, velocity=v)


@dataclass
class AdamState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def start(cls, theta, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta), float(lr),
                   beta1, beta2, eps, 0)


def adam_step(s: AdamState, obj: Objective) -> AdamState:
    g = gradient(obj, s.theta)
    t = s.t + 1
    m = s.beta1 * s.m + (1.0 - s.beta1) * g
    v = s.beta2 * s.v + (1.0 - s.beta2) * g * g
    mhat = m / (1.0 - s.beta1 ** t)
    vhat = v / (1.0 - s.beta2 ** t)
    theta = s.theta - s.lr * mhat / (np.sqrt(vhat) + s.eps)
    return replace(s, theta=theta, m=m, v=v, t=t)


# ------------------------------------------------------------ exact line search


def _polyval(c, a):
    return (((c[4] * a + c[3]) * a + c[2]) * a + c[1]) * a + c[0]


def _real_cubic_roots(a3, a2, a1, a0):
    """Real roots of a3 x^3 + a2 x^2 + a1 x + a0 with a3 != 0 (Cardano)."""
    B, Cc, D = a2 / a3, a1 / a3, a0 / a3
    p = Cc - B * B / 3.0
    q = 2.0 * B ** 3 / 27.0 - B * Cc / 3.0 + D
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    # p > 0 means one real root even when (p/3)^3 underflows and disc reads 0
    if disc > 0 or p >= 0:
        A = -math.copysign(np.cbrt(abs(q) / 2.0 + math.sqrt(max(disc, 0.0))), q)
        t = [A + (-p / (3.0 * A) if A != 0 else 0.0)]
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        if m == 0.0:
            t = [float(np.cbrt(-q))]
        else:
            # divide in this order so a tiny p does not underflow p * m to 0
            arg = max(-1.0, min(1.0, (3.0 * q / p) / m))
            th = math.acos(arg) / 3.0
            t = [m * math.cos(th - 2.0 * math.pi * k / 3.0) for k in range(3)]
    return [x - B / 3.0 for x in t]


def _critical_points(c):
    """Real roots of phi'(a) = c1 + 2 c2 a + 3 c3 a^2 + 4 c4 a^3."""
    d3, d2, d1, d0 = 4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]
    # exact zero tests: the powers of a carry different units, so there is
    # no scale-free notion of a negligible leading coefficient
    if d3 != 0.0:
        roots = _real_cubic_roots(d3, d2, d1, d0)
    elif d2 != 0.0:
        disc = d1 * d1 - 4.0 * d2 * d0
        if disc < 0:
            return []
        qq = -0.5 * (d1 + math.copysign(math.sqrt(disc), d1))
        roots = [qq / d2] + ([d0 / qq] if qq != 0 else [])
    elif d1 != 0.0:
        roots = [-d0 / d1]
    else:
        return []
    # Newton polish on phi'
    out = []
    for a in roots:
        for _ in range(50):
            p1 = ((d3 * a + d2) * a + d1) * a + d0
            p2 = (3.0 * d3 * a + 2.0 * d2) * a + d1
            if p2 == 0.0:
                break
            step = p1 / p2
            a -= step
            if abs(step) <= 1e-14 * max(1.0, abs(a)):
                break
        out.append(a)
    return out


def quartic_argmin(c) -> float:
    """Global minimizer over a >= 0 of sum_j c_j a^j."""
    c = [float(x) for x in c]
    lead = next((x for x in (c[4], c[3], c[2], c[1]) if x != 0.0), 0.0)
    if lead < 0:
        # the highest nonzero power dominates as a -> infinity
        raise ValueError("polynomial is unbounded below on a >= 0")
    cands = [0.0] + [a for a in _critical_points(c) if a > 0 and np.isfinite(a)]
    return min(cands, key=lambda a: _polyval(c, a))


def steepest_descent_step(theta, obj: Objective):
    """Exact line search along -grad f. Returns (theta_new, step_size)."""
    theta = np.asarray(theta, dtype=float)
    d = -gradient(obj, theta)
    if not np.any(d):
        return theta.copy(), 0.0
    c = directional_quartic(obj, theta, d)
    alpha = quartic_argmin(c)
    return theta + alpha * d, alpha

