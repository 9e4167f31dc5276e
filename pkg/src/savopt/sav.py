"""SAV-family steppers.

Every stepper is a pure function ``(state, objective, operator, ...) ->
(new_state, TraceRecord)``. The auxiliary variable ``r`` tracks
``sqrt(f + C)`` (or ``(f + C)^q``) and the explicit update only ever divides
it by a factor >= 1, which is where the unconditional decrease of ``r^2``
comes from.

Notation used below: ``g = grad f(theta_k)``, ``A = I + dt L`` and
``ghat = A^{-1} g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .objective import Objective, evaluate, gradient
from .operators import LinearOperator

TRACE_FIELDS = ("k", "f", "r", "r_tilde", "xi", "dt", "alpha", "grad_norm",
                "indicator", "status")

NAN = float("nan")


class LowerBoundError(ValueError):
    """f + C (or g + C_g for the legacy splitting) is not positive."""


class WolfeError(RuntimeError):
    """No step satisfying the Wolfe conditions was found."""


@dataclass
class SavState:
    theta: np.ndarray
    r: float
    dt: float
    k: int = 0


@dataclass
class TraceRecord:
    k: int
    f: float
    r: float = NAN
    r_tilde: float = NAN
    xi: float = NAN
    dt: float = NAN
    alpha: float = NAN
    grad_norm: float = NAN
    indicator: float = NAN
    status: str = "ok"
    # energy-gap term G(theta_{k+1}, theta_k) of relaxed steps; not written
    # to trace files
    G: float = field(default=NAN, compare=False)

    def as_row(self) -> tuple:
        return tuple(getattr(self, name) for name in TRACE_FIELDS)


@dataclass(frozen=True)
class RelaxParams:
    eta: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


@dataclass(frozen=True)
class AdaptiveParams:
    dt0: float = 1.0
    dt_min: float = 1e-6
    rho: float = 1.1
    gamma: float = 0.9

    def __post_init__(self):
        if not self.rho > 1.0:
            raise ValueError("rho must be > 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.dt_min <= self.dt0:
            raise ValueError("need 0 < dt_min <= dt0")


@dataclass(frozen=True)
class QParams:
    q: float = 0.5
    restart: bool = False

    def __post_init__(self):
        if not self.q > 0.0:
            raise ValueError("q must be positive")


def _power(x: float, q: float) -> float:
    return math.sqrt(x) if q == 0.5 else x ** q


def _shifted(obj: Objective, f: float) -> float:
    fc = f + obj.shift_C
    if not fc > 0.0:
        raise LowerBoundError(f"f + C = {fc} is not positive")
    return fc


def init_state(obj: Objective, theta, dt: float, q: float = 0.5) -> SavState:
    """State with r0 = (f(theta0) + C)^q."""
    theta = np.array(theta, dtype=float)
    fc = _shifted(obj, evaluate(obj, theta))
    return SavState(theta, _power(fc, q), float(dt), 0)


def init_legacy_state(obj: Objective, op: LinearOperator, theta, dt: float,
                      C_g: float) -> SavState:
    """State with r0 = sqrt(g(theta0) + C_g), g = f - (L theta, theta)/2."""
    theta = np.array(theta, dtype=float)
    gc = evaluate(obj, theta) - 0.5 * float(op.apply(theta) @ theta) + C_g
    if not gc > 0.0:
        raise LowerBoundError("splitting lower bound violated")
    return SavState(theta, math.sqrt(gc), float(dt), 0)


def _explicit(theta, r, fc, g, ghat, dt, q):
    """Shared two-line update; returns (theta_new, r_new, alpha).

    r_new = r / (1 + dt q (g, ghat)/(f + C)),
    theta_new = theta - alpha ghat with alpha = dt r_new / (f + C)^q.
    """
    gg = float(np.dot(g, ghat))
    r_new = r / (1.0 + dt * q * gg / fc)
    alpha = dt * r_new / _power(fc, q)
    return theta - alpha * ghat, r_new, alpha


def _check_dt(dt):
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    return float(dt)


def modified_sav_step(state: SavState, obj: Objective, op: LinearOperator, dt=None):
    dt = _check_dt(state.dt if dt is None else dt)
    f = evaluate(obj, state.theta)
    fc = _shifted(obj, f)
    g = gradient(obj, state.theta)
    ghat = op.solve_shifted(dt, g)
    theta, r, alpha = _explicit(state.theta, state.r, fc, g, ghat, dt, 0.5)
    rec = TraceRecord(state.k, f, state.r, r_tilde=r, dt=dt, alpha=alpha,
                      grad_norm=float(np.linalg.norm(g)),
                      indicator=state.r / math.sqrt(fc))
    return SavState(theta, r, dt, state.k + 1), rec


def savgd_step(state: SavState, obj: Objective, dt=None):
    """Modified SAV with L = 0; no linear solve."""
    dt = _check_dt(state.dt if dt is None else dt)
    f = evaluate(obj, state.theta)
    fc = _shifted(obj, f)
    g = gradient(obj, state.theta)
    theta, r, alpha = _explicit(state.theta, state.r, fc, g, g, dt, 0.5)
    rec = TraceRecord(state.k, f, state.r, r_tilde=r, dt=dt, alpha=alpha,
                      grad_norm=float(np.linalg.norm(g)),
                      indicator=state.r / math.sqrt(fc))
    return SavState(theta, r, dt, state.k + 1), rec


def legacy_sav_step(state: SavState, obj: Objective, op: LinearOperator,
                    C_g: float, dt=None):
    """Original SAV splitting f = (L theta, theta)/2 + g(theta).

    Implicit scheme, solved explicitly:
        A theta_{k+1} = theta_k - dt r_{k+1} b,    b = grad g / sqrt(g + C_g)
        r_{k+1} - r_k = (b, theta_{k+1} - theta_k) / 2
    Its fixed points need not be stationary points of f.
    """
    dt = _check_dt(state.dt if dt is None else dt)
    theta = state.theta
    f = evaluate(obj, theta)
    Lt = op.apply(theta)
    gc = f - 0.5 * float(Lt @ theta) + C_g
    if not gc > 0.0:
        raise LowerBoundError("splitting lower bound violated")
    grad_f = gradient(obj, theta)
    b = (grad_f - Lt) / math.sqrt(gc)
    ainv_theta = op.solve_shifted(dt, theta)
    ainv_b = op.solve_shifted(dt, b)
    r = (state.r + 0.5 * float(b @ (ainv_theta - theta))) \
        / (1.0 + 0.5 * dt * float(b @ ainv_b))
    new = ainv_theta - dt * r * ainv_b
    rec = TraceRecord(state.k, f, state.r, r_tilde=r, dt=dt,
                      alpha=dt * r / math.sqrt(gc),
                      grad_norm=float(np.linalg.norm(grad_f)),
                      indicator=state.r / math.sqrt(gc))
    return SavState(new, r, dt, state.k + 1), rec


def msav_step(state: SavState, obj: Objective, op: LinearOperator, dt=None):
    """Modified SAV followed by the reset r <- sqrt(f(theta_{k+1}) + C)."""
    new, rec = modified_sav_step(state, obj, op, dt)
    fc = _shifted(obj, evaluate(obj, new.theta))
    return replace(new, r=math.sqrt(fc)), rec


def compute_xi(r_tilde: float, r_k: float, f_next_plus_C: float, eta: float,
               G: float | None = None) -> float:
    """Smallest admissible relaxation weight in [0, 1].

    With s = sqrt(f_next + C), xi solves
        (xi r~ + (1 - xi) s)^2 = r~^2 + (r~ - r_k)^2 + eta G,
    i.e. a xi^2 + b xi + c = 0 with a = (r~ - s)^2, b = 2 (r~ - s) s,
    c = s^2 - r~^2 - (r~ - r_k)^2 - eta G. By default
    G = -2 (r~ - r_k) r~, which equals (dtheta, A dtheta)/dt for a SAV step.
    """
    if not f_next_plus_C > 0.0:
        raise LowerBoundError("f + C must be positive")
    if G is None:
        G = -2.0 * (r_tilde - r_k) * r_tilde
    s = math.sqrt(f_next_plus_C)
    a = (r_tilde - s) ** 2
    if a <= 1e-24:
        return 0.0
    b = 2.0 * (r_tilde - s) * s
    c = s * s - r_tilde * r_tilde - (r_tilde - r_k) ** 2 - eta * G
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 0.0
    # cancellation-free pair of roots
    qq = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if qq == 0.0:
        root = 0.0
    else:
        root = min(qq / a, c / qq)
    return min(max(0.0, root), 1.0)


def relax_r(r_tilde: float, r_k: float, f_next_plus_C: float, eta: float):
    """Return (xi, r_{k+1}) with r_{k+1} = xi r~ + (1 - xi) sqrt(f_next + C).

    When xi is the unclamped root, r_{k+1} solves
    r_{k+1}^2 = r_k^2 - (1 - eta) G exactly, so it is evaluated as that square
    root: the same number in exact arithmetic, without the rounding error of
    xi amplified by |r~ - sqrt(f + C)|.
    """
    xi = compute_xi(r_tilde, r_k, f_next_plus_C, eta)
    s = math.sqrt(f_next_plus_C)
    if xi == 0.0:
        return xi, s
    if xi == 1.0:
        return xi, r_tilde
    G = -2.0 * (r_tilde - r_k) * r_tilde
    return xi, math.sqrt(r_k * r_k - (1.0 - eta) * G)


def _rsav(state, obj, op, eta, dt, f, fc):
    """One relaxed step at fixed dt given f(theta_k); returns state, record."""
    g = gradient(obj, state.theta)
    ghat = op.solve_shifted(dt, g)
    theta, r_tilde, alpha = _explicit(state.theta, state.r, fc, g, ghat, dt, 0.5)
    fc_next = _shifted(obj, evaluate(obj, theta))
    step = alpha * ghat
    G = float(step @ step + dt * (op.apply(step) @ step)) / dt
    xi, r = relax_r(r_tilde, state.r, fc_next, eta)
    rec = TraceRecord(state.k, f, state.r, r_tilde=r_tilde, xi=xi, dt=dt,
                      alpha=alpha, grad_norm=float(np.linalg.norm(g)),
                      indicator=state.r / math.sqrt(fc), G=G)
    return SavState(theta, r, dt, state.k + 1), rec


def rsav_step(state: SavState, obj: Objective, op: LinearOperator,
              relax: RelaxParams = RelaxParams(), dt=None):
    dt = _check_dt(state.dt if dt is None else dt)
    f = evaluate(obj, state.theta)
    return _rsav(state, obj, op, relax.eta, dt, f, _shifted(obj, f))


def adapt_dt(dt: float, indicator: float, adapt: AdaptiveParams) -> float:
    """Step-size rule: shrink by the indicator when it drops below gamma,
    otherwise grow by rho."""
    if indicator < adapt.gamma and dt > adapt.dt_min:
        return max(indicator * dt, adapt.dt_min)
    return adapt.rho * dt


def adaptive_rsav_step(state: SavState, obj: Objective, op: LinearOperator,
                       relax: RelaxParams = RelaxParams(),
                       adapt: AdaptiveParams = AdaptiveParams(),
                       restart: bool = False):
    """Adapt dt from I = r_k / sqrt(f(theta_k) + C), then take an RSAV step.

    ``restart`` re-sets r to sqrt(f + C) after the indicator is read; the
    mini-batch driver uses it at every batch so the indicator compares the
    carried r with the new batch energy.
    """
    f = evaluate(obj, state.theta)
    fc = _shifted(obj, f)
    indicator = state.r / math.sqrt(fc)
    dt = adapt_dt(state.dt, indicator, adapt)
    r = math.sqrt(fc) if restart else state.r
    new, rec = _rsav(replace(state, r=r, dt=dt), obj, op, relax.eta, dt, f, fc)
    rec.r = state.r
    rec.indicator = indicator
    return new, rec


def rsavq_step(state: SavState, obj: Objective, op: LinearOperator,
               qp: QParams = QParams(), dt=None):
    """Generalized SAV with r = (f + C)^q."""
    dt = _check_dt(state.dt if dt is None else dt)
    f = evaluate(obj, state.theta)
    fc = _shifted(obj, f)
    r = _power(fc, qp.q) if qp.restart else state.r
    g = gradient(obj, state.theta)
    ghat = op.solve_shifted(dt, g)
    theta, r_new, alpha = _explicit(state.theta, r, fc, g, ghat, dt, qp.q)
    rec = TraceRecord(state.k, f, state.r, r_tilde=r_new, dt=dt, alpha=alpha,
                      grad_norm=float(np.linalg.norm(g)),
                      indicator=state.r / _power(fc, qp.q))
    return SavState(theta, r_new, dt, state.k + 1), rec


def sav_alpha(dt: float, q: float, g_dot_ghat: float, fc: float) -> float:
    """Step length of the restarted scheme: dt / (1 + dt q (g, A^{-1} g)/(f + C))."""
    return dt / (1.0 + dt * q * g_dot_ghat / fc)


def wolfe_check(obj: Objective, theta, P, alpha: float, c1: float = 1e-4,
                c2: float = 0.9) -> tuple[bool, bool]:
    """(sufficient decrease, curvature) for the step theta + alpha P."""
    if not 0.0 < c1 < c2 < 1.0:
        raise ValueError("need 0 < c1 < c2 < 1")
    theta = np.asarray(theta, dtype=float)
    P = np.asarray(P, dtype=float)
    slope = float(gradient(obj, theta) @ P)
    if not slope < 0.0:
        raise ValueError("P is not a descent direction")
    trial = theta + alpha * P
    decrease = evaluate(obj, trial) <= evaluate(obj, theta) + c1 * alpha * slope
    curvature = float(gradient(obj, trial) @ P) >= c2 * slope
    return bool(decrease), bool(curvature)


def linesearch_sav_step(state: SavState, obj: Objective, op: LinearOperator,
                        qp: QParams = QParams(restart=True), dt=None,
                        wolfe: tuple[float, float] | None = None,
                        max_halvings: int = 60):
    """theta_{k+1} = theta_k + alpha_k P_k with P_k = -A^{-1} grad f.

    With ``wolfe = (c1, c2)`` the step size dt is halved (recomputing A, P_k
    and alpha_k) until both Wolfe conditions hold. The state keeps the
    configured dt; the record holds the accepted one.
    """
    dt0 = _check_dt(state.dt if dt is None else dt)
    f = evaluate(obj, state.theta)
    fc = _shifted(obj, f)
    g = gradient(obj, state.theta)
    dt = dt0
    for halvings in range(max_halvings + 1):
        P = -op.solve_shifted(dt, g)
        gg = -float(g @ P)
        alpha = sav_alpha(dt, qp.q, gg, fc)
        if wolfe is None or gg == 0.0 or all(wolfe_check(obj, state.theta, P, alpha, *wolfe)):
            break
        dt *= 0.5
    else:
        raise WolfeError("wolfe-not-found")
    theta = state.theta + alpha * P
    r = _power(fc, qp.q) / (1.0 + dt * qp.q * gg / fc)
    rec = TraceRecord(state.k, f, state.r, r_tilde=r, dt=dt, alpha=alpha,
                      grad_norm=float(np.linalg.norm(g)),
                      indicator=state.r / _power(fc, qp.q))
    return SavState(theta, r, dt0, state.k + 1), rec


def quadratic_alpha_oracle(A_matrix, b, theta):
    """Closed-form step sizes on f = |A theta - b|^2 / 2.

    Returns (alpha, beta): alpha = (r, r)/(z, z) is the large-dt limit of the
    SAV step with C = 0 and q = 1/2, beta = (z, z)/(Az, Az) the exact line
    search step, where r = A theta - b and z = A^T r. Returns None at a
    stationary point.
    """
    A = np.asarray(A_matrix, dtype=float)
    res = A @ np.asarray(theta, dtype=float) - np.asarray(b, dtype=float)
    z = A.T @ res
    zz = float(z @ z)
    if zz == 0.0:
        return None
    Az = A @ z
    return float(res @ res) / zz, zz / float(Az @ Az)
