"""Executable invariants: each check runs a batch of assertions and reports
the worst measured residual against its tolerance.

"Relative" residuals of an identity are divided by the magnitude of its
largest term (r_k^2 for the energy identity), i.e. they measure how far the
identity is from holding in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import baselines, operators, problems, sav
from ..objective import directional_quartic, evaluate, gradient

SCOPES = ("operators", "problems", "sav", "all")


@dataclass
class CheckResult:
    scope: str
    name: str
    passed: bool
    value: float
    tol: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.scope:<9} {self.name:<48} {self.value:.3e} (tol {self.tol:.0e})"


@dataclass
class VerifyReport:
    results: list

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        lines = [r.line() for r in self.results]
        n_fail = sum(not r.passed for r in self.results)
        lines.append(f"{len(self.results) - n_fail}/{len(self.results)} checks passed")
        return "\n".join(lines)


def _rel(residual, scale):
    # r can underflow to 0 after many large steps; every term is then 0 too
    return abs(residual) / scale if scale > 0 else abs(residual)


def _le(scope, name, value, tol):
    return CheckResult(scope, name, bool(value <= tol), float(value), tol)


# ---------------------------------------------------------------- operators


def standard_operators(n: int = 8, seed: int = 0):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.0, 3.0, n)
    d[0] = 0.0
    return [
        operators.zero(n),
        operators.scaled_identity(1.5, n),
        operators.diagonal(d),
        operators.periodic_laplacian(0.7, n),
        operators.composite(0.3, 0.7, n),
        operators.composite(0.3, 0.7, n, blocks=(3, n - 3)),
    ]


def operator_residual(op, seed=0, dts=(0.1, 1.0, 10.0), trials=10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dt in dts:
        for _ in range(trials):
            b = rng.standard_normal(op.dimension)
            x = op.solve_shifted(dt, b)
            res = np.max(np.abs(op.apply_shift(dt, x) - b))
            worst = max(worst, res / (1.0 + np.max(np.abs(b))))
    return worst


def operator_round_trip(op, seed=0, dts=(0.1, 1.0, 10.0), trials=10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dt in dts:
        for _ in range(trials):
            v = rng.standard_normal(op.dimension)
            back = op.solve_shifted(dt, op.apply_shift(dt, v))
            worst = max(worst, np.linalg.norm(back - v) / np.linalg.norm(v))
    return worst


def operator_nonnegativity(op, seed=0, trials=100):
    """Most negative (Lv, v)/|v|^2 over random v (0 if none negative)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(op.dimension)
        worst = min(worst, float(op.apply(v) @ v) / float(v @ v))
    return -worst


def operator_asymmetry(op, seed=0, trials=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.dimension)
        v = rng.standard_normal(op.dimension)
        gap = abs(float(op.apply(u) @ v) - float(u @ op.apply(v)))
        worst = max(worst, gap / (np.linalg.norm(u) * np.linalg.norm(v)))
    return worst


def check_operators(ops=None):
    ops = standard_operators() if ops is None else ops
    out = []
    for op in ops:
        tag = repr(op)
        out.append(_le("operators", f"residual {tag}", operator_residual(op), 1e-10))
        out.append(_le("operators", f"round trip {tag}", operator_round_trip(op), 1e-10))
        out.append(_le("operators", f"nonnegative {tag}", operator_nonnegativity(op), 1e-12))
        out.append(_le("operators", f"self-adjoint {tag}", operator_asymmetry(op), 1e-12))
    return out


# ----------------------------------------------------------------- problems


def small_problems():
    """One seeded small instance of every benchmark, with a point sampler."""
    mf = problems.synth_ratings(5, 7, 3, seed=3, n_ratings=20, noise=0.1)
    rng = np.random.default_rng(11)
    A = rng.standard_normal((6, 4))
    return {
        "quadratic": problems.QuadraticProblem(),
        "rastrigin": problems.RastriginProblem(10),
        "rosenbrock2d": problems.RosenbrockProblem(2),
        "rosenbrock10": problems.RosenbrockProblem(10),
        "phase_retrieval_1d": problems.PhaseRetrievalProblem((16,), masks=3, seed=1),
        "phase_retrieval_2d": problems.PhaseRetrievalProblem((6, 5), masks=2, seed=2),
        "matrix_factorization": mf.objective(),
        "least_squares": problems.LeastSquaresProblem(A, rng.standard_normal(6)),
        "polynomial": problems.SeparablePolynomial([0, 0, 1, 0, 0.1], n=3),
    }


def fd_gradient_error(obj, seed=0, trials=20, h=1e-6):
    """Worst |central difference - (grad, delta)| / (1 + |f|) over random points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        theta = rng.standard_normal(obj.dimension)
        delta = rng.standard_normal(obj.dimension)
        delta /= np.linalg.norm(delta)
        fd = (evaluate(obj, theta + h * delta) - evaluate(obj, theta - h * delta)) / (2 * h)
        exact = float(gradient(obj, theta) @ delta)
        worst = max(worst, abs(fd - exact) / (1.0 + abs(evaluate(obj, theta))))
    return worst


def quartic_ray_error(obj, seed=0, trials=5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        theta = rng.standard_normal(obj.dimension)
        d = rng.standard_normal(obj.dimension)
        c = directional_quartic(obj, theta, d)
        for a in (0.0, 0.1, 1.0, -2.0):
            phi = sum(cj * a ** j for j, cj in enumerate(c))
            f = evaluate(obj, theta + a * d)
            worst = max(worst, abs(phi - f) / max(1.0, abs(f)))
    return worst


def check_problems():
    out = []
    for name, obj in small_problems().items():
        out.append(_le("problems", f"finite differences {name}", fd_gradient_error(obj), 1e-5))
        if obj.supports_quartic:
            out.append(_le("problems", f"quartic ray {name}", quartic_ray_error(obj), 1e-9))
    gap = max(abs(evaluate(problems.RastriginProblem(n), np.ones(n)) - n) for n in (2, 10, 100))
    out.append(_le("problems", "rastrigin f(ones) = n", gap, 0.0))
    gap = 0.0
    for n in (2, 10, 100, 1000):
        p = problems.RosenbrockProblem(n)
        want = p.a ** 2 * (1 if n == 2 else n)
        gap = max(gap, abs(evaluate(p, np.zeros(n)) - want))
        gap = max(gap, np.max(np.abs(gradient(p, np.ones(n)))))
    out.append(_le("problems", "rosenbrock zeros value, minimizer gradient", gap, 0.0))
    pr = problems.PhaseRetrievalProblem((16,), masks=3, seed=5)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(10):
        z = problems.complex_gaussian(rng, pr.shape)
        f = pr.value_complex(z)
        fr = pr.value_complex(np.exp(1j * rng.uniform(0, 2 * np.pi)) * z)
        worst = max(worst, abs(fr - f) / (1.0 + f))
    out.append(_le("problems", "phase retrieval global phase invariance", worst, 1e-9))
    twin = problems.PhaseRetrievalProblem((16,), masks=3, seed=5)
    same = np.array_equal(pr.measurements, twin.measurements) \
        and np.array_equal(pr.measure(pr.truth), pr.measurements)
    out.append(_le("problems", "phase retrieval measurements regenerate", 0.0 if same else 1.0, 0.0))
    q = problems.QuadraticProblem()
    D = operators.diagonal(q.hessian_diagonal())
    v = np.random.default_rng(0).standard_normal(100)
    hv = gradient(q, v)  # the Hessian is 2 diag(w), so H v = grad f(v)
    out.append(_le("problems", "quadratic D operator is the Hessian",
                   float(np.max(np.abs(D.apply(v) - hv))), 0.0))
    return out


# ---------------------------------------------------------------------- sav


def energy_operators(obj, n):
    """The operator family used by the energy checks: 0, D, lam I, -sigma Delta."""
    ops = {"0": operators.zero(n), "lamI": operators.scaled_identity(1.0, n),
           "-sigmaLap": operators.periodic_laplacian(0.5, n)}
    h = obj.hessian_diagonal()
    if h is None:
        h = np.full(n, 2.0)
        if isinstance(obj, problems.RosenbrockProblem) and n == 2:
            h = np.array([2.0, 2.0 * obj.b])
    ops["D"] = operators.diagonal(h)
    return ops


# below this r carries no relative precision (subnormal range)
R_FLOOR = 1e-290


def energy_residual(r0, r1, step, op, dt):
    """|r1^2 - r0^2 + |step|^2/dt + (L step, step) + (r1 - r0)^2| / r0^2,
    evaluated with everything scaled by 1/r0 so small r does not underflow."""
    rho = r1 / r0
    u = step / r0
    Lu = op.apply(u) if op is not None else 0.0 * u
    return abs(rho * rho - 1.0 + float(u @ u) / dt + float(Lu @ u) + (rho - 1.0) ** 2)


def thm0_residuals(obj, op, theta0, dt, steps=500, savgd=False):
    """Per-step relative residual of the energy identity for modified SAV
    (or SAV-GD). The step is the increment -alpha A^{-1} grad f the scheme
    adds to theta; once it falls below the spacing of theta's floating-point
    grid, theta_{k+1} - theta_k would no longer show it. Steps where r has
    underflowed below R_FLOOR are reported as NaN."""
    state = sav.init_state(obj, theta0, dt)
    out = []
    for _ in range(steps):
        if savgd:
            new, rec = sav.savgd_step(state, obj)
            ghat = gradient(obj, state.theta)
        else:
            new, rec = sav.modified_sav_step(state, obj, op)
            ghat = op.solve_shifted(dt, gradient(obj, state.theta))
        if new.r < R_FLOOR:
            out.append(np.nan)
        else:
            out.append(energy_residual(state.r, new.r, -rec.alpha * ghat,
                                       None if savgd else op, dt))
        state = new
    return np.array(out)


def relaxed_run(obj, op, theta0, dt, steps=500, eta=0.99, adaptive=False):
    """Run RSAV (or adaptive RSAV) and return per-step diagnostics.

    Columns: inequality excess r1^2 - r0^2 + (1 - eta) G, G-identity relative
    residual, xi, equality relative residual.
    """
    relax = sav.RelaxParams(eta)
    adapt = sav.AdaptiveParams(dt0=dt, dt_min=min(1e-6, dt))
    state = sav.init_state(obj, theta0, dt)
    rows = []
    for _ in range(steps):
        if adaptive:
            new, rec = sav.adaptive_rsav_step(state, obj, op, relax, adapt)
        else:
            new, rec = sav.rsav_step(state, obj, op, relax)
        r0, rt = state.r, rec.r_tilde
        G_id = -2.0 * (rt - r0) * rt
        g_scale = 2.0 * (abs(rt * r0) + rt * rt)
        excess = new.r ** 2 - r0 ** 2 + (1.0 - eta) * rec.G
        eq = _rel(new.r ** 2 - r0 ** 2 + (1.0 - eta) * G_id, r0 ** 2)
        rows.append((excess, _rel(rec.G - G_id, g_scale), rec.xi, eq))
        state = new
    return np.array(rows)


def implicit_gap(obj, op, theta, r, dt):
    """Distance between the explicit step and the dense solve of the coupled
    linear system  A th1 + dt b r1 = A th0,  r1 - (b, th1)/2 = r0 - (b, th0)/2."""
    n = obj.dimension
    f = evaluate(obj, theta)
    b = gradient(obj, theta) / np.sqrt(f + obj.shift_C)
    A = np.eye(n) + dt * np.column_stack([op.apply(e) for e in np.eye(n)])
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = dt * b
    M[n, :n] = -0.5 * b
    M[n, n] = 1.0
    rhs = np.concatenate([A @ theta, [r - 0.5 * float(b @ theta)]])
    sol = np.linalg.solve(M, rhs)
    new, _ = sav.modified_sav_step(sav.SavState(theta.copy(), r, dt), obj, op)
    return float(np.max(np.abs(np.concatenate([new.theta, [new.r]]) - sol))
                 / max(1.0, np.max(np.abs(sol))))


def check_sav():
    out = []
    quad = problems.QuadraticProblem()
    rosen = problems.RosenbrockProblem(2)
    starts = {"quadratic": (quad, np.ones(100)), "rosenbrock2d": (rosen, np.array([-3.0, -4.0]))}
    dts = (0.01, 0.1, 1.0, 10.0)
    worst0 = worst_gd = worst_ineq = worst_gid = worst_eq = 0.0
    skipped = 0
    for name, (obj, th0) in starts.items():
        n = obj.dimension
        for dt in dts:
            res = thm0_residuals(obj, None, th0, dt, savgd=True)
            worst_gd = max(worst_gd, np.nanmax(res))
            skipped += int(np.isnan(res).sum())
            for op in energy_operators(obj, n).values():
                res = thm0_residuals(obj, op, th0, dt)
                worst0 = max(worst0, np.nanmax(res))
                skipped += int(np.isnan(res).sum())
                for adaptive in (False, True):
                    rows = relaxed_run(obj, op, th0, dt, adaptive=adaptive)
                    worst_ineq = max(worst_ineq, rows[:, 0].max())
                    worst_gid = max(worst_gid, rows[:, 1].max())
                    inner = (rows[:, 2] > 0) & (rows[:, 2] < 1)
                    if inner.any():
                        worst_eq = max(worst_eq, rows[inner, 3].max())
    out.append(_le("sav", "energy identity (modified SAV)", worst0, 1e-9))
    out.append(_le("sav", "energy identity (SAV-GD)", worst_gd, 1e-9))
    out.append(_le("sav", "relaxed dissipation inequality excess", worst_ineq, 1e-12))
    out.append(_le("sav", "G inner-product identity", worst_gid, 1e-9))
    out.append(_le("sav", "relaxed equality at interior xi", worst_eq, 1e-9))

    # special-case collapses, bit for bit
    s1 = s2 = s3 = sav.init_state(quad, np.ones(100), 0.1)
    z = operators.zero(100)
    same = True
    for _ in range(1000):
        s1, _ = sav.savgd_step(s1, quad)
        s2, _ = sav.modified_sav_step(s2, quad, z)
        s3, _ = sav.rsavq_step(s3, quad, z, sav.QParams(0.5, False))
        same &= np.array_equal(s1.theta, s2.theta) and s1.r == s2.r
        same &= np.array_equal(s1.theta, s3.theta) and s1.r == s3.r
    out.append(_le("sav", "savgd = modified SAV(0) = rsavq(1/2) bitwise", 0.0 if same else 1.0, 0.0))

    rng = np.random.default_rng(4)
    gap = 0.0
    for obj in (problems.RosenbrockProblem(6), problems.QuadraticProblem(8)):
        for op in (operators.zero(obj.dimension), operators.composite(0.5, 0.3, obj.dimension),
                   operators.diagonal(rng.uniform(0, 2, obj.dimension))):
            for dt in (0.01, 1.0, 10.0):
                th = rng.standard_normal(obj.dimension)
                r = float(np.sqrt(evaluate(obj, th) + obj.shift_C)) * rng.uniform(0.5, 1.0)
                gap = max(gap, implicit_gap(obj, op, th, r, dt))
    out.append(_le("sav", "explicit update solves the implicit system", gap, 1e-10))

    # monotone modified energy and positive steps
    worst_rise = 0.0
    min_alpha = np.inf
    for obj, th0 in starts.values():
        n = obj.dimension
        op = operators.periodic_laplacian(0.5, n)
        for step in ("sav", "savgd", "rsav", "adaptive", "rsavq"):
            state = sav.init_state(obj, th0, 1.0)
            for _ in range(300):
                if step == "sav":
                    new, rec = sav.modified_sav_step(state, obj, op)
                elif step == "savgd":
                    new, rec = sav.savgd_step(state, obj)
                elif step == "rsav":
                    new, rec = sav.rsav_step(state, obj, op)
                elif step == "adaptive":
                    new, rec = sav.adaptive_rsav_step(state, obj, op)
                else:
                    new, rec = sav.rsavq_step(state, obj, op, sav.QParams(0.5, False))
                worst_rise = max(worst_rise, _rel(max(new.r ** 2 - state.r ** 2, 0.0),
                                                  state.r ** 2))
                # alpha is proportional to r_{k+1}; it can only underflow with r
                if rec.grad_norm > 0 and new.r >= R_FLOOR:
                    min_alpha = min(min_alpha, rec.alpha)
                state = new
    out.append(_le("sav", "r^2 non-increasing", max(worst_rise, 0.0), 1e-15))
    out.append(CheckResult("sav", "step size alpha > 0", bool(min_alpha > 0), float(min_alpha), 0.0))

    # fixed points: zero gradient leaves theta untouched
    moved = 0.0
    for obj, th in ((quad, np.zeros(100)), (rosen, np.ones(2))):
        op = operators.composite(0.2, 0.3, obj.dimension)
        st = sav.init_state(obj, th, 1.0)
        for new, _ in (sav.modified_sav_step(st, obj, op), sav.savgd_step(st, obj),
                       sav.msav_step(st, obj, op), sav.rsav_step(st, obj, op),
                       sav.adaptive_rsav_step(st, obj, op),
                       sav.rsavq_step(st, obj, op, sav.QParams(0.3, True)),
                       sav.linesearch_sav_step(st, obj, op, wolfe=(1e-4, 0.9))):
            moved = max(moved, float(np.max(np.abs(new.theta - th))))
        moved = max(moved, float(np.max(np.abs(baselines.gd_step(th, obj, op, 1.0) - th))))
        moved = max(moved, float(np.max(np.abs(baselines.steepest_descent_step(th, obj)[0] - th))))
    out.append(_le("sav", "stationary points are fixed", moved, 0.0))
    return out


def verify_suite(scope: str = "all") -> VerifyReport:
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    results = []
    if scope in ("operators", "all"):
        results += check_operators()
    if scope in ("problems", "all"):
        results += check_problems()
    if scope in ("sav", "all"):
        results += check_sav()
    return VerifyReport(results)
