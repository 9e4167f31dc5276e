"""Seed scan for desk-scale phase retrieval.

For each seed, builds the problem (truth, masks) and a random start from that
seed, then runs adaptive RSAV and exact steepest descent until the loss drops
below 1e-6 of its initial value or the iteration budget runs out.

    python scripts/phase_retrieval_seeds.py --seeds 10 --iterations 20000
"""

import argparse


from savopt import baselines, operators, problems, sav
from savopt.objective import evaluate


def run_rsav(pr, theta, iterations, tol):
    op = operators.zero(pr.dimension)
    adapt = sav.AdaptiveParams(1.0)
    state = sav.init_state(pr, theta, 1.0)
    f0 = evaluate(pr, theta)
    for k in range(iterations):
        state, rec = sav.adaptive_rsav_step(state, pr, op, adapt=adapt)
        if rec.f / f0 < tol:
            return k, rec.f / f0
    return iterations, evaluate(pr, state.theta) / f0


def run_sd(pr, theta, iterations, tol):
    f0 = evaluate(pr, theta)
    for k in range(iterations):
        theta, _ = baselines.steepest_descent_step(theta, pr)
        f = evaluate(pr, theta)
        if f / f0 < tol:
            return k + 1, f / f0
    return iterations, evaluate(pr, theta) / f0


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=20000)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--masks", type=int, default=6)
    args = ap.parse_args()
    print("shape    seed  rsav_iters  rsav_rel    sd_iters  sd_rel")
    for shape in ((64,), (32, 32)):
        for seed in range(args.seeds):
            pr = problems.PhaseRetrievalProblem(shape, masks=args.masks, seed=seed)
            theta0 = pr.random_init(seed)
            kr, fr = run_rsav(pr, theta0, args.iterations, args.tol)
            ks, fs = run_sd(pr, theta0, args.iterations, args.tol)
            label = "x".join(map(str, shape))
            print(f"{label:<8} {seed:>4}  {kr:>10}  {fr:.2e}  {ks:>8}  {fs:.2e}", flush=True)


if __name__ == "__main__":
    main()
