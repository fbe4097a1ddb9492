#!/usr/bin/env python3
"""Compare the analytic two-sided exit transform with a Monte Carlo estimate.

Defaults: Cramer-Lundberg (c = 2, lambda = 1, claim mean 1), x = 5, a = 15,
two-level rate 0.2 / 0.5 switching at 10.
"""

import argparse

from lcftax.montecarlo import estimate_exit_transform
from lcftax.paths import CramerLundberg
from lcftax.rates import two_level_rate
from lcftax.scale import ExitProblem, exit_transform, scale_function


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--x", type=float, default=5.0)
    parser.add_argument("--a", type=float, default=15.0)
    parser.add_argument("--q", type=float, default=0.0)
    parser.add_argument("--n-paths", type=int, default=100_000)
    parser.add_argument("--horizon", type=float, default=500.0)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    model = CramerLundberg(2.0, 1.0, 1.0)
    rate = two_level_rate(0.2, 0.5, 10.0, args.x)
    analytic = exit_transform(ExitProblem(args.x, args.a, args.q, rate), scale_function(model, args.q))
    est = estimate_exit_transform(
        model, args.x, args.a, args.q, rate, args.n_paths, args.horizon, args.seed, workers=args.workers
    )
    gap = abs(analytic - est.value)
    allowed = 3 * est.std_error + est.bias_bound
    print(f"analytic   {analytic:.6f}")
    print(f"monte carlo {est.value:.6f} +/- {est.std_error:.2e}  ({est.truncation_note})")
    print(f"|diff| {gap:.2e} vs 3 SE + bias {allowed:.2e}: {'ok' if gap <= allowed else 'OUTSIDE'}")
    return 0 if gap <= allowed else 1


if __name__ == "__main__":
    raise SystemExit(main())
