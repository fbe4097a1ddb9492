#!/usr/bin/env python3
"""Tabulate survival with constant-rate tax against phi_0(x)^(1/(1-delta))."""

import argparse

from lcftax.montecarlo import estimate_survival
from lcftax.paths import CramerLundberg
from lcftax.rates import constant_rate
from lcftax.scale import phi_0, survival_probability


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-paths", type=int, default=20_000)
    parser.add_argument("--horizon", type=float, default=200.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model = CramerLundberg(2.0, 1.0, 1.0)
    print(f"{'delta':>5} {'x':>5} {'closed':>10} {'quadrature':>10} {'MC':>10} {'SE':>8}")
    for delta in (0.25, 0.5):
        for x in (2.0, 5.0, 10.0):
            rate = constant_rate(delta, x)
            closed = float(phi_0(model, x)) ** (1 / (1 - delta))
            quad_val = survival_probability(model, x, rate).value
            est = estimate_survival(model, x, rate, args.n_paths, args.horizon, args.seed)
            print(f"{delta:5.2f} {x:5.1f} {closed:10.6f} {quad_val:10.6f} {est.value:10.6f} {est.std_error:8.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
