"""Monte Carlo estimators for exit transforms and survival probabilities.

Paths are simulated in batches of ``BATCH_SIZE``; batch ``k`` draws from
``RngStream(seed, k)``. Since the batch layout depends only on ``n_paths``,
results do not depend on how many workers process the batches, and
batch results are always reduced in batch order.

For the Cramer-Lundberg model the simulation is event driven and exact: the
pre-tax path rises at rate c between claims, the taxed running maximum is
``level_map(Xbar)``, upward passages of the taxed process are read off Xbar,
and ruin can only happen at claim instants. Brownian paths use an Euler grid.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .paths import BrownianWithDrift, CramerLundberg, LevyModel, RngStream
from .rates import RateFunction, solve_rate_ode
from .taxation import OdeLevelMap

BATCH_SIZE = 10_000


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_paths: int
    horizon: float
    unresolved: int
    bias_bound: float
    truncation_note: str

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class _BatchResult:
    tau_up: np.ndarray
    tau_down: np.ndarray
    final_taxed: np.ndarray


def _simulate_cl_batch(
    model: CramerLundberg,
    x: float,
    level_map: OdeLevelMap,
    up_level: Optional[float],
    n: int,
    horizon: float,
    gen: np.random.Generator,
    trace: Optional[list] = None,
) -> _BatchResult:
    c = model.premium_rate
    lam = model.claim_intensity
    t = np.zeros(n)
    X = np.full(n, float(x))
    M = np.full(n, float(x))
    tau_up = np.full(n, math.inf)
    tau_down = np.full(n, math.inf)
    final = np.full(n, math.nan)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        m = idx.size
        gaps = gen.exponential(1.0 / lam, m) if lam > 0 else np.full(m, math.inf)
        claims = gen.exponential(model.claim_mean, m)
        if trace is not None:
            trace.append((idx, gaps, claims))
        t_i, X_i, M_i = t[idx], X[idx], M[idx]
        t_claim = t_i + gaps
        t_stop = np.minimum(t_claim, horizon)
        peak = X_i + c * (t_stop - t_i)
        done = np.zeros(m, dtype=bool)
        if up_level is not None:
            up = peak > up_level
            tau_up[idx[up]] = t_i[up] + (up_level - X_i[up]) / c
            done |= up
        M_new = np.maximum(M_i, peak)
        expired = ~done & (t_claim > horizon)
        taxed_max = level_map(M_new)
        final[idx[expired]] = (peak - M_new + taxed_max)[expired]
        done |= expired
        live = ~done
        X_after = peak - claims
        ruined = live & (X_after - M_new + taxed_max < 0)
        tau_down[idx[ruined]] = t_claim[ruined]
        done |= ruined
        t[idx] = t_claim
        X[idx] = X_after
        M[idx] = M_new
        active[idx[done]] = False
    return _BatchResult(tau_up, tau_down, final)


def _simulate_bm_batch(
    model: BrownianWithDrift,
    x: float,
    level_map: OdeLevelMap,
    up_level: Optional[float],
    n: int,
    horizon: float,
    gen: np.random.Generator,
    step: float,
) -> _BatchResult:
    n_steps = int(math.ceil(horizon / step - 1e-9))
    dt = horizon / n_steps
    X = np.full(n, float(x))
    M = np.full(n, float(x))
    tau_up = np.full(n, math.inf)
    tau_down = np.full(n, math.inf)
    final = np.full(n, math.nan)
    active = np.ones(n, dtype=bool)
    sd = model.volatility * math.sqrt(dt)
    for k in range(n_steps):
        idx = np.flatnonzero(active)
        if not idx.size:
            break
        X_i, M_i = X[idx], M[idx]
        X_new = X_i + model.drift * dt + sd * gen.standard_normal(idx.size)
        t0 = k * dt
        done = np.zeros(idx.size, dtype=bool)
        V_old = X_i - M_i + level_map(M_i)
        M_new = np.maximum(M_i, X_new)
        V_new = X_new - M_new + level_map(M_new)
        # linear interpolation inside the step, matching the path representation
        down = V_new < 0
        frac = np.where(down, V_old / np.where(down, V_old - V_new, 1.0), 0.0)
        if up_level is not None:
            up = ~down & (X_new > up_level)
            frac_up = (up_level - X_i) / np.where(up, X_new - X_i, 1.0)
            tau_up[idx[up]] = t0 + frac_up[up] * dt
            done |= up
        tau_down[idx[down]] = t0 + np.clip(frac[down], 0, 1) * dt
        done |= down
        X[idx], M[idx] = X_new, M_new
        active[idx[done]] = False
    idx = np.flatnonzero(active)
    final[idx] = X[idx] - M[idx] + level_map(M[idx])
    return _BatchResult(tau_up, tau_down, final)


def _run_batches(model, x, level_map, up_level, n_paths, horizon, seed, workers, step) -> list[_BatchResult]:
    sizes = [min(BATCH_SIZE, n_paths - k) for k in range(0, n_paths, BATCH_SIZE)]

    def one(k: int) -> _BatchResult:
        gen = RngStream(seed, k).generator()
        if isinstance(model, CramerLundberg):
            return _simulate_cl_batch(model, x, level_map, up_level, sizes[k], horizon, gen)
        return _simulate_bm_batch(model, x, level_map, up_level, sizes[k], horizon, gen, step)

    if workers <= 1:
        return [one(k) for k in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(sizes))))


def _summarize(payoff: np.ndarray) -> tuple[float, float]:
    n = payoff.size
    mean = float(np.sum(payoff) / n)
    sd = float(np.std(payoff, ddof=1)) if n > 1 else 0.0
    return mean, sd / math.sqrt(n)


def write_batch_csv(path: Union[str, Path], payoff: np.ndarray) -> None:
    """One row per batch: index, path count, mean payoff and its standard error."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch", "n_paths", "mean", "std_error"])
        for k, start in enumerate(range(0, payoff.size, BATCH_SIZE)):
            chunk = payoff[start : start + BATCH_SIZE]
            mean, se = _summarize(chunk)
            w.writerow([k, chunk.size, repr(mean), repr(se)])


def estimate_exit_transform(
    model: LevyModel,
    x: float,
    a: float,
    q: float,
    rate: RateFunction,
    n_paths: int,
    horizon: float,
    seed: int,
    *,
    workers: int = 1,
    step: float = 0.01,
    batch_csv: Optional[Union[str, Path]] = None,
) -> MCEstimate:
    """MC estimate of E_x[e^{-q tau_a^+} ; tau_a^+ < tau_0^-] for the natural tax process.

    Paths with neither passage by ``horizon`` contribute 0; their share times
    ``e^{-q horizon}`` bounds the (downward) bias and is reported. With
    ``batch_csv`` set, per-batch summaries are written there.
    """
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    if not 0 <= x < a:
        raise ValueError("need 0 <= x < a")
    rate = rate.restrict(x)
    level_map = OdeLevelMap(solve_rate_ode(rate, x))
    if a >= level_map.limit:
        if batch_csv is not None:
            write_batch_csv(batch_csv, np.zeros(n_paths))
        return MCEstimate(0.0, 0.0, n_paths, horizon, 0, 0.0, "a >= y(inf): the taxed process never exceeds a")
    up_level = float(level_map.inverse(a))
    batches = _run_batches(model, x, level_map, up_level, n_paths, horizon, seed, workers, step)
    tau_up = np.concatenate([b.tau_up for b in batches])
    tau_down = np.concatenate([b.tau_down for b in batches])
    win = (tau_up < tau_down) & (tau_up <= horizon)
    payoff = np.where(win, np.exp(-q * np.where(win, tau_up, 0.0)), 0.0)
    value, se = _summarize(payoff)
    if batch_csv is not None:
        write_batch_csv(batch_csv, payoff)
    unresolved = int(np.sum(np.isinf(tau_up) & np.isinf(tau_down)))
    bias = unresolved / n_paths * math.exp(-q * horizon)
    note = f"{unresolved} paths unresolved at horizon; estimate may be low by at most {bias:.3g}"
    if isinstance(model, BrownianWithDrift):
        note += f"; Euler step {step}"
    return MCEstimate(value, se, n_paths, horizon, unresolved, bias, note)


def classical_ruin_probability(model: LevyModel, u):
    """Textbook ruin probability without tax from initial capital ``u``."""
    u = np.asarray(u, dtype=float)
    if model.mean_drift <= 0:
        return np.ones_like(u)
    if isinstance(model, CramerLundberg):
        c, lam, mu = model.premium_rate, model.claim_intensity, model.claim_rate
        out = lam / (c * mu) * np.exp(-(mu - lam / c) * u)
    else:
        out = np.exp(-2.0 * model.drift * u / model.volatility**2)
    return np.where(u < 0, 1.0, np.minimum(out, 1.0))


def residual_ruin_bound(model: LevyModel, taxed_value, max_rate: float):
    """Upper bound on ruin after the horizon, given the taxed value there.

    From then on the taxed process dominates ``v + Y - d Ybar`` with
    ``d = max_rate`` and Y a fresh copy of X, whose ruin probability is
    ``1 - (1 - psi_0(v))^{1/(1-d)}`` with ``psi_0`` the untaxed ruin probability.
    """
    if max_rate >= 1:
        return np.ones_like(np.asarray(taxed_value, dtype=float))
    surv = 1.0 - classical_ruin_probability(model, taxed_value)
    return 1.0 - surv ** (1.0 / (1.0 - max_rate))


def estimate_survival(
    model: LevyModel,
    x: float,
    rate: RateFunction,
    n_paths: int,
    horizon: float,
    seed: int,
    *,
    workers: int = 1,
    step: float = 0.01,
    batch_csv: Optional[Union[str, Path]] = None,
) -> MCEstimate:
    """Fraction of taxed paths that stay at or above 0 up to ``horizon``.

    The finite horizon can only overestimate survival; the reported bias bound
    averages :func:`residual_ruin_bound` over the surviving paths.
    """
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    rate = rate.restrict(x)
    level_map = OdeLevelMap(solve_rate_ode(rate, x))
    batches = _run_batches(model, x, level_map, None, n_paths, horizon, seed, workers, step)
    tau_down = np.concatenate([b.tau_down for b in batches])
    final = np.concatenate([b.final_taxed for b in batches])
    survived = np.isinf(tau_down)
    value, se = _summarize(survived.astype(float))
    if batch_csv is not None:
        write_batch_csv(batch_csv, survived.astype(float))
    if math.isfinite(level_map.limit):
        bias = float(np.sum(survived)) / n_paths
        note = "taxed process is capped, every survivor is eventually ruined"
    else:
        bound = residual_ruin_bound(model, final[survived], rate.sup)
        bias = float(np.sum(bound)) / n_paths
        note = f"finite horizon overestimates survival by at most {bias:.3g}"
    if isinstance(model, BrownianWithDrift):
        note += f"; Euler step {step}"
    return MCEstimate(value, se, n_paths, horizon, int(np.sum(survived)), bias, note)
