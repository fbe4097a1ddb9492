"""Taxed paths under loss-carry-forward taxation.

Both tax processes are evaluated in closed form through the running maximum:
for a latent rate ``U_t = X_t - Xbar_t + gamma_bar(Xbar_t)`` and for a
natural rate ``V_t = X_t - Xbar_t + y(Xbar_t - x)``. The discretized
schemes ``stieltjes_oracle`` and ``euler_fixed_point_oracle`` integrate the
defining equations directly and exist to check those closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np

from .paths import Direction, PiecewiseLinearPath, first_passage, passage_on_nodes, running_max
from .rates import GammaBarMap, RateFunction, RateOdeSolution, gamma_bar, solve_rate_ode


@dataclass(frozen=True, eq=False)
class OdeLevelMap:
    """``s -> y(s - x)``: maps the pre-tax running maximum to the natural one."""

    solution: RateOdeSolution

    def __call__(self, s):
        return self.solution(np.asarray(s, dtype=float) - self.solution.base)

    def inverse(self, level):
        return self.solution.base + self.solution.inverse(level)

    @property
    def limit(self) -> float:
        return self.solution.limit


LevelMap = Union[GammaBarMap, OdeLevelMap]


@dataclass(frozen=True, eq=False)
class TaxedPath:
    """A pre-tax path with the cumulative tax attached.

    With ``level_map`` set the cumulative tax is ``Xbar - level_map(Xbar)``;
    oracle paths instead carry the tax tabulated on ``node_times`` and
    interpolate linearly in between.
    """

    pre_tax: PiecewiseLinearPath
    regime: Literal["latent", "natural"]
    rate: RateFunction
    level_map: Optional[LevelMap]
    node_times: np.ndarray
    node_tax: Optional[np.ndarray] = None
    _node_left: np.ndarray = field(init=False, repr=False)
    _node_right: np.ndarray = field(init=False, repr=False)
    _node_max: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.level_map is None and self.node_tax is None:
            raise ValueError("a taxed path needs a level map or tabulated tax")
        t = self.node_times
        tax = self.total_tax(t)
        left = self.pre_tax.value_left(t) - tax
        right = self.pre_tax.value(t) - tax
        object.__setattr__(self, "_node_left", left)
        object.__setattr__(self, "_node_right", right)
        object.__setattr__(self, "_node_max", np.maximum.accumulate(np.maximum(left, right)))

    @property
    def start_value(self) -> float:
        return self.pre_tax.start_value

    @property
    def ceiling(self) -> float:
        """Level the taxed running maximum can never exceed (may be ``inf``)."""
        return self.level_map.limit if self.level_map is not None else math.inf

    def total_tax(self, t):
        """Cumulative tax paid over (0, t]."""
        if self.level_map is not None:
            xbar = running_max(self.pre_tax, t)
            return xbar - self.level_map(xbar)
        return np.interp(t, self.node_times, self.node_tax)

    def values(self, t):
        return self.pre_tax.value(t) - self.total_tax(t)

    def running_max(self, t):
        """Supremum of the taxed path over [0, t], computed from its own values.

        Between nodes the taxed path is monotone, so the supremum is attained
        at a node (left limits included) or at ``t`` itself.
        """
        t_arr = np.asarray(t, dtype=float)
        i = np.searchsorted(self.node_times, t_arr, side="right") - 1
        out = np.maximum(self._node_max[i], self.values(t_arr))
        return out if np.ndim(out) else float(out)

    def closed_form_max(self, t):
        """``level_map(Xbar_t)``: the running maximum predicted by the change of variables."""
        if self.level_map is None:
            raise ValueError("oracle paths have no closed-form running maximum")
        return self.level_map(running_max(self.pre_tax, t))

    def to_csv(self, target: str | Path, grid=None) -> None:
        times = self.pre_tax.times
        if grid is not None:
            times = np.union1d(times, np.asarray(grid, dtype=float))
        cols = [
            times,
            self.pre_tax.value(times),
            running_max(self.pre_tax, times),
            self.values(times),
            self.running_max(times),
            self.total_tax(times),
        ]
        lines = ["t,X,Xbar,taxed,taxed_bar,cumulative_tax"]
        lines += [",".join(format(float(v), ".17g") for v in row) for row in zip(*cols)]
        Path(target).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def apply_latent_tax(path: PiecewiseLinearPath, rate: RateFunction) -> TaxedPath:
    """U_t = X_t - int_(0,t] gamma(Xbar_s) dXbar_s, evaluated exactly."""
    gb = gamma_bar(rate, path.start_value)
    return TaxedPath(path, "latent", rate, gb, path.times)


def apply_natural_tax(path: PiecewiseLinearPath, rate: RateFunction) -> TaxedPath:
    """The natural tax process, built as the latent process with rate delta(y(s - x))."""
    sol = solve_rate_ode(rate, path.start_value)
    return TaxedPath(path, "natural", rate, OdeLevelMap(sol), path.times)


def _oracle_grid(path: PiecewiseLinearPath, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be positive")
    uniform = np.arange(0.0, path.horizon, step)
    return np.union1d(uniform, path.times)


def stieltjes_oracle(path: PiecewiseLinearPath, rate: RateFunction, step: float) -> TaxedPath:
    """Left-point Riemann-Stieltjes sum for the latent tax on a grid of spacing ``step``.

    The grid is refined with every path breakpoint. The error is at most the
    variation of ``gamma`` over one grid cell times the rise of Xbar there,
    summed over cells, so O(step) for rates of bounded variation.
    """
    rate = rate.restrict(path.start_value)
    grid = _oracle_grid(path, step)
    xbar = running_max(path, grid)
    increments = rate(xbar[:-1]) * np.diff(xbar)
    tax = np.concatenate(([0.0], np.cumsum(increments)))
    return TaxedPath(path, "latent", rate, None, grid, tax)


def euler_fixed_point_oracle(path: PiecewiseLinearPath, rate: RateFunction, step: float) -> TaxedPath:
    """Forward recursion of the natural tax equation, independent of the ODE.

    ``tax_{i+1} = tax_i + delta(Vbar_i) (Xbar_{i+1} - Xbar_i)``, with the taxed
    running maximum updated from the left limit at the next node.
    """
    rate = rate.restrict(path.start_value)
    grid = _oracle_grid(path, step)
    xbar = running_max(path, grid)
    x_left = path.value_left(grid)
    d_xbar = np.diff(xbar)
    tax = np.zeros(grid.size)
    vbar = path.start_value
    acc = 0.0
    for i in range(grid.size - 1):
        if d_xbar[i] > 0.0:
            acc += float(rate(vbar)) * d_xbar[i]
            vbar = max(vbar, x_left[i + 1] - acc)
        tax[i + 1] = acc
    return TaxedPath(path, "natural", rate, None, grid, tax)


@dataclass(frozen=True)
class MaxTimeReport:
    n_samples: int
    set_violations: np.ndarray
    max_identity_error: float
    identity_violations: np.ndarray
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.set_violations.size == 0 and self.identity_violations.size == 0


def check_max_time_equality(taxed: TaxedPath, sample_times, tol: float = 1e-9) -> MaxTimeReport:
    """Compare the times where the taxed path and X sit at their running maxima.

    Also checks that the taxed running maximum equals ``Xbar - cumulative tax``.
    """
    t = np.asarray(sample_times, dtype=float)
    x = taxed.pre_tax.value(t)
    xbar = running_max(taxed.pre_tax, t)
    h = taxed.values(t)
    hbar = taxed.running_max(t)
    at_max_x = (xbar - x) <= tol
    at_max_h = (hbar - h) <= tol
    set_bad = t[at_max_x != at_max_h]
    ident_err = np.abs(hbar - (xbar - taxed.total_tax(t)))
    scale = np.maximum(1.0, np.abs(xbar))
    return MaxTimeReport(
        n_samples=int(t.size),
        set_violations=set_bad,
        max_identity_error=float(ident_err.max(initial=0.0)),
        identity_violations=t[ident_err > tol * scale],
        tolerance=tol,
    )


def first_passage_taxed(taxed: TaxedPath, level: float, direction: Direction) -> float:
    """Exact first passage of the taxed process; ``math.inf`` if none by the horizon.

    Upward passages go through the pre-tax path: the taxed process exceeds
    ``level`` exactly when X exceeds ``level_map^{-1}(level)``.
    """
    if direction == "up" and taxed.level_map is not None:
        if taxed.start_value > level:
            return 0.0
        if level >= taxed.level_map.limit:
            return math.inf
        x_level = float(taxed.level_map.inverse(level))
        return first_passage(taxed.pre_tax, x_level, "up")
    # down-crossings only happen on affine stretches where Xbar is flat, or at jumps
    return passage_on_nodes(taxed.node_times, taxed._node_left, taxed._node_right, level, direction)
